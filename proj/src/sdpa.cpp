#include "lipcert/sdpa.hpp"

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "lipcert/util.hpp"

namespace lipcert {

namespace {

// matno (0 = constant matrix), block number, row, col — all 1-based in the
// file except matno.
using EntryKey = std::tuple<int, int, int, int>;

void accumulate(std::map<EntryKey, double>& entries, int matno, int blkno, int row,
                int col, double v) {
    if (v == 0.0) return;
    entries[{matno, blkno, row, col}] += v;
}

}  // namespace

std::string export_sdpa(const ConicProblem& problem) {
    const int n_psd = static_cast<int>(problem.blocks.size());
    const long diag_slots = 2 * static_cast<long>(problem.equalities.size()) +
                            static_cast<long>(problem.inequalities.size());
    const int n_blocks = n_psd + (diag_slots > 0 ? 1 : 0);
    const int diag_blkno = n_psd + 1;

    std::map<EntryKey, double> entries;
    for (int b = 0; b < n_psd; ++b) {
        const ConicBlock& blk = problem.blocks[static_cast<std::size_t>(b)];
        for (const ConicEntry& e : blk.entries) {
            accumulate(entries, 0, b + 1, e.row + 1, e.col + 1, -e.constant);
            for (const auto& [idx, coef] : e.form)
                accumulate(entries, idx + 1, b + 1, e.row + 1, e.col + 1, coef);
        }
    }
    int slot = 0;
    for (const ConicRow& row : problem.equalities) {
        // g.y = h  ->  slots g.y - h >= 0 and h - g.y >= 0
        ++slot;
        accumulate(entries, 0, diag_blkno, slot, slot, row.rhs);
        for (const auto& [idx, coef] : row.form)
            accumulate(entries, idx + 1, diag_blkno, slot, slot, coef);
        ++slot;
        accumulate(entries, 0, diag_blkno, slot, slot, -row.rhs);
        for (const auto& [idx, coef] : row.form)
            accumulate(entries, idx + 1, diag_blkno, slot, slot, -coef);
    }
    for (const ConicRow& row : problem.inequalities) {
        // g.y <= h  ->  slot h - g.y >= 0
        ++slot;
        accumulate(entries, 0, diag_blkno, slot, slot, -row.rhs);
        for (const auto& [idx, coef] : row.form)
            accumulate(entries, idx + 1, diag_blkno, slot, slot, -coef);
    }

    std::vector<double> c(static_cast<std::size_t>(problem.n_y), 0.0);
    const double obj_sign = problem.maximize ? -1.0 : 1.0;
    for (const auto& [idx, coef] : problem.objective)
        c[static_cast<std::size_t>(idx)] += obj_sign * coef;

    std::ostringstream out;
    out << problem.n_y << "\n" << n_blocks << "\n";
    for (int b = 0; b < n_psd; ++b) {
        if (b) out << " ";
        out << problem.blocks[static_cast<std::size_t>(b)].dim;
    }
    if (diag_slots > 0) {
        if (n_psd) out << " ";
        out << -diag_slots;
    }
    out << "\n";
    for (int i = 0; i < problem.n_y; ++i) {
        if (i) out << " ";
        out << fmt_g17(c[static_cast<std::size_t>(i)]);
    }
    out << "\n";
    for (const auto& [key, v] : entries) {
        if (v == 0.0) continue;
        const auto& [matno, blkno, row, col] = key;
        out << matno << " " << blkno << " " << row << " " << col << " " << fmt_g17(v)
            << "\n";
    }
    return out.str();
}

void write_sdpa(const ConicProblem& problem, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << export_sdpa(problem);
    if (!f) throw std::runtime_error("failed writing " + path);
}

namespace {

struct Token {
    int line;
    std::string text;
};

class TokenStream {
public:
    TokenStream(const std::string& text, std::string origin) : origin_(std::move(origin)) {
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && (line[0] == '*' || line[0] == '"')) continue;
            std::string cleaned = line;
            for (char& ch : cleaned)
                if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')' ||
                    ch == '\r')
                    ch = ' ';
            std::istringstream ls(cleaned);
            std::string tok;
            while (ls >> tok) tokens_.push_back({line_no, tok});
        }
    }

    bool done() const { return pos_ >= tokens_.size(); }
    /// Line of the most recently consumed token; validation errors blame the
    /// value they just read, not whatever happens to follow it.
    int line() const { return last_line_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw std::runtime_error(origin_ + ":" + std::to_string(line()) + ": " + msg);
    }

    long next_int(const char* what) {
        const std::string tok = next(what);
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size()) fail(std::string("expected integer ") + what + ", got '" + tok + "'");
        return v;
    }

    double next_double(const char* what) {
        const std::string tok = next(what);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size()) fail(std::string("expected number ") + what + ", got '" + tok + "'");
        return v;
    }

private:
    std::string next(const char* what) {
        if (done()) {
            if (!tokens_.empty()) last_line_ = tokens_.back().line;
            fail(std::string("unexpected end of file, expected ") + what);
        }
        last_line_ = tokens_[pos_].line;
        return tokens_[pos_++].text;
    }

    std::string origin_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int last_line_ = 1;
};

}  // namespace

ConicProblem parse_sdpa(const std::string& text, const std::string& origin) {
    TokenStream ts(text, origin);
    const long m = ts.next_int("variable count");
    if (m < 0) ts.fail("negative variable count");
    const long n_blocks = ts.next_int("block count");
    if (n_blocks < 0) ts.fail("negative block count");

    std::vector<long> sizes(static_cast<std::size_t>(n_blocks));
    for (long b = 0; b < n_blocks; ++b) {
        sizes[static_cast<std::size_t>(b)] = ts.next_int("block size");
        if (sizes[static_cast<std::size_t>(b)] == 0) ts.fail("zero block size");
    }

    ConicProblem problem;
    problem.n_y = static_cast<int>(m);
    problem.maximize = false;
    for (long i = 0; i < m; ++i) {
        const double c = ts.next_double("objective coefficient");
        if (c != 0.0) problem.objective.emplace_back(static_cast<int>(i), c);
    }

    // Map file blocks to matrix blocks / scalar-row ranges.
    std::vector<int> psd_of_block(static_cast<std::size_t>(n_blocks), -1);
    std::vector<long> slot_base(static_cast<std::size_t>(n_blocks), -1);
    long total_slots = 0;
    for (long b = 0; b < n_blocks; ++b) {
        const long sz = sizes[static_cast<std::size_t>(b)];
        if (sz > 0) {
            psd_of_block[static_cast<std::size_t>(b)] =
                static_cast<int>(problem.blocks.size());
            ConicBlock blk;
            blk.dim = static_cast<int>(sz);
            blk.label = "block_" + std::to_string(b + 1);
            problem.blocks.push_back(std::move(blk));
        } else {
            slot_base[static_cast<std::size_t>(b)] = total_slots;
            total_slots += -sz;
        }
    }
    problem.inequalities.resize(static_cast<std::size_t>(total_slots));
    for (long s = 0; s < total_slots; ++s) {
        problem.inequalities[static_cast<std::size_t>(s)].rhs = 0.0;
        problem.inequalities[static_cast<std::size_t>(s)].label =
            "slot_" + std::to_string(s + 1);
    }

    // Accumulate entries per destination, then normalize.
    std::vector<std::map<std::pair<int, int>, std::pair<double, std::map<int, double>>>>
        psd_entries(problem.blocks.size());
    std::vector<std::map<int, double>> slot_forms(static_cast<std::size_t>(total_slots));
    std::vector<double> slot_rhs(static_cast<std::size_t>(total_slots), 0.0);

    while (!ts.done()) {
        const long matno = ts.next_int("matrix number");
        const long blkno = ts.next_int("block number");
        const long row = ts.next_int("row index");
        const long col = ts.next_int("column index");
        const double value = ts.next_double("entry value");
        if (matno < 0 || matno > m) ts.fail("matrix number out of range");
        if (blkno < 1 || blkno > n_blocks) ts.fail("block number out of range");
        const long sz = sizes[static_cast<std::size_t>(blkno - 1)];
        const long dim = sz > 0 ? sz : -sz;
        if (row < 1 || col < 1 || row > dim || col > dim)
            ts.fail("entry index out of range");
        if (value == 0.0) continue;
        if (sz > 0) {
            const int pb = psd_of_block[static_cast<std::size_t>(blkno - 1)];
            const int r = static_cast<int>(std::min(row, col)) - 1;
            const int c = static_cast<int>(std::max(row, col)) - 1;
            auto& slot = psd_entries[static_cast<std::size_t>(pb)][{r, c}];
            if (matno == 0)
                slot.first += -value;  // F(y) = sum y_i F_i - F_0
            else
                slot.second[static_cast<int>(matno) - 1] += value;
        } else {
            if (row != col) ts.fail("off-diagonal entry in a diagonal block");
            const long s = slot_base[static_cast<std::size_t>(blkno - 1)] + row - 1;
            if (matno == 0)
                slot_rhs[static_cast<std::size_t>(s)] += -value;
            else
                slot_forms[static_cast<std::size_t>(s)][static_cast<int>(matno) - 1] -=
                    value;
        }
    }

    for (std::size_t pb = 0; pb < problem.blocks.size(); ++pb) {
        for (const auto& [rc, data] : psd_entries[pb]) {
            ConicEntry e;
            e.row = rc.first;
            e.col = rc.second;
            e.constant = data.first;
            for (const auto& [idx, coef] : data.second)
                if (coef != 0.0) e.form.emplace_back(idx, coef);
            if (e.constant != 0.0 || !e.form.empty())
                problem.blocks[pb].entries.push_back(std::move(e));
        }
    }
    for (long s = 0; s < total_slots; ++s) {
        ConicRow& row = problem.inequalities[static_cast<std::size_t>(s)];
        row.rhs = slot_rhs[static_cast<std::size_t>(s)];
        for (const auto& [idx, coef] : slot_forms[static_cast<std::size_t>(s)])
            if (coef != 0.0) row.form.emplace_back(idx, coef);
    }
    return problem;
}

ConicProblem import_sdpa(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_sdpa(buf.str(), path);
}

}  // namespace lipcert
