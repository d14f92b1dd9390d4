#include "lipcert/moments.hpp"

#include <algorithm>
#include <stdexcept>

namespace lipcert {

LinearForm normalize_form(LinearForm form) {
    std::sort(form.begin(), form.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    LinearForm out;
    out.reserve(form.size());
    for (const auto& [idx, c] : form) {
        if (!out.empty() && out.back().first == idx)
            out.back().second += c;
        else
            out.emplace_back(idx, c);
    }
    out.erase(std::remove_if(out.begin(), out.end(),
                             [](const auto& t) { return t.second == 0.0; }),
              out.end());
    return out;
}

double eval_form(const LinearForm& form, const std::vector<double>& y) {
    double v = 0.0;
    for (const auto& [idx, c] : form) {
        if (idx < 0 || idx >= static_cast<int>(y.size()))
            throw std::out_of_range("eval_form: moment index out of range");
        v += c * y[idx];
    }
    return v;
}

namespace {

void enumerate_rec(const std::vector<int>& vars, std::size_t pos, int remaining,
                   Monomial current, std::vector<Monomial>& out) {
    if (pos == vars.size()) {
        out.push_back(current);
        return;
    }
    for (int e = 0; e <= remaining; ++e)
        enumerate_rec(vars, pos + 1, remaining - e,
                      current * Monomial::var(vars[pos], e), out);
}

}  // namespace

std::vector<Monomial> monomial_basis(const std::vector<int>& vars, int degree) {
    if (degree < 0) throw std::invalid_argument("monomial_basis: negative degree");
    std::vector<int> sorted_vars = vars;
    std::sort(sorted_vars.begin(), sorted_vars.end());
    sorted_vars.erase(std::unique(sorted_vars.begin(), sorted_vars.end()),
                      sorted_vars.end());
    std::vector<Monomial> out;
    enumerate_rec(sorted_vars, 0, degree, Monomial::one(), out);
    std::sort(out.begin(), out.end(), grlex_less);
    return out;
}

MomentIndex::MomentIndex() {
    monomials_.push_back(Monomial::one());
    map_.emplace(Monomial::one(), 0);
}

int MomentIndex::index_of(const Monomial& m) {
    auto it = map_.find(m);
    if (it != map_.end()) return it->second;
    const int idx = static_cast<int>(monomials_.size());
    monomials_.push_back(m);
    map_.emplace(m, idx);
    return idx;
}

int MomentIndex::lookup(const Monomial& m) const {
    auto it = map_.find(m);
    return it == map_.end() ? -1 : it->second;
}

const Monomial& MomentIndex::monomial(int idx) const {
    if (idx < 0 || idx >= size()) throw std::out_of_range("MomentIndex: bad index");
    return monomials_[idx];
}

LinearForm MomentIndex::riesz(const Polynomial& p) {
    LinearForm form;
    form.reserve(p.terms().size());
    for (const auto& [m, c] : p.terms()) form.emplace_back(index_of(m), c);
    return normalize_form(std::move(form));
}

const LinearForm& SymbolicBlock::at(int r, int c) const {
    if (r > c) std::swap(r, c);
    if (r < 0 || c >= dim) throw std::out_of_range("SymbolicBlock::at: out of range");
    return entries[r][c - r];
}

namespace {

SymbolicBlock block_from_basis(std::vector<Monomial> basis, const Polynomial* g,
                               MomentIndex& index, BlockSense sense) {
    SymbolicBlock blk;
    blk.dim = static_cast<int>(basis.size());
    blk.sense = sense;
    blk.row_basis = std::move(basis);
    blk.entries.resize(blk.dim);
    for (int r = 0; r < blk.dim; ++r) {
        blk.entries[r].reserve(blk.dim - r);
        for (int c = r; c < blk.dim; ++c) {
            const Monomial prod = blk.row_basis[r] * blk.row_basis[c];
            if (g == nullptr) {
                blk.entries[r].push_back({{index.index_of(prod), 1.0}});
            } else {
                LinearForm form;
                for (const auto& [m, coef] : g->terms())
                    form.emplace_back(index.index_of(prod * m), coef);
                blk.entries[r].push_back(normalize_form(std::move(form)));
            }
        }
    }
    return blk;
}

}  // namespace

SymbolicBlock moment_matrix(const std::vector<int>& vars, int degree, MomentIndex& index) {
    return block_from_basis(monomial_basis(vars, degree), nullptr, index, BlockSense::PSD);
}

SymbolicBlock localizing_matrix(const Polynomial& g, const std::vector<int>& vars,
                                int degree, MomentIndex& index, BlockSense sense) {
    return block_from_basis(monomial_basis(vars, degree), &g, index, sense);
}

SymbolicBlock triple_moment_block(int t_var, int u1_var, int u2_var, MomentIndex& index) {
    std::vector<Monomial> basis = {Monomial::one(), Monomial::var(t_var),
                                   Monomial::var(u1_var) * Monomial::var(u2_var)};
    return block_from_basis(std::move(basis), nullptr, index, BlockSense::PSD);
}

SymbolicBlock aggregated_moment_block(const std::vector<int>& t_vars,
                                      const std::vector<int>& u1_vars, int u2_var,
                                      MomentIndex& index) {
    std::vector<Monomial> basis;
    basis.reserve(1 + t_vars.size() + u1_vars.size());
    basis.push_back(Monomial::one());
    for (int t : t_vars) basis.push_back(Monomial::var(t));
    for (int u1 : u1_vars) basis.push_back(Monomial::var(u1) * Monomial::var(u2_var));
    return block_from_basis(std::move(basis), nullptr, index, BlockSense::PSD);
}

}  // namespace lipcert
