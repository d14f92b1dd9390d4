#include "lipcert/conic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ipm.hpp"
#include "lipcert/util.hpp"

namespace lipcert {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void check_problem(const ConicProblem& p) {
    auto check_form = [&](const LinearForm& f, const std::string& where) {
        for (const auto& [idx, c] : f) {
            if (idx < 0 || idx >= p.n_y)
                fail("conic: variable index " + std::to_string(idx) + " out of range in " +
                     where);
            (void)c;
        }
    };
    check_form(p.objective, "objective");
    for (const auto& r : p.equalities) check_form(r.form, "equality row");
    for (const auto& r : p.inequalities) check_form(r.form, "inequality row");
    for (const auto& b : p.blocks) {
        if (b.dim <= 0) fail("conic: block '" + b.label + "' has nonpositive dimension");
        for (const auto& e : b.entries) {
            if (e.row < 0 || e.col < e.row || e.col >= b.dim)
                fail("conic: bad entry coordinates in block '" + b.label + "'");
            check_form(e.form, "block '" + b.label + "'");
        }
    }
}

struct Home {
    int block = -1;
    int r = 0;
    int c = 0;
};

struct Conversion {
    detail::StandardSdp sdp;
    std::vector<Home> homes;
    std::vector<int> split_pos;  ///< LP position of y+ for homeless vars, else -1
    int slack_base = 0;          ///< LP positions [0, n_ineq) are slacks
};

Conversion convert(const ConicProblem& p) {
    Conversion cv;
    cv.homes.assign(p.n_y, Home{});
    cv.split_pos.assign(p.n_y, -1);

    const int nb = static_cast<int>(p.blocks.size());
    cv.sdp.psd_dims.resize(nb);
    for (int b = 0; b < nb; ++b) cv.sdp.psd_dims[b] = p.blocks[b].dim;

    // A variable's home is the first block entry equal to exactly 1.0 * y_i.
    for (int b = 0; b < nb; ++b)
        for (const auto& e : p.blocks[b].entries)
            if (e.constant == 0.0 && e.form.size() == 1 && e.form[0].second == 1.0) {
                Home& h = cv.homes[e.form[0].first];
                if (h.block < 0) h = {b, e.row, e.col};
            }

    const int n_ineq = static_cast<int>(p.inequalities.size());
    cv.slack_base = 0;
    int lp_dim = n_ineq;
    for (int i = 0; i < p.n_y; ++i)
        if (cv.homes[i].block < 0) {
            cv.split_pos[i] = lp_dim;
            lp_dim += 2;
        }
    cv.sdp.lp_dim = lp_dim;

    // Accumulates one row; merges duplicate coordinates for robustness.
    struct RowBuilder {
        std::map<std::tuple<int, int, int>, double> psd;
        std::map<int, double> lp;
        double rhs = 0.0;

        void add_psd(int block, int r, int c, double v) {
            if (r > c) std::swap(r, c);
            psd[{block, r, c}] += v;
        }
        void add_lp(int pos, double v) { lp[pos] += v; }

        detail::StdRow finish() const {
            detail::StdRow row;
            for (const auto& [key, v] : psd)
                if (v != 0.0)
                    row.psd.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
            for (const auto& [pos, v] : lp)
                if (v != 0.0) row.lp.emplace_back(pos, v);
            row.rhs = rhs;
            return row;
        }
    };

    const auto add_variable = [&](RowBuilder& rb, int idx, double coef) {
        const Home& h = cv.homes[idx];
        if (h.block >= 0) {
            rb.add_psd(h.block, h.r, h.c, coef);
        } else {
            rb.add_lp(cv.split_pos[idx], coef);
            rb.add_lp(cv.split_pos[idx] + 1, -coef);
        }
    };

    // Block entries that are not themselves a home become coupling rows.
    for (int b = 0; b < nb; ++b)
        for (const auto& e : p.blocks[b].entries) {
            const Home* own = nullptr;
            if (e.constant == 0.0 && e.form.size() == 1 && e.form[0].second == 1.0) {
                const Home& h = cv.homes[e.form[0].first];
                if (h.block == b && h.r == e.row && h.c == e.col) own = &h;
            }
            if (own != nullptr) continue;
            RowBuilder rb;
            rb.add_psd(b, e.row, e.col, 1.0);
            for (const auto& [idx, coef] : e.form) add_variable(rb, idx, -coef);
            rb.rhs = e.constant;
            cv.sdp.rows.push_back(rb.finish());
        }

    for (const auto& eq : p.equalities) {
        RowBuilder rb;
        for (const auto& [idx, coef] : eq.form) add_variable(rb, idx, coef);
        rb.rhs = eq.rhs;
        cv.sdp.rows.push_back(rb.finish());
    }
    for (int i = 0; i < n_ineq; ++i) {
        RowBuilder rb;
        for (const auto& [idx, coef] : p.inequalities[i].form) add_variable(rb, idx, coef);
        rb.add_lp(cv.slack_base + i, 1.0);
        rb.rhs = p.inequalities[i].rhs;
        cv.sdp.rows.push_back(rb.finish());
    }

    // Objective: minimize internally; flip sign when the problem maximizes.
    cv.sdp.c_psd.resize(nb);
    for (int b = 0; b < nb; ++b)
        cv.sdp.c_psd[b] = Eigen::MatrixXd::Zero(p.blocks[b].dim, p.blocks[b].dim);
    cv.sdp.c_lp = Eigen::VectorXd::Zero(lp_dim);
    const double sign = p.maximize ? -1.0 : 1.0;
    for (const auto& [idx, coef] : p.objective) {
        const Home& h = cv.homes[idx];
        const double v = sign * coef;
        if (h.block >= 0) {
            if (h.r == h.c) {
                cv.sdp.c_psd[h.block](h.r, h.c) += v;
            } else {
                cv.sdp.c_psd[h.block](h.r, h.c) += 0.5 * v;
                cv.sdp.c_psd[h.block](h.c, h.r) += 0.5 * v;
            }
        } else {
            cv.sdp.c_lp[cv.split_pos[idx]] += v;
            cv.sdp.c_lp[cv.split_pos[idx] + 1] -= v;
        }
    }
    return cv;
}

std::vector<double> extract_y(const ConicProblem& p, const Conversion& cv,
                              const detail::IpmResult& r) {
    std::vector<double> y(p.n_y, 0.0);
    for (int i = 0; i < p.n_y; ++i) {
        const Home& h = cv.homes[i];
        if (h.block >= 0)
            y[i] = r.X[h.block](h.r, h.c);
        else
            y[i] = r.x_lp[cv.split_pos[i]] - r.x_lp[cv.split_pos[i] + 1];
    }
    return y;
}

}  // namespace

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::NearOptimal: return "near_optimal";
        case SolveStatus::IterationLimit: return "iteration_limit";
        case SolveStatus::TimeLimit: return "time_limit";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

double objective_value(const ConicProblem& problem, const std::vector<double>& y) {
    return eval_form(problem.objective, y);
}

ConicResiduals compute_residuals(const ConicProblem& problem, const std::vector<double>& y) {
    if (static_cast<int>(y.size()) != problem.n_y)
        fail("compute_residuals: y has " + std::to_string(y.size()) + " entries, expected " +
             std::to_string(problem.n_y));
    ConicResiduals res;
    for (const auto& r : problem.equalities)
        res.equality_inf = std::max(res.equality_inf, std::abs(eval_form(r.form, y) - r.rhs));
    for (const auto& r : problem.inequalities)
        res.inequality_inf =
            std::max(res.inequality_inf, eval_form(r.form, y) - r.rhs);
    res.inequality_inf = std::max(0.0, res.inequality_inf);
    double min_eig = 0.0;
    bool any = false;
    for (const auto& b : problem.blocks) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(b.dim, b.dim);
        for (const auto& e : b.entries) {
            const double v = e.constant + eval_form(e.form, y);
            m(e.row, e.col) = v;
            m(e.col, e.row) = v;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues().minCoeff();
        if (!any || lmin < min_eig) min_eig = lmin;
        any = true;
    }
    res.psd_min_eig = any ? std::min(0.0, min_eig) : 0.0;
    return res;
}

Solution solve(const ConicProblem& problem, const SolverSettings& settings) {
    check_problem(problem);
    const auto t0 = std::chrono::steady_clock::now();

    Solution sol;
    if (problem.blocks.empty() && problem.equalities.empty() &&
        problem.inequalities.empty()) {
        if (!problem.objective.empty())
            fail("solve: unconstrained problem with a nonempty objective");
        sol.status = SolveStatus::Optimal;
        sol.value = sol.dual_value = 0.0;
        sol.y.assign(problem.n_y, 0.0);
        sol.residuals = compute_residuals(problem, sol.y);
        return sol;
    }

    Conversion cv = convert(problem);
    if (cv.sdp.rows.empty())
        fail("solve: problem has cone variables but no constraint rows");

    detail::IpmResult r = detail::ipm_solve(cv.sdp, settings);

    sol.status = r.status;
    sol.iterations = r.iterations;
    sol.y = extract_y(problem, cv, r);
    sol.value = objective_value(problem, sol.y);
    sol.dual_value = problem.maximize ? -r.dobj : r.dobj;
    sol.residuals = compute_residuals(problem, sol.y);
    sol.solve_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

void write_solution(const Solution& solution, const std::string& path) {
    std::ofstream os(path);
    if (!os) fail("write_solution: cannot open '" + path + "' for writing");
    os << "lipcert-solution 1\n";
    os << to_string(solution.status) << "\n";
    os << fmt_g17(solution.value) << "\n";
    os << solution.y.size() << "\n";
    for (double v : solution.y) os << fmt_g17(v) << "\n";
    if (!os) fail("write_solution: write to '" + path + "' failed");
}

Solution import_solution(const std::string& path, const ConicProblem& problem) {
    std::ifstream is(path);
    if (!is) fail("import_solution: cannot open '" + path + "'");
    int lineno = 0;
    std::string line;
    const auto next_line = [&]() -> std::string {
        if (!std::getline(is, line))
            fail("import_solution: '" + path + "' truncated at line " +
                 std::to_string(lineno + 1));
        ++lineno;
        return line;
    };

    const std::string magic = next_line();
    if (magic != "lipcert-solution 1")
        fail("import_solution: '" + path + "' line 1: unrecognized header '" + magic + "'");
    const std::string status_str = next_line();
    next_line();  // stored value; always recomputed below

    const std::string count_str = next_line();
    long n = 0;
    try {
        n = std::stol(count_str);
    } catch (...) {
        fail("import_solution: '" + path + "' line " + std::to_string(lineno) +
             ": bad count '" + count_str + "'");
    }
    if (n != problem.n_y)
        fail("import_solution: solution has " + std::to_string(n) + " variables, problem has " +
             std::to_string(problem.n_y));

    Solution sol;
    sol.y.resize(n);
    for (long i = 0; i < n; ++i) {
        const std::string v = next_line();
        try {
            std::size_t used = 0;
            sol.y[i] = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing");
        } catch (...) {
            fail("import_solution: '" + path + "' line " + std::to_string(lineno) +
                 ": bad number '" + v + "'");
        }
    }

    bool status_known = false;
    for (SolveStatus s :
         {SolveStatus::Optimal, SolveStatus::NearOptimal, SolveStatus::IterationLimit,
          SolveStatus::TimeLimit, SolveStatus::Infeasible, SolveStatus::Unbounded,
          SolveStatus::NumericalFailure}) {
        if (to_string(s) == status_str) {
            sol.status = s;
            status_known = true;
        }
    }
    if (!status_known)
        fail("import_solution: '" + path + "' line 2: unknown status '" + status_str + "'");
    sol.value = objective_value(problem, sol.y);
    sol.dual_value = sol.value;
    sol.residuals = compute_residuals(problem, sol.y);
    return sol;
}

}  // namespace lipcert
