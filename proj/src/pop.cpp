#include "lipcert/pop.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lipcert {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string kind_prefix(Variable::Kind k) {
    switch (k) {
        case Variable::Kind::T: return "t";
        case Variable::Kind::X: return "x";
        case Variable::Kind::U: return "u";
        case Variable::Kind::Z: return "z";
        case Variable::Kind::S: return "s";
    }
    return "?";
}

}  // namespace

int VariableTable::add(Variable::Kind kind, int layer, int coord) {
    const int id = size();
    vars_.push_back({kind, layer, coord});
    lo_.push_back(0.0);
    hi_.push_back(0.0);
    has_range_.push_back(false);
    return id;
}

int VariableTable::find(Variable::Kind kind, int layer, int coord) const {
    for (int id = 0; id < size(); ++id)
        if (vars_[id].kind == kind && vars_[id].layer == layer && vars_[id].coord == coord)
            return id;
    return -1;
}

const Variable& VariableTable::info(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("VariableTable: bad id");
    return vars_[id];
}

std::string VariableTable::name(int id) const {
    const Variable& v = info(id);
    std::ostringstream os;
    os << kind_prefix(v.kind);
    switch (v.kind) {
        case Variable::Kind::T: os << v.coord; break;
        case Variable::Kind::X: os << v.layer << "_" << v.coord; break;
        case Variable::Kind::U:
        case Variable::Kind::Z: os << v.layer << "_" << v.coord; break;
        case Variable::Kind::S: os << "_" << v.layer << "_" << v.coord; break;
    }
    return os.str();
}

void VariableTable::set_range(int id, double lo, double hi) {
    info(id);
    lo_[id] = lo;
    hi_[id] = hi;
    has_range_[id] = true;
}

bool VariableTable::has_range(int id) const {
    info(id);
    return has_range_[id];
}

double VariableTable::lower(int id) const {
    if (!has_range(id)) throw std::logic_error("VariableTable: no range for " + name(id));
    return lo_[id];
}

double VariableTable::upper(int id) const {
    if (!has_range(id)) throw std::logic_error("VariableTable: no range for " + name(id));
    return hi_[id];
}

std::string PopProblem::to_string() const {
    std::ostringstream os;
    const auto nm = [this](int id) { return vars.name(id); };
    os << "maximize " << objective.to_string(nm) << "\n";
    os << "subject to\n";
    for (const auto& c : constraints) {
        os << "  [" << c.name << (c.bad ? ", affine-lift" : "") << "] "
           << c.poly.to_string(nm) << (c.sense == PopConstraint::Sense::Eq0 ? " = 0" : " >= 0")
           << "\n";
    }
    if (!subsets.empty()) {
        os << "subsets\n";
        for (std::size_t k = 0; k < subsets.size(); ++k) {
            os << "  " << (k < subset_labels.size() ? subset_labels[k] : "I" + std::to_string(k))
               << " = {";
            for (std::size_t i = 0; i < subsets[k].size(); ++i)
                os << (i ? ", " : "") << vars.name(subsets[k][i]);
            os << "}\n";
        }
    }
    return os.str();
}

std::vector<std::vector<std::pair<double, double>>> preactivation_ranges(
    const Network& net, const InputRegion& region) {
    validate_network(net);
    const int m = net.hidden_layers();
    std::vector<std::vector<std::pair<double, double>>> out(m);
    const int p0 = net.input_dim();
    std::vector<double> lo(p0), hi(p0);
    for (int a = 0; a < p0; ++a) {
        lo[a] = region.lower(a);
        hi[a] = region.upper(a);
    }
    for (int i = 0; i < m; ++i) {
        const Eigen::MatrixXd& A = net.weights[i];
        const int p = static_cast<int>(A.rows());
        out[i].resize(p);
        std::vector<double> nlo(p), nhi(p);
        for (int j = 0; j < p; ++j) {
            double zl = net.biases[i][j], zh = net.biases[i][j];
            for (int k = 0; k < A.cols(); ++k) {
                const double w = A(j, k);
                if (w >= 0) {
                    zl += w * lo[k];
                    zh += w * hi[k];
                } else {
                    zl += w * hi[k];
                    zh += w * lo[k];
                }
            }
            out[i][j] = {zl, zh};
            nlo[j] = std::max(0.0, zl);
            nhi[j] = std::max(0.0, zh);
        }
        lo = std::move(nlo);
        hi = std::move(nhi);
    }
    return out;
}

namespace {

struct LcepVars {
    std::vector<int> t;                     // [p0]
    std::vector<std::vector<int>> x;        // x[0]=input, x[i] for i<m
    std::vector<std::vector<int>> u;        // u[i-1] for layer i
    std::vector<std::vector<int>> z;        // z[i-1] for layer i
};

LcepVars create_lcep_variables(PopProblem& pop, const Network& net) {
    const int m = net.hidden_layers();
    const int p0 = net.input_dim();
    LcepVars v;
    v.x.resize(m);  // x[0] .. x[m-1]
    v.u.resize(m);
    v.z.resize(m);
    for (int a = 0; a < p0; ++a) v.t.push_back(pop.vars.add(Variable::Kind::T, 0, a));
    for (int a = 0; a < p0; ++a) v.x[0].push_back(pop.vars.add(Variable::Kind::X, 0, a));
    for (int i = 1; i <= m; ++i) {
        const int p = net.layer_sizes[i];
        for (int j = 0; j < p; ++j) v.u[i - 1].push_back(pop.vars.add(Variable::Kind::U, i, j));
        for (int j = 0; j < p; ++j) v.z[i - 1].push_back(pop.vars.add(Variable::Kind::Z, i, j));
        if (i < m)
            for (int j = 0; j < p; ++j) v.x[i].push_back(pop.vars.add(Variable::Kind::X, i, j));
    }
    return v;
}

void set_lcep_ranges(PopProblem& pop, const Network& net, const InputRegion& region,
                     const LcepVars& v) {
    const int m = net.hidden_layers();
    const int p0 = net.input_dim();
    for (int a = 0; a < p0; ++a) pop.vars.set_range(v.t[a], -1.0, 1.0);
    for (int a = 0; a < p0; ++a)
        pop.vars.set_range(v.x[0][a], region.lower(a), region.upper(a));
    const auto zr = preactivation_ranges(net, region);
    for (int i = 1; i <= m; ++i) {
        for (int j = 0; j < net.layer_sizes[i]; ++j) {
            const auto [zl, zh] = zr[i - 1][j];
            pop.vars.set_range(v.u[i - 1][j], 0.0, 1.0);
            pop.vars.set_range(v.z[i - 1][j], zl, zh);
            if (i < m)
                pop.vars.set_range(v.x[i][j], std::max(0.0, zl), std::max(0.0, zh));
        }
    }
}

/// Expands t^T (prod_{i=1}^m A_i^T diag(u_i)) c by contracting right-to-left.
Polynomial expand_slope_objective(const Network& net, const LcepVars& v,
                                  const Eigen::VectorXd& c) {
    const int m = net.hidden_layers();
    std::vector<Polynomial> cur(c.size());
    for (int j = 0; j < c.size(); ++j) cur[j] = Polynomial(c[j]);
    for (int i = m; i >= 1; --i) {
        const Eigen::MatrixXd& A = net.weights[i - 1];
        std::vector<Polynomial> nxt(A.cols());
        for (int j = 0; j < A.rows(); ++j) {
            if (cur[j].is_zero()) continue;
            const Polynomial uj_term = Polynomial::variable(v.u[i - 1][j]) * cur[j];
            for (int a = 0; a < A.cols(); ++a) {
                const double w = A(j, a);
                if (w != 0.0) nxt[a] += uj_term * w;
            }
        }
        cur = std::move(nxt);
    }
    Polynomial obj;
    for (std::size_t a = 0; a < cur.size(); ++a)
        obj += Polynomial::variable(v.t[a]) * cur[a];
    return obj;
}

void add_lcep_constraints(PopProblem& pop, const Network& net, const InputRegion& region,
                          const LcepVars& v) {
    const int m = net.hidden_layers();
    const int p0 = net.input_dim();
    auto var = [](int id) { return Polynomial::variable(id); };

    for (int a = 0; a < p0; ++a) {
        // (x - c + eps)(x - c - eps) <= 0 stored as eps^2 - (x - c)^2 >= 0.
        const Polynomial d = var(v.x[0][a]) - Polynomial(region.center_at(a));
        pop.constraints.push_back({Polynomial(region.epsilon * region.epsilon) - d * d,
                                   PopConstraint::Sense::Geq0, false, -1,
                                   "region_" + std::to_string(a)});
    }
    for (int a = 0; a < p0; ++a)
        pop.constraints.push_back({Polynomial(1.0) - var(v.t[a]) * var(v.t[a]),
                                   PopConstraint::Sense::Geq0, false, -1,
                                   "t_box_" + std::to_string(a)});

    for (int i = 1; i <= m; ++i) {
        const Eigen::MatrixXd& A = net.weights[i - 1];
        const std::vector<int>& xprev = v.x[i - 1];
        for (int j = 0; j < net.layer_sizes[i]; ++j) {
            Polynomial affine = Polynomial(net.biases[i - 1][j]);
            for (int k = 0; k < A.cols(); ++k)
                if (A(j, k) != 0.0) affine += var(xprev[k]) * A(j, k);
            pop.constraints.push_back({var(v.z[i - 1][j]) - affine, PopConstraint::Sense::Eq0,
                                       true, -1,
                                       "z" + std::to_string(i) + "_def_" + std::to_string(j)});
        }
        for (int j = 0; j < net.layer_sizes[i]; ++j) {
            const Polynomial u = var(v.u[i - 1][j]);
            pop.constraints.push_back({u * (u - Polynomial(1.0)), PopConstraint::Sense::Eq0,
                                       false, -1,
                                       "u" + std::to_string(i) + "_binary_" + std::to_string(j)});
        }
        for (int j = 0; j < net.layer_sizes[i]; ++j) {
            const Polynomial u = var(v.u[i - 1][j]);
            const Polynomial z = var(v.z[i - 1][j]);
            pop.constraints.push_back({(u - Polynomial(0.5)) * z, PopConstraint::Sense::Geq0,
                                       false, -1,
                                       "u" + std::to_string(i) + "_sign_" + std::to_string(j)});
        }
        if (i < m) {
            for (int j = 0; j < net.layer_sizes[i]; ++j) {
                const Polynomial x = var(v.x[i][j]);
                const Polynomial z = var(v.z[i - 1][j]);
                pop.constraints.push_back({x * (x - z), PopConstraint::Sense::Eq0, false, -1,
                                           "x" + std::to_string(i) + "_compl_" +
                                               std::to_string(j)});
                pop.constraints.push_back({x, PopConstraint::Sense::Geq0, false, -1,
                                           "x" + std::to_string(i) + "_nonneg_" +
                                               std::to_string(j)});
                pop.constraints.push_back({x - z, PopConstraint::Sense::Geq0, false, -1,
                                           "x" + std::to_string(i) + "_relu_gap_" +
                                               std::to_string(j)});
            }
        }
    }
}

void check_region(const Network& net, const InputRegion& region) {
    if (region.epsilon <= 0.0) fail("build_lcep: region half-width must be positive");
    if (!region.global && region.center.size() != 0 &&
        region.center.size() != net.input_dim())
        fail("build_lcep: region centre has " + std::to_string(region.center.size()) +
             " entries, expected " + std::to_string(net.input_dim()));
}

}  // namespace

PopProblem build_lcep(const Network& net, const InputRegion& region,
                      const Eigen::VectorXd& c) {
    validate_network(net);
    check_region(net, region);
    if (c.size() != net.layer_sizes.back())
        fail("build_lcep: output direction has " + std::to_string(c.size()) +
             " entries, expected " + std::to_string(net.layer_sizes.back()));
    PopProblem pop;
    pop.layer_sizes = net.layer_sizes;
    pop.hidden_layers = net.hidden_layers();
    const LcepVars v = create_lcep_variables(pop, net);
    set_lcep_ranges(pop, net, region, v);
    pop.objective = expand_slope_objective(net, v, c);
    add_lcep_constraints(pop, net, region, v);
    return pop;
}

PopProblem build_lcep(const Network& net, const InputRegion& region, int label) {
    if (label < 0 || label >= net.num_labels())
        fail("build_lcep: label " + std::to_string(label) + " out of range");
    return build_lcep(net, region, net.output_weights.row(label).transpose());
}

PopProblem build_lifted_lcep2(const Network& net, const InputRegion& region,
                              const Eigen::VectorXd& c, long size_warning_cap) {
    validate_network(net);
    if (net.hidden_layers() != 2)
        fail("build_lifted_lcep2: requires exactly two hidden layers, got " +
             std::to_string(net.hidden_layers()));
    check_region(net, region);
    if (c.size() != net.layer_sizes.back())
        fail("build_lifted_lcep2: output direction has " + std::to_string(c.size()) +
             " entries, expected " + std::to_string(net.layer_sizes.back()));

    PopProblem pop;
    pop.layer_sizes = net.layer_sizes;
    pop.hidden_layers = 2;
    const LcepVars v = create_lcep_variables(pop, net);
    set_lcep_ranges(pop, net, region, v);

    const int p1 = net.layer_sizes[1];
    const int p2 = net.layer_sizes[2];
    if (static_cast<long>(p1) * p2 > size_warning_cap) {
        pop.warnings.push_back("product lift introduces " + std::to_string(
                                   static_cast<long>(p1) * p2) +
                               " pair variables (cap " + std::to_string(size_warning_cap) +
                               "); expect a large relaxation");
    }
    std::vector<std::vector<int>> s(p1, std::vector<int>(p2));
    for (int j = 0; j < p1; ++j)
        for (int k = 0; k < p2; ++k) {
            s[j][k] = pop.vars.add(Variable::Kind::S, j, k);
            pop.vars.set_range(s[j][k], 0.0, 1.0);
        }

    // Objective sum_{a,j,k} A1[j,a] A2[k,j] c_k t_a s_jk.
    const Eigen::MatrixXd& A1 = net.weights[0];
    const Eigen::MatrixXd& A2 = net.weights[1];
    for (int a = 0; a < A1.cols(); ++a) {
        for (int j = 0; j < p1; ++j) {
            if (A1(j, a) == 0.0) continue;
            for (int k = 0; k < p2; ++k) {
                const double w = A1(j, a) * A2(k, j) * c[k];
                if (w != 0.0)
                    pop.objective += Polynomial::variable(v.t[a]) *
                                     Polynomial::variable(s[j][k]) * w;
            }
        }
    }

    add_lcep_constraints(pop, net, region, v);
    for (int j = 0; j < p1; ++j)
        for (int k = 0; k < p2; ++k) {
            const Polynomial def = Polynomial::variable(s[j][k]) -
                                   Polynomial::variable(v.u[0][j]) *
                                       Polynomial::variable(v.u[1][k]);
            pop.constraints.push_back({def, PopConstraint::Sense::Eq0, true, -1,
                                       "s_def_" + std::to_string(j) + "_" +
                                           std::to_string(k)});
        }
    return pop;
}

PopProblem build_lifted_lcep2(const Network& net, const InputRegion& region, int label,
                              long size_warning_cap) {
    if (label < 0 || label >= net.num_labels())
        fail("build_lifted_lcep2: label " + std::to_string(label) + " out of range");
    return build_lifted_lcep2(net, region, net.output_weights.row(label).transpose(),
                              size_warning_cap);
}

void build_subsets(PopProblem& pop) {
    if (pop.layer_sizes.empty())
        fail("build_subsets: problem carries no layer structure");
    const int m = pop.hidden_layers;
    pop.subsets.clear();
    pop.subset_labels.clear();

    auto need = [&](Variable::Kind k, int layer, int coord) {
        const int id = pop.vars.find(k, layer, coord);
        if (id < 0) fail("build_subsets: missing expected variable");
        return id;
    };

    for (int a = 0; a < pop.layer_sizes[0]; ++a) {
        pop.subsets.push_back({need(Variable::Kind::X, 0, a), need(Variable::Kind::T, 0, a)});
        pop.subset_labels.push_back("I_" + std::to_string(a));
    }
    for (int i = 1; i < m; ++i) {
        for (int j = 0; j < pop.layer_sizes[i]; ++j) {
            pop.subsets.push_back(
                {need(Variable::Kind::X, i, j), need(Variable::Kind::Z, i, j)});
            pop.subset_labels.push_back("Jx" + std::to_string(i) + "_" + std::to_string(j));
            pop.subsets.push_back(
                {need(Variable::Kind::U, i, j), need(Variable::Kind::Z, i, j)});
            pop.subset_labels.push_back("Ju" + std::to_string(i) + "_" + std::to_string(j));
        }
    }
    for (int k = 0; k < pop.layer_sizes[m]; ++k) {
        pop.subsets.push_back({need(Variable::Kind::U, m, k), need(Variable::Kind::Z, m, k)});
        pop.subset_labels.push_back(m == 1 ? "J_" + std::to_string(k)
                                           : "K_" + std::to_string(k));
    }

    // Tag every non-bad constraint with the first subset containing its support.
    for (auto& con : pop.constraints) {
        if (con.bad) continue;
        const std::set<int> sup = con.poly.support();
        con.subset = -1;
        for (std::size_t kidx = 0; kidx < pop.subsets.size(); ++kidx) {
            const auto& sub = pop.subsets[kidx];
            bool contained = true;
            for (int v : sup)
                if (std::find(sub.begin(), sub.end(), v) == sub.end()) {
                    contained = false;
                    break;
                }
            if (contained) {
                con.subset = static_cast<int>(kidx);
                break;
            }
        }
        if (con.subset < 0)
            fail("build_subsets: constraint '" + con.name + "' fits no subset");
    }
}

bool verify_rip(const std::vector<std::vector<int>>& subsets) {
    std::set<int> seen;
    for (std::size_t k = 0; k < subsets.size(); ++k) {
        if (k > 0) {
            std::vector<int> inter;
            for (int v : subsets[k])
                if (seen.count(v)) inter.push_back(v);
            if (!inter.empty()) {
                bool ok = false;
                for (std::size_t j = 0; j < k && !ok; ++j) {
                    bool all = true;
                    for (int v : inter)
                        if (std::find(subsets[j].begin(), subsets[j].end(), v) ==
                            subsets[j].end()) {
                            all = false;
                            break;
                        }
                    ok = all;
                }
                if (!ok) return false;
            }
        }
        for (int v : subsets[k]) seen.insert(v);
    }
    return true;
}

}  // namespace lipcert
