#include "lipcert/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lipcert {

namespace {

int ceil_half(int d) { return (d + 1) / 2; }

/// Shared assembly state: moment index, per-variable scale factors and the
/// conic problem under construction. Natural moment y_alpha equals
/// rho(alpha) * (conic variable alpha) where rho is the product of the
/// per-variable factors; matrix entries are rescaled congruently so plain
/// moment-matrix entries keep coefficient exactly 1.
class Assembler {
public:
    explicit Assembler(const PopProblem& pop) : pop_(pop) {
        const int n = pop.vars.size();
        sigma_.assign(static_cast<std::size_t>(n), 1.0);
        for (int v = 0; v < n; ++v) {
            if (pop.vars.has_range(v)) {
                const double b = std::max(std::fabs(pop.vars.lower(v)),
                                          std::fabs(pop.vars.upper(v)));
                sigma_[static_cast<std::size_t>(v)] = std::max(1.0, b);
            }
        }
    }

    MomentIndex& index() { return index_; }
    const PopProblem& pop() const { return pop_; }

    double rho(const Monomial& m) const {
        double r = 1.0;
        for (const auto& [id, e] : m.factors())
            for (int i = 0; i < e; ++i) r *= sigma_[static_cast<std::size_t>(id)];
        return r;
    }

    /// rho of total / (r * c). Exponent arithmetic is exact, so an entry whose
    /// monomial is exactly the product of its row and column basis monomials
    /// gets multiplier exactly 1.0.
    double rho_quotient(const Monomial& total, const Monomial& r, const Monomial& c) const {
        std::map<int, int> e;
        for (const auto& [id, k] : total.factors()) e[id] += k;
        for (const auto& [id, k] : r.factors()) e[id] -= k;
        for (const auto& [id, k] : c.factors()) e[id] -= k;
        double out = 1.0;
        for (const auto& [id, k] : e) {
            if (k < 0)
                throw std::logic_error("relaxation: block entry not divisible by its basis");
            for (int i = 0; i < k; ++i) out *= sigma_[static_cast<std::size_t>(id)];
        }
        return out;
    }

    /// PSD blocks become cone blocks (entries normalized to unit magnitude);
    /// Zero blocks are lowered to one equality row per distinct entry.
    void add_block(SymbolicBlock blk, const std::string& label) {
        if (blk.row_basis.empty())
            throw std::logic_error("relaxation: block without a row basis");
        if (blk.sense == BlockSense::PSD) {
            ConicBlock cb;
            cb.dim = blk.dim;
            cb.label = label;
            double amax = 0.0;
            for (int r = 0; r < blk.dim; ++r) {
                for (int c = r; c < blk.dim; ++c) {
                    const LinearForm& form = blk.at(r, c);
                    if (form.empty()) continue;
                    ConicEntry e;
                    e.row = r;
                    e.col = c;
                    e.constant = 0.0;
                    e.form.reserve(form.size());
                    for (const auto& [idx, coef] : form) {
                        const double s = coef * rho_quotient(index_.monomial(idx),
                                                             blk.row_basis[r],
                                                             blk.row_basis[c]);
                        e.form.emplace_back(idx, s);
                        amax = std::max(amax, std::fabs(s));
                    }
                    cb.entries.push_back(std::move(e));
                }
            }
            const bool plain_moment = amax == 1.0;
            if (!plain_moment && amax > 0.0) {
                for (auto& e : cb.entries)
                    for (auto& [idx, coef] : e.form) coef /= amax;
            }
            conic_.blocks.push_back(std::move(cb));
        } else {
            for (int r = 0; r < blk.dim; ++r) {
                for (int c = r; c < blk.dim; ++c) {
                    const LinearForm& form = blk.at(r, c);
                    if (form.empty()) continue;
                    LinearForm scaled;
                    scaled.reserve(form.size());
                    for (const auto& [idx, coef] : form)
                        scaled.emplace_back(idx, coef * rho_quotient(index_.monomial(idx),
                                                                     blk.row_basis[r],
                                                                     blk.row_basis[c]));
                    add_eq_form(std::move(scaled), 0.0,
                                label + "_" + std::to_string(r) + "_" + std::to_string(c));
                }
            }
        }
    }

    void add_eq(const Polynomial& g, double rhs, const std::string& label) {
        add_eq_form(scaled_riesz(g), rhs, label);
    }

    /// Expectation nonnegativity L(g) >= 0, stored as -L(g) <= 0.
    void add_ineq_geq(const Polynomial& g, const std::string& label) {
        LinearForm form = scaled_riesz(g);
        double amax = 0.0;
        for (auto& [idx, coef] : form) {
            coef = -coef;
            amax = std::max(amax, std::fabs(coef));
        }
        if (amax > 0.0)
            for (auto& [idx, coef] : form) coef /= amax;
        ConicRow row;
        row.form = std::move(form);
        row.rhs = 0.0;
        row.label = label;
        conic_.inequalities.push_back(std::move(row));
    }

    Relaxation finalize(const Polynomial& objective) {
        for (const auto& [m, coef] : objective.terms()) {
            if (index_.lookup(m) < 0)
                throw std::runtime_error(
                    "relaxation: objective monomial " +
                    m.to_string([this](int id) { return pop_.vars.name(id); }) +
                    " is not represented by any moment block; use the two-hidden-layer "
                    "assembly or the product-lifted problem");
        }
        conic_.objective = scaled_riesz(objective);
        conic_.maximize = true;
        conic_.n_y = index_.size();
        Relaxation rel;
        rel.scale.resize(static_cast<std::size_t>(index_.size()));
        for (int i = 0; i < index_.size(); ++i)
            rel.scale[static_cast<std::size_t>(i)] = rho(index_.monomial(i));
        rel.conic = std::move(conic_);
        rel.index = std::move(index_);
        return rel;
    }

private:
    LinearForm scaled_riesz(const Polynomial& g) {
        LinearForm form = index_.riesz(g);
        for (auto& [idx, coef] : form) coef *= rho(index_.monomial(idx));
        return form;
    }

    void add_eq_form(LinearForm form, double rhs, const std::string& label) {
        double amax = 0.0;
        for (const auto& [idx, coef] : form) amax = std::max(amax, std::fabs(coef));
        if (amax > 0.0 && amax != 1.0) {
            for (auto& [idx, coef] : form) coef /= amax;
            rhs /= amax;
        }
        ConicRow row;
        row.form = std::move(form);
        row.rhs = rhs;
        row.label = label;
        conic_.equalities.push_back(std::move(row));
    }

    const PopProblem& pop_;
    MomentIndex index_;
    std::vector<double> sigma_;
    ConicProblem conic_;
};

std::vector<int> all_variable_ids(const PopProblem& pop) {
    std::vector<int> ids(static_cast<std::size_t>(pop.vars.size()));
    for (int v = 0; v < pop.vars.size(); ++v) ids[static_cast<std::size_t>(v)] = v;
    return ids;
}

std::string subset_label(const PopProblem& pop, std::size_t k) {
    if (k < pop.subset_labels.size() && !pop.subset_labels[k].empty())
        return pop.subset_labels[k];
    return "sub" + std::to_string(k);
}

/// Redundant on-ball constraint sum(bound_v^2) - sum(v^2) >= 0 over a subset;
/// empty polynomial when some variable has no known range.
Polynomial ball_polynomial(const PopProblem& pop, const std::vector<int>& subset) {
    double radius_sq = 0.0;
    for (int v : subset) {
        if (!pop.vars.has_range(v)) return Polynomial();
        const double b = std::max(std::fabs(pop.vars.lower(v)), std::fabs(pop.vars.upper(v)));
        radius_sq += b * b;
    }
    Polynomial g(radius_sq);
    for (int v : subset) g -= Polynomial::monomial(Monomial::var(v, 2));
    return g;
}

/// Everything except cubic-term blocks and the objective: dense degree-1
/// moment matrix, mass normalization, the order-dependent treatment of
/// ordinary constraints, redundant ball constraints, the paired rows for
/// affine lift definitions, and binarity rows for product-lift variables.
void assemble_core(Assembler& as, int order) {
    const PopProblem& pop = as.pop();
    as.add_block(moment_matrix(all_variable_ids(pop), 1, as.index()), "moment_deg1");
    as.add_eq(Polynomial(1.0), 1.0, "mass");

    if (order >= 2) {
        if (pop.subsets.empty())
            throw std::runtime_error(
                "relaxation: sparse assembly requires covering subsets; call build_subsets");
        if (!verify_rip(pop.subsets))
            throw std::runtime_error(
                "relaxation: subsets violate the running intersection property");
        for (std::size_t k = 0; k < pop.subsets.size(); ++k)
            as.add_block(moment_matrix(pop.subsets[k], order, as.index()),
                         "moment_" + subset_label(pop, k));
        for (const auto& con : pop.constraints) {
            if (con.bad) continue;
            if (con.subset < 0 ||
                con.subset >= static_cast<int>(pop.subsets.size()))
                throw std::runtime_error("relaxation: constraint '" + con.name +
                                         "' has no covering subset; call build_subsets");
            const int loc_order = order - ceil_half(con.poly.degree());
            if (loc_order < 0)
                throw std::runtime_error("relaxation: order " + std::to_string(order) +
                                         " too small for constraint '" + con.name + "'");
            const BlockSense sense = con.sense == PopConstraint::Sense::Eq0
                                         ? BlockSense::Zero
                                         : BlockSense::PSD;
            as.add_block(localizing_matrix(con.poly,
                                           pop.subsets[static_cast<std::size_t>(con.subset)],
                                           loc_order, as.index(), sense),
                         con.name + "_loc");
        }
        for (std::size_t k = 0; k < pop.subsets.size(); ++k) {
            const Polynomial ball = ball_polynomial(pop, pop.subsets[k]);
            if (ball.is_zero()) continue;
            as.add_block(localizing_matrix(ball, pop.subsets[k], order - 1, as.index(),
                                           BlockSense::PSD),
                         "ball_" + subset_label(pop, k));
        }
    } else {
        for (const auto& con : pop.constraints) {
            if (con.bad) continue;
            if (con.sense == PopConstraint::Sense::Eq0)
                as.add_eq(con.poly, 0.0, con.name);
            else
                as.add_ineq_geq(con.poly, con.name);
        }
        for (std::size_t k = 0; k < pop.subsets.size(); ++k) {
            const Polynomial ball = ball_polynomial(pop, pop.subsets[k]);
            if (ball.is_zero()) continue;
            as.add_ineq_geq(ball, "ball_" + subset_label(pop, k));
        }
    }

    for (const auto& con : pop.constraints) {
        if (!con.bad) continue;
        as.add_eq(con.poly, 0.0, con.name);
        if (con.poly.degree() == 1)
            as.add_eq(con.poly * con.poly, 0.0, con.name + "_sq");
    }

    // Product-lift variables are products of binary selectors, hence binary
    // themselves: pin the diagonal moment to the linear one.
    for (int v = 0; v < pop.vars.size(); ++v) {
        if (pop.vars.info(v).kind != Variable::Kind::S) continue;
        Polynomial closure = Polynomial::monomial(Monomial::var(v, 2)) -
                             Polynomial::variable(v);
        as.add_eq(closure, 0.0, "closure_" + pop.vars.name(v));
    }
}

void check_degree_two(const PopProblem& pop) {
    if (pop.objective.degree() > 2)
        throw std::runtime_error(
            "relaxation: objective degree exceeds 2; use the two-hidden-layer assembly "
            "or the product-lifted problem");
    for (const auto& con : pop.constraints)
        if (con.poly.degree() > 2)
            throw std::runtime_error("relaxation: constraint '" + con.name +
                                     "' has degree above 2");
}

}  // namespace

Relaxation assemble_shor(const PopProblem& pop) {
    check_degree_two(pop);
    Assembler as(pop);
    const PopProblem& p = as.pop();
    as.add_block(moment_matrix(all_variable_ids(p), 1, as.index()), "moment_deg1");
    as.add_eq(Polynomial(1.0), 1.0, "mass");
    for (const auto& con : p.constraints) {
        if (con.bad) continue;
        if (con.sense == PopConstraint::Sense::Eq0)
            as.add_eq(con.poly, 0.0, con.name);
        else
            as.add_ineq_geq(con.poly, con.name);
    }
    for (const auto& con : p.constraints) {
        if (!con.bad) continue;
        as.add_eq(con.poly, 0.0, con.name);
        if (con.poly.degree() == 1)
            as.add_eq(con.poly * con.poly, 0.0, con.name + "_sq");
    }
    for (int v = 0; v < p.vars.size(); ++v) {
        if (p.vars.info(v).kind != Variable::Kind::S) continue;
        Polynomial closure = Polynomial::monomial(Monomial::var(v, 2)) -
                             Polynomial::variable(v);
        as.add_eq(closure, 0.0, "closure_" + p.vars.name(v));
    }
    return as.finalize(p.objective);
}

Relaxation assemble_hr(const PopProblem& pop, int order) {
    if (order < 1) throw std::invalid_argument("assemble_hr: order must be >= 1");
    Assembler as(pop);
    assemble_core(as, order);
    return as.finalize(pop.objective);
}

Relaxation assemble_hr_two_hidden(const PopProblem& pop, int order, CubicMode mode) {
    if (order < 1)
        throw std::invalid_argument("assemble_hr_two_hidden: order must be >= 1");
    if (mode == CubicMode::Lifted) {
        bool has_product_vars = false;
        for (int v = 0; v < pop.vars.size(); ++v)
            if (pop.vars.info(v).kind == Variable::Kind::S) has_product_vars = true;
        if (!has_product_vars)
            throw std::runtime_error(
                "relaxation: lifted mode needs the product-lifted problem "
                "(build_lifted_lcep2)");
        return order == 1 ? assemble_shor(pop) : assemble_hr(pop, order);
    }
    if (pop.hidden_layers != 2 || pop.layer_sizes.size() < 3)
        throw std::runtime_error(
            "relaxation: cubic-term assembly applies to two-hidden-layer problems");
    const int p0 = pop.layer_sizes[0];
    const int p1 = pop.layer_sizes[1];
    const int p2 = pop.layer_sizes[2];
    std::vector<int> t_ids(static_cast<std::size_t>(p0));
    std::vector<int> u1_ids(static_cast<std::size_t>(p1));
    std::vector<int> u2_ids(static_cast<std::size_t>(p2));
    for (int a = 0; a < p0; ++a) t_ids[static_cast<std::size_t>(a)] = pop.vars.find(Variable::Kind::T, 0, a);
    for (int j = 0; j < p1; ++j) u1_ids[static_cast<std::size_t>(j)] = pop.vars.find(Variable::Kind::U, 1, j);
    for (int k = 0; k < p2; ++k) u2_ids[static_cast<std::size_t>(k)] = pop.vars.find(Variable::Kind::U, 2, k);
    for (int id : t_ids)
        if (id < 0) throw std::logic_error("relaxation: missing direction variable");
    for (int id : u1_ids)
        if (id < 0) throw std::logic_error("relaxation: missing first-layer selector");
    for (int id : u2_ids)
        if (id < 0) throw std::logic_error("relaxation: missing second-layer selector");

    Assembler as(pop);
    assemble_core(as, order);

    if (mode == CubicMode::PerTriple) {
        for (int a = 0; a < p0; ++a)
            for (int j = 0; j < p1; ++j)
                for (int k = 0; k < p2; ++k)
                    as.add_block(triple_moment_block(t_ids[static_cast<std::size_t>(a)],
                                                     u1_ids[static_cast<std::size_t>(j)],
                                                     u2_ids[static_cast<std::size_t>(k)],
                                                     as.index()),
                                 "triple_" + std::to_string(a) + "_" + std::to_string(j) +
                                     "_" + std::to_string(k));
    } else {
        for (int k = 0; k < p2; ++k)
            as.add_block(aggregated_moment_block(t_ids, u1_ids,
                                                 u2_ids[static_cast<std::size_t>(k)],
                                                 as.index()),
                         "agg_" + std::to_string(k));
    }

    // Selector products are binary: identify the quartic diagonal moment with
    // the quadratic one for every first/second-layer pair. Without these rows
    // the quartic diagonal is otherwise unconstrained from above and the
    // relaxation is unbounded.
    for (int j = 0; j < p1; ++j) {
        for (int k = 0; k < p2; ++k) {
            const Monomial quad = Monomial::var(u1_ids[static_cast<std::size_t>(j)]) *
                                  Monomial::var(u2_ids[static_cast<std::size_t>(k)]);
            const Monomial quart = Monomial::var(u1_ids[static_cast<std::size_t>(j)], 2) *
                                   Monomial::var(u2_ids[static_cast<std::size_t>(k)], 2);
            if (as.index().lookup(quad) < 0 || as.index().lookup(quart) < 0)
                throw std::logic_error("relaxation: cubic-term blocks missing selector "
                                       "product moments");
            as.add_eq(Polynomial::monomial(quart) - Polynomial::monomial(quad), 0.0,
                      "binary_closure_" + std::to_string(j) + "_" + std::to_string(k));
        }
    }

    return as.finalize(pop.objective);
}

std::vector<double> point_moments(const Relaxation& rel, const std::vector<double>& point) {
    std::vector<double> y(static_cast<std::size_t>(rel.conic.n_y));
    for (int i = 0; i < rel.conic.n_y; ++i)
        y[static_cast<std::size_t>(i)] =
            rel.index.monomial(i).eval(point) / rel.scale[static_cast<std::size_t>(i)];
    return y;
}

std::vector<double> natural_moments(const Relaxation& rel, const std::vector<double>& y) {
    if (y.size() != rel.scale.size())
        throw std::invalid_argument("natural_moments: length mismatch");
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * rel.scale[i];
    return out;
}

AssemblySizeEstimate estimate_assembly(const PopProblem& pop, bool sparse, int order,
                                       CubicMode mode) {
    const long n = pop.vars.size();
    AssemblySizeEstimate est;
    est.moment_vars = 1 + n + n * (n + 1) / 2;
    est.psd_blocks = 1;
    auto binom = [](long a, long b) {
        double r = 1.0;
        for (long i = 1; i <= b; ++i) r *= static_cast<double>(a - b + i) / static_cast<double>(i);
        return static_cast<long>(r + 0.5);
    };
    if (sparse && order >= 2) {
        long nonbad = 0;
        for (const auto& con : pop.constraints)
            if (!con.bad) ++nonbad;
        for (const auto& subset : pop.subsets) {
            const long w = static_cast<long>(subset.size());
            const long basis = binom(w + order, order);
            est.moment_vars += basis * (basis + 1) / 2;
        }
        est.psd_blocks += 2 * static_cast<long>(pop.subsets.size()) + nonbad;
    }
    if (mode != CubicMode::Lifted && pop.layer_sizes.size() >= 3) {
        const long p0 = pop.layer_sizes[0];
        const long p1 = pop.layer_sizes[1];
        const long p2 = pop.layer_sizes[2];
        est.moment_vars += 2 * p1 * p2 + p0 * p1 * p2;
        if (mode == CubicMode::PerTriple) {
            est.psd_blocks += p0 * p1 * p2;
        } else {
            est.psd_blocks += p2;
            const long d = p0 + p1;
            est.moment_vars += p2 * d * (d + 1) / 2;
        }
    }
    return est;
}

}  // namespace lipcert
