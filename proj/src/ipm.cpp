#include "ipm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>

namespace lipcert::detail {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

/// Per-block view of the constraint rows that touch it.
struct BlockRows {
    std::vector<int> row_ids;
    std::vector<std::vector<StdEntry>> entries;  ///< block-local, parallel to row_ids
};

/// Adds coef * Mat(entries) to target, where Mat spreads off-diagonal values
/// half-and-half.
void add_scaled(const std::vector<StdEntry>& entries, double coef, MatrixXd& target) {
    for (const auto& e : entries) {
        if (e.row == e.col) {
            target(e.row, e.col) += coef * e.v;
        } else {
            target(e.row, e.col) += 0.5 * coef * e.v;
            target(e.col, e.row) += 0.5 * coef * e.v;
        }
    }
}

/// Largest step alpha in [0, 1] keeping X + alpha * D positive semidefinite,
/// given the Cholesky factor of X.
double max_step(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& d) {
    MatrixXd y = llt.matrixL().solve(d);
    y = llt.matrixL().solve(y.transpose()).transpose();
    // y is L^-1 D L^-T up to symmetry error; symmetrize before the eigensolve.
    MatrixXd ys = 0.5 * (y + y.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(ys, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin >= -1e-14) return 1.0;
    return std::min(1.0, -1.0 / lmin);
}

double max_step_lp(const VectorXd& x, const VectorXd& dx) {
    double a = 1.0;
    for (int i = 0; i < x.size(); ++i)
        if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
    return a;
}

double max_step_scalar(double x, double dx) {
    if (dx >= 0.0) return 1.0;
    return std::min(1.0, -x / dx);
}

}  // namespace

/// Homogeneous self-dual interior-point method with Nesterov-Todd scaling and
/// a Mehrotra-style combined predictor-corrector step. The embedding
///   A x = b tau,  A^T lambda + s = c tau,  c.x - b.lambda + kappa = 0
/// always admits a strictly interior starting point, so problems whose
/// feasible set has empty interior (routine for moment relaxations with
/// forced-singular moment matrices) remain solvable, and infeasibility or
/// unboundedness of the original problem shows up as a Farkas certificate
/// instead of divergence.
IpmResult ipm_solve(const StandardSdp& sdp, const SolverSettings& st) {
    const int nb = static_cast<int>(sdp.psd_dims.size());
    const int m = static_cast<int>(sdp.rows.size());
    const int nlp = sdp.lp_dim;
    const double t_start = now_seconds();

    IpmResult res;
    res.status = SolveStatus::NumericalFailure;

    if (m == 0) throw std::invalid_argument("ipm_solve: no constraint rows");

    // Per-block row incidence; entries of one row may arrive in any block order.
    std::vector<BlockRows> brows(nb);
    std::vector<std::vector<std::pair<int, double>>> lp_rows(nlp);
    for (int j = 0; j < m; ++j) {
        std::vector<StdEntry> sorted = sdp.rows[j].psd;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const StdEntry& a, const StdEntry& b) { return a.block < b.block; });
        for (const auto& e : sorted) {
            BlockRows& br = brows[e.block];
            if (br.row_ids.empty() || br.row_ids.back() != j) {
                br.row_ids.push_back(j);
                br.entries.emplace_back();
            }
            br.entries.back().push_back(e);
        }
        for (const auto& [pos, v] : sdp.rows[j].lp) lp_rows[pos].emplace_back(j, v);
    }

    // Route choice for the Schur accumulation, fixed across iterations. A row
    // with many coefficients in a large block goes through a support-restricted
    // congruence: V = W A W is formed with dense kernels on the columns the row
    // actually touches and then dotted against the other rows, which replaces
    // the quadratic entry-pair gather that dominates on rows with hundreds of
    // coefficients. Rows with few coefficients keep the entry-pair formula,
    // which is cheaper for them than materializing V.
    constexpr int kCongMinDim = 48;
    constexpr std::size_t kCongMinEntries = 16;
    struct CongRow {
        std::size_t pos;           ///< index into BlockRows arrays
        std::vector<int> support;  ///< distinct row/col indices used by the row
    };
    std::vector<std::vector<CongRow>> cong(nb);
    std::vector<std::vector<std::size_t>> pair_rows(nb);
    int max_dim = 0, max_sup = 0;
    for (int b = 0; b < nb; ++b) {
        max_dim = std::max(max_dim, sdp.psd_dims[b]);
        std::vector<char> seen(sdp.psd_dims[b], 0);
        for (std::size_t a = 0; a < brows[b].row_ids.size(); ++a) {
            const auto& ea = brows[b].entries[a];
            if (sdp.psd_dims[b] < kCongMinDim || ea.size() < kCongMinEntries) {
                pair_rows[b].push_back(a);
                continue;
            }
            CongRow cr;
            cr.pos = a;
            for (const auto& e : ea) {
                if (!seen[e.row]) {
                    seen[e.row] = 1;
                    cr.support.push_back(e.row);
                }
                if (!seen[e.col]) {
                    seen[e.col] = 1;
                    cr.support.push_back(e.col);
                }
            }
            for (int idx : cr.support) seen[idx] = 0;
            max_sup = std::max(max_sup, static_cast<int>(cr.support.size()));
            cong[b].push_back(std::move(cr));
        }
    }

    // Normalize the objective by a power of two. Iterations then treat
    // objectives that differ by a positive factor identically (a factor that
    // is itself a power of two gives bitwise-identical trajectories), so
    // reported bounds scale exactly with the objective; the caller recovers
    // original units by evaluating the returned iterate.
    std::vector<MatrixXd> c_psd = sdp.c_psd;
    VectorXd c_lp = sdp.c_lp;
    double obj_scale = 0.0;
    for (const auto& c : c_psd)
        if (c.size()) obj_scale = std::max(obj_scale, c.cwiseAbs().maxCoeff());
    if (nlp > 0) obj_scale = std::max(obj_scale, c_lp.cwiseAbs().maxCoeff());
    obj_scale = obj_scale > 0.0 && std::isfinite(obj_scale)
                    ? std::ldexp(1.0, std::ilogb(obj_scale))
                    : 1.0;
    for (auto& c : c_psd) c /= obj_scale;
    c_lp /= obj_scale;

    double normb = 0.0;
    for (const auto& r : sdp.rows) normb = std::max(normb, std::abs(r.rhs));
    double normc = 0.0;
    for (const auto& c : c_psd)
        if (c.size()) normc = std::max(normc, c.cwiseAbs().maxCoeff());
    if (nlp > 0) normc = std::max(normc, c_lp.cwiseAbs().maxCoeff());
    double norma = 0.0;
    for (const auto& r : sdp.rows) {
        for (const auto& e : r.psd) norma = std::max(norma, std::abs(e.v));
        for (const auto& [pos, v] : r.lp) norma = std::max(norma, std::abs(v));
    }

    VectorXd bvec(m);
    for (int j = 0; j < m; ++j) bvec[j] = sdp.rows[j].rhs;

    // Strictly interior start of the embedding.
    std::vector<MatrixXd> X(nb), S(nb);
    for (int b = 0; b < nb; ++b) {
        X[b] = MatrixXd::Identity(sdp.psd_dims[b], sdp.psd_dims[b]);
        S[b] = MatrixXd::Identity(sdp.psd_dims[b], sdp.psd_dims[b]);
    }
    VectorXd x_lp = VectorXd::Ones(nlp), s_lp = VectorXd::Ones(nlp);
    VectorXd lambda = VectorXd::Zero(m);
    double tau = 1.0, kappa = 1.0;

    double nu = static_cast<double>(nlp) + 1.0;
    for (int b = 0; b < nb; ++b) nu += sdp.psd_dims[b];
    if (nu <= 1.0) throw std::invalid_argument("ipm_solve: no cone variables");

    // Workspace reused across iterations.
    std::vector<Eigen::LLT<MatrixXd>> lltX(nb), lltS(nb);
    std::vector<MatrixXd> W(nb), E(nb), Einv(nb), Rd(nb), Grd(nb), Gc(nb), Rc(nb), dS(nb),
        dX(nb), dS2(nb), dX2(nb);
    std::vector<VectorXd> sigma(nb);
    VectorXd w2(nlp), rd_lp(nlp), grd_lp(nlp), gc_obj_lp(nlp), rc_lp(nlp), dx_lp(nlp),
        ds_lp(nlp), dx2_lp(nlp), ds2_lp(nlp);
    VectorXd ry(m), u_c(m), rhs(m), q1(m), q2(m), dl(m), dl2(m);
    MatrixXd schur(m, m), schur_reg(m, m);
    MatrixXd wsub(max_dim, max_sup), wtmp(max_dim, max_sup), shat(max_sup, max_sup),
        vfull(max_dim, max_dim);
    std::vector<int> sup_loc(max_dim, -1);

    double best_merit = std::numeric_limits<double>::infinity();
    IpmResult best = res;
    int stall = 0;
    int iters_done = 0;
    double last_alpha = 0.0;
    int last_bt = 0;

    const auto record = [&](double relp, double reld, double relg, double pobj,
                            double dobj) {
        const double merit = std::max({relp, reld, relg});
        if (merit < 0.9999 * best_merit) {
            best_merit = merit;
            best.X = X;
            for (auto& xb : best.X) xb /= tau;
            best.x_lp = x_lp / tau;
            best.lambda = lambda / tau;
            best.pobj = pobj;
            best.dobj = dobj;
            best.rel_p = relp;
            best.rel_d = reld;
            best.rel_gap = relg;
            stall = 0;
        } else {
            ++stall;
        }
    };

    const auto finish = [&](SolveStatus status) {
        best.status = status;
        best.iterations = iters_done;
        best.pobj *= obj_scale;
        best.dobj *= obj_scale;
        return best;
    };

    for (int iter = 0; iter < st.max_iter; ++iter) {
        // Factor the iterates, with a small diagonal lift on failure.
        bool factor_ok = true;
        for (int b = 0; b < nb && factor_ok; ++b) {
            for (int attempt = 0;; ++attempt) {
                lltX[b].compute(X[b]);
                if (lltX[b].info() == Eigen::Success) break;
                if (attempt >= 2) {
                    factor_ok = false;
                    break;
                }
                const double lift =
                    1e-12 * std::max(1.0, X[b].diagonal().cwiseAbs().maxCoeff());
                X[b].diagonal().array() += lift * std::pow(10.0, attempt);
            }
            if (!factor_ok) break;
            for (int attempt = 0;; ++attempt) {
                lltS[b].compute(S[b]);
                if (lltS[b].info() == Eigen::Success) break;
                if (attempt >= 2) {
                    factor_ok = false;
                    break;
                }
                const double lift =
                    1e-12 * std::max(1.0, S[b].diagonal().cwiseAbs().maxCoeff());
                S[b].diagonal().array() += lift * std::pow(10.0, attempt);
            }
        }
        if (!factor_ok) return finish(SolveStatus::NumericalFailure);

        // Nesterov-Todd scaling per block: Einv X Einv^T = E^T S E = diag(sigma).
        for (int b = 0; b < nb; ++b) {
            const MatrixXd Lx = lltX[b].matrixL();
            const MatrixXd Ls = lltS[b].matrixL();
            Eigen::BDCSVD<MatrixXd> svd(Ls.transpose() * Lx,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
            sigma[b] = svd.singularValues().cwiseMax(1e-150);
            const VectorXd isqrt = sigma[b].cwiseSqrt().cwiseInverse();
            E[b] = Lx * svd.matrixV() * isqrt.asDiagonal();
            Einv[b] = isqrt.asDiagonal() * svd.matrixU().transpose() * Ls.transpose();
            W[b] = E[b] * E[b].transpose();
        }
        for (int i = 0; i < nlp; ++i) w2[i] = x_lp[i] / s_lp[i];

        // Complementarity measure of the embedding.
        double gap = tau * kappa;
        for (int b = 0; b < nb; ++b) gap += (X[b].array() * S[b].array()).sum();
        gap += x_lp.dot(s_lp);
        const double mu = gap / nu;

        // Residuals of the homogeneous system.
        for (int j = 0; j < m; ++j) {
            double ax = 0.0;
            for (const auto& e : sdp.rows[j].psd) ax += e.v * X[e.block](e.row, e.col);
            for (const auto& [pos, v] : sdp.rows[j].lp) ax += v * x_lp[pos];
            ry[j] = ax - bvec[j] * tau;  // want 0
        }
        for (int b = 0; b < nb; ++b) {
            Rd[b] = S[b] - c_psd[b] * tau;
            const BlockRows& br = brows[b];
            for (std::size_t t = 0; t < br.row_ids.size(); ++t)
                add_scaled(br.entries[t], lambda[br.row_ids[t]], Rd[b]);
            // Rd = A^T lambda + S - C tau, want 0
        }
        for (int i = 0; i < nlp; ++i) {
            double atl = 0.0;
            for (const auto& [j, v] : lp_rows[i]) atl += v * lambda[j];
            rd_lp[i] = atl + s_lp[i] - c_lp[i] * tau;
        }
        double cx = x_lp.size() ? c_lp.dot(x_lp) : 0.0;
        for (int b = 0; b < nb; ++b) cx += (c_psd[b].array() * X[b].array()).sum();
        const double blam = bvec.dot(lambda);
        const double rg = cx - blam + kappa;  // want 0

        // De-homogenized convergence metrics.
        const double pobj = cx / tau;
        const double dobj = blam / tau;
        const double rel_p = ry.cwiseAbs().maxCoeff() / tau / (1.0 + normb);
        double max_rd = 0.0;
        for (int b = 0; b < nb; ++b) max_rd = std::max(max_rd, Rd[b].cwiseAbs().maxCoeff());
        if (nlp > 0) max_rd = std::max(max_rd, rd_lp.cwiseAbs().maxCoeff());
        const double rel_d = max_rd / tau / (1.0 + normc);
        const double rel_gap =
            std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        record(rel_p, rel_d, rel_gap, pobj, dobj);

        if (st.verbose)
            std::cerr << "iter " << iter << "  mu " << mu << "  tau " << tau << "  kappa "
                      << kappa << "  rp " << rel_p << "  rd " << rel_d << "  gap "
                      << rel_gap << "  pobj " << pobj << "  dobj " << dobj << "  alpha "
                      << last_alpha << "  bt " << last_bt << "\n";

        if (rel_p <= st.feas_tol && rel_d <= st.feas_tol && rel_gap <= st.gap_tol)
            return finish(SolveStatus::Optimal);

        // Farkas certificates of the original problem.
        const double cert_scale = std::max({1.0, norma, normb, normc});
        if (blam > 0.0) {
            double dres = 0.0;  // max |A^T lambda + s| over the cone
            for (int b = 0; b < nb; ++b) {
                MatrixXd r = S[b];
                const BlockRows& br = brows[b];
                for (std::size_t t = 0; t < br.row_ids.size(); ++t)
                    add_scaled(br.entries[t], lambda[br.row_ids[t]], r);
                dres = std::max(dres, r.cwiseAbs().maxCoeff());
            }
            for (int i = 0; i < nlp; ++i) {
                double atl = 0.0;
                for (const auto& [j, v] : lp_rows[i]) atl += v * lambda[j];
                dres = std::max(dres, std::abs(atl + s_lp[i]));
            }
            if (dres <= st.feas_tol * cert_scale * blam)
                return finish(SolveStatus::Infeasible);
        }
        if (cx < 0.0) {
            double pres = 0.0;  // max |A x|
            for (int j = 0; j < m; ++j) {
                double ax = 0.0;
                for (const auto& e : sdp.rows[j].psd) ax += e.v * X[e.block](e.row, e.col);
                for (const auto& [pos, v] : sdp.rows[j].lp) ax += v * x_lp[pos];
                pres = std::max(pres, std::abs(ax));
            }
            if (pres <= st.feas_tol * cert_scale * (-cx))
                return finish(SolveStatus::Unbounded);
        }

        if (now_seconds() - t_start > st.time_limit_s)
            return finish(best_merit <= 1e-6 ? SolveStatus::NearOptimal
                                             : SolveStatus::TimeLimit);
        if (stall >= 20)
            return finish(best_merit <= 1e-6 ? SolveStatus::NearOptimal
                                             : SolveStatus::NumericalFailure);

        // Schur complement M_ij = tr(A_i W A_j W) (+ LP part).
        schur.setZero();
        const auto upper_add = [&](int i, int j, double v) {
            if (i <= j)
                schur(i, j) += v;
            else
                schur(j, i) += v;
        };
        for (int b = 0; b < nb; ++b) {
            const BlockRows& br = brows[b];
            const MatrixXd& Wb = W[b];
            const int dim = sdp.psd_dims[b];
            // Congruence-route rows: V = W A W on the row's support, dotted
            // against itself, the later congruence rows, and every pair row.
            const auto& cg = cong[b];
            for (std::size_t ci = 0; ci < cg.size(); ++ci) {
                const CongRow& cr = cg[ci];
                const auto& ea = br.entries[cr.pos];
                const int ns = static_cast<int>(cr.support.size());
                for (int k = 0; k < ns; ++k) sup_loc[cr.support[k]] = k;
                auto sh = shat.topLeftCorner(ns, ns);
                sh.setZero();
                for (const auto& e : ea) {
                    const int r = sup_loc[e.row], c = sup_loc[e.col];
                    if (r == c) {
                        sh(r, c) += e.v;
                    } else {
                        sh(r, c) += 0.5 * e.v;
                        sh(c, r) += 0.5 * e.v;
                    }
                }
                for (int k = 0; k < ns; ++k) sup_loc[cr.support[k]] = -1;
                auto ws = wsub.topLeftCorner(dim, ns);
                for (int k = 0; k < ns; ++k) ws.col(k) = Wb.col(cr.support[k]);
                auto wt = wtmp.topLeftCorner(dim, ns);
                wt.noalias() = ws * sh;
                auto v = vfull.topLeftCorner(dim, dim);
                v.noalias() = wt * ws.transpose();
                // The dots below read only the upper triangle; fold in the
                // lower half so roundoff asymmetry of the product cancels.
                v = 0.5 * (v + v.transpose()).eval();
                const int ja = br.row_ids[cr.pos];
                for (std::size_t cj = ci; cj < cg.size(); ++cj) {
                    const auto& eb = br.entries[cg[cj].pos];
                    double acc = 0.0;
                    for (const auto& e : eb) acc += e.v * v(e.row, e.col);
                    upper_add(ja, br.row_ids[cg[cj].pos], acc);
                }
                for (std::size_t pj : pair_rows[b]) {
                    const auto& eb = br.entries[pj];
                    double acc = 0.0;
                    for (const auto& e : eb) acc += e.v * v(e.row, e.col);
                    upper_add(ja, br.row_ids[pj], acc);
                }
            }
            // Entry-pair accumulation among the remaining rows.
            const auto& pw = pair_rows[b];
            for (std::size_t a = 0; a < pw.size(); ++a) {
                const auto& ea = br.entries[pw[a]];
                for (std::size_t bb = a; bb < pw.size(); ++bb) {
                    const auto& eb = br.entries[pw[bb]];
                    double acc = 0.0;
                    for (const auto& e1 : ea)
                        for (const auto& e2 : eb)
                            acc += 0.5 * e1.v * e2.v *
                                   (Wb(e1.col, e2.row) * Wb(e2.col, e1.row) +
                                    Wb(e1.col, e2.col) * Wb(e1.row, e2.row));
                    schur(br.row_ids[pw[a]], br.row_ids[pw[bb]]) += acc;
                }
            }
        }
        for (int i = 0; i < nlp; ++i) {
            const auto& rows_here = lp_rows[i];
            for (std::size_t a = 0; a < rows_here.size(); ++a)
                for (std::size_t bb = a; bb < rows_here.size(); ++bb) {
                    const int ja = rows_here[a].first;
                    const int jb = rows_here[bb].first;
                    const double add = rows_here[a].second * rows_here[bb].second * w2[i];
                    if (ja <= jb)
                        schur(ja, jb) += add;
                    else
                        schur(jb, ja) += add;
                }
        }
        schur = schur.selfadjointView<Eigen::Upper>();

        // Factor a statically regularized copy; directions are recovered on the
        // exact matrix by iterative refinement, which keeps them usable even
        // when the system is nearly singular near a degenerate optimal face.
        schur_reg = schur;
        double reg = 1e-13 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
        schur_reg.diagonal().array() += reg;
        Eigen::LLT<MatrixXd> schur_llt(schur_reg);
        for (int attempt = 0; schur_llt.info() != Eigen::Success && attempt < 6; ++attempt) {
            reg *= 100.0;
            schur_reg.diagonal().array() += reg;
            schur_llt.compute(schur_reg);
        }
        if (schur_llt.info() != Eigen::Success)
            return finish(best_merit <= 1e-6 ? SolveStatus::NearOptimal
                                             : SolveStatus::NumericalFailure);
        const auto solve_schur = [&](const VectorXd& b) {
            VectorXd sol = schur_llt.solve(b);
            for (int round = 0; round < 3; ++round) {
                VectorXd resid = b - schur * sol;
                const double rn = resid.cwiseAbs().maxCoeff();
                if (rn <= 1e-14 * (1.0 + b.cwiseAbs().maxCoeff())) break;
                sol += schur_llt.solve(resid);
            }
            return sol;
        };

        // Scaled pieces shared by both directions within this iteration:
        // Grd = W Rd W (and LP analogue), WCW products for the tau column.
        for (int b = 0; b < nb; ++b) Grd[b] = W[b] * Rd[b] * W[b];
        grd_lp = w2.array() * rd_lp.array();
        double cHc = 0.0;
        for (int b = 0; b < nb; ++b) {
            Gc[b] = W[b] * c_psd[b] * W[b];
            cHc += (c_psd[b].array() * Gc[b].array()).sum();
        }
        for (int i = 0; i < nlp; ++i) {
            gc_obj_lp[i] = w2[i] * c_lp[i];
            cHc += c_lp[i] * gc_obj_lp[i];
        }
        for (int j = 0; j < m; ++j) {
            double v = 0.0;
            for (const auto& e : sdp.rows[j].psd) v += e.v * Gc[e.block](e.row, e.col);
            for (const auto& [pos, cv] : sdp.rows[j].lp) v += cv * gc_obj_lp[pos];
            u_c[j] = v;
        }
        q2 = solve_schur(bvec + u_c);

        // Direction for given complementarity targets: dX + W dS W = Rc
        // blockwise, dx + w2 ds = rc_l on the LP part, tau dkappa + kappa dtau
        // = rc_t. Returns all increments via the output arguments.
        const auto solve_direction = [&](const std::vector<MatrixXd>& rc_psd,
                                         const VectorXd& rc_l, double rc_t,
                                         std::vector<MatrixXd>& dXo,
                                         std::vector<MatrixXd>& dSo, VectorXd& dxo,
                                         VectorXd& dso, VectorXd& dlo, double& dtau_o,
                                         double& dkappa_o) {
            for (int j = 0; j < m; ++j) {
                double v = -ry[j];
                for (const auto& e : sdp.rows[j].psd)
                    v -= e.v * (rc_psd[e.block](e.row, e.col) + Grd[e.block](e.row, e.col));
                for (const auto& [pos, cv] : sdp.rows[j].lp)
                    v -= cv * (rc_l[pos] + grd_lp[pos]);
                rhs[j] = v;
            }
            q1 = solve_schur(rhs);

            double c_gc = nlp ? c_lp.dot(rc_l) : 0.0;
            double c_grd = nlp ? c_lp.dot(grd_lp) : 0.0;
            for (int b = 0; b < nb; ++b) {
                c_gc += (c_psd[b].array() * rc_psd[b].array()).sum();
                c_grd += (c_psd[b].array() * Grd[b].array()).sum();
            }
            const double denom = (u_c - bvec).dot(q2) - cHc - kappa / tau;
            const double numer =
                -rg - (u_c - bvec).dot(q1) - c_gc - c_grd - rc_t / tau;
            dtau_o = denom != 0.0 ? numer / denom : 0.0;
            dkappa_o = (rc_t - kappa * dtau_o) / tau;
            dlo = q1 + dtau_o * q2;

            for (int b = 0; b < nb; ++b) {
                dSo[b] = -Rd[b] + c_psd[b] * dtau_o;
                const BlockRows& br = brows[b];
                for (std::size_t t = 0; t < br.row_ids.size(); ++t)
                    add_scaled(br.entries[t], -dlo[br.row_ids[t]], dSo[b]);
                MatrixXd tmp = rc_psd[b] - W[b] * dSo[b] * W[b];
                dXo[b] = 0.5 * (tmp + tmp.transpose());
            }
            for (int i = 0; i < nlp; ++i) {
                double atl = 0.0;
                for (const auto& [j, v] : lp_rows[i]) atl += v * dlo[j];
                dso[i] = -rd_lp[i] - atl + c_lp[i] * dtau_o;
                dxo[i] = rc_l[i] - w2[i] * dso[i];
            }
        };

        // Predictor (affine scaling direction).
        for (int b = 0; b < nb; ++b) Rc[b] = -X[b];
        rc_lp = -x_lp;
        double dtau = 0.0, dkappa = 0.0;
        solve_direction(Rc, rc_lp, -tau * kappa, dX, dS, dx_lp, ds_lp, dl, dtau, dkappa);

        double aff = std::min(max_step_lp(x_lp, dx_lp), max_step_lp(s_lp, ds_lp));
        aff = std::min(aff, max_step_scalar(tau, dtau));
        aff = std::min(aff, max_step_scalar(kappa, dkappa));
        for (int b = 0; b < nb; ++b) {
            aff = std::min(aff, max_step(lltX[b], dX[b]));
            aff = std::min(aff, max_step(lltS[b], dS[b]));
        }

        double gap_aff = (tau + aff * dtau) * (kappa + aff * dkappa);
        for (int b = 0; b < nb; ++b)
            gap_aff +=
                ((X[b] + aff * dX[b]).array() * (S[b] + aff * dS[b]).array()).sum();
        gap_aff += (x_lp + aff * dx_lp).dot(s_lp + aff * ds_lp);
        const double mu_aff = std::max(0.0, gap_aff / nu);
        const double sigma_c =
            std::min(1.0, std::max(1e-10, std::pow(mu_aff / std::max(mu, 1e-300), 3.0)));

        // Corrector with Mehrotra second-order term, in the scaled space. The
        // second-order term can point sharply out of the cone near degenerate
        // complementarity pairs; when the resulting step collapses relative to
        // the affine one, retry with the term damped away and keep the better
        // direction.
        const auto build_corrector = [&](double zeta) {
            for (int b = 0; b < nb; ++b) {
                const MatrixXd dxh = Einv[b] * dX[b] * Einv[b].transpose();
                const MatrixXd dsh = E[b].transpose() * dS[b] * E[b];
                MatrixXd r = -zeta * (dxh * dsh);
                r = 0.5 * (r + r.transpose());
                r.diagonal().array() += sigma_c * mu;
                r.diagonal() -= sigma[b].cwiseProduct(sigma[b]);
                // Rc = E (2 r / (sigma_i + sigma_j)) E^T
                for (int i = 0; i < r.rows(); ++i)
                    for (int j2 = 0; j2 < r.cols(); ++j2)
                        r(i, j2) *= 2.0 / (sigma[b][i] + sigma[b][j2]);
                Rc[b] = E[b] * r * E[b].transpose();
            }
            for (int i = 0; i < nlp; ++i)
                rc_lp[i] = (sigma_c * mu - x_lp[i] * s_lp[i] -
                            zeta * dx_lp[i] * ds_lp[i]) /
                           s_lp[i];
            return sigma_c * mu - tau * kappa - zeta * dtau * dkappa;
        };
        double dtau2 = 0.0, dkappa2 = 0.0;
        const auto step_bound = [&]() {
            double a = std::min(max_step_lp(x_lp, dx2_lp), max_step_lp(s_lp, ds2_lp));
            a = std::min(a, max_step_scalar(tau, dtau2));
            a = std::min(a, max_step_scalar(kappa, dkappa2));
            for (int b = 0; b < nb; ++b) {
                a = std::min(a, max_step(lltX[b], dX2[b]));
                a = std::min(a, max_step(lltS[b], dS2[b]));
            }
            return a;
        };
        double rc_tau = build_corrector(1.0);
        solve_direction(Rc, rc_lp, rc_tau, dX2, dS2, dx2_lp, ds2_lp, dl2, dtau2, dkappa2);
        double alpha = step_bound();
        if (alpha < 0.5 * aff) {
            const std::vector<MatrixXd> dX_keep = dX2, dS_keep = dS2;
            const VectorXd dx_keep = dx2_lp, ds_keep = ds2_lp, dl_keep = dl2;
            const double dtau_keep = dtau2, dkappa_keep = dkappa2;
            rc_tau = build_corrector(0.0);
            solve_direction(Rc, rc_lp, rc_tau, dX2, dS2, dx2_lp, ds2_lp, dl2, dtau2,
                            dkappa2);
            const double alpha0 = step_bound();
            if (alpha0 <= alpha) {
                dX2 = dX_keep;
                dS2 = dS_keep;
                dx2_lp = dx_keep;
                ds2_lp = ds_keep;
                dl2 = dl_keep;
                dtau2 = dtau_keep;
                dkappa2 = dkappa_keep;
            } else {
                alpha = alpha0;
            }
        }
        const double gamma = 0.99;
        alpha = std::min(1.0, gamma * alpha);

        last_alpha = alpha;

        for (int b = 0; b < nb; ++b) {
            X[b] += alpha * dX2[b];
            X[b] = 0.5 * (X[b] + X[b].transpose()).eval();
            S[b] += alpha * dS2[b];
            S[b] = 0.5 * (S[b] + S[b].transpose()).eval();
        }
        x_lp += alpha * dx2_lp;
        s_lp += alpha * ds2_lp;
        lambda += alpha * dl2;
        tau += alpha * dtau2;
        kappa += alpha * dkappa2;
        iters_done = iter + 1;

        // The embedding is homogeneous: rescale so tau stays at 1. This leaves
        // the de-homogenized iterate untouched but stops tau and kappa from
        // drifting to zero together, which would otherwise ruin the scaling of
        // the Schur system on problems whose dual optimum is not attained.
        if (tau > 0.0 && std::isfinite(tau)) {
            const double inv = 1.0 / tau;
            for (int b = 0; b < nb; ++b) {
                X[b] *= inv;
                S[b] *= inv;
            }
            x_lp *= inv;
            s_lp *= inv;
            lambda *= inv;
            kappa *= inv;
            tau = 1.0;
        }
    }

    return finish(best_merit <= 1e-6 ? SolveStatus::NearOptimal : SolveStatus::IterationLimit);
}

}  // namespace lipcert::detail
