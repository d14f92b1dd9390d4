#pragma once

#include <limits>
#include <string>
#include <vector>

#include "lipcert/moments.hpp"

namespace lipcert {

/// One entry of a symmetric matrix-valued affine map: the (row, col) entry of
/// the block equals constant + sum(coef * y_idx). Only row <= col is stored.
struct ConicEntry {
    int row = 0;
    int col = 0;
    double constant = 0.0;
    LinearForm form;
};

struct ConicBlock {
    int dim = 0;
    std::string label;
    std::vector<ConicEntry> entries;
};

/// Linear row over the y variables; meaning depends on the container
/// (equalities: form = rhs, inequalities: form <= rhs).
struct ConicRow {
    LinearForm form;
    double rhs = 0.0;
    std::string label;
};

/// Linear-matrix-inequality form of a moment relaxation: free variables y,
/// an objective, affine PSD blocks, and scalar equality/inequality rows.
struct ConicProblem {
    int n_y = 0;
    bool maximize = true;
    LinearForm objective;
    std::vector<ConicRow> equalities;
    std::vector<ConicRow> inequalities;
    std::vector<ConicBlock> blocks;
};

enum class SolveStatus {
    Optimal,
    NearOptimal,
    IterationLimit,
    TimeLimit,
    Infeasible,
    Unbounded,
    NumericalFailure,
};

std::string to_string(SolveStatus s);

struct SolverSettings {
    double feas_tol = 1e-8;
    double gap_tol = 1e-8;
    int max_iter = 200;
    double time_limit_s = std::numeric_limits<double>::infinity();
    bool verbose = false;
};

/// Feasibility of a candidate y against the problem data, always recomputed
/// from scratch (never trusted from a solver or a file).
struct ConicResiduals {
    double equality_inf = 0.0;    ///< max |a^T y - b|
    double inequality_inf = 0.0;  ///< max violation of g^T y <= h
    double psd_min_eig = 0.0;     ///< most negative block eigenvalue (0 if none)
};

struct Solution {
    SolveStatus status = SolveStatus::NumericalFailure;
    double value = 0.0;       ///< objective at y, in the problem's sense
    double dual_value = 0.0;  ///< dual bound with the same orientation
    std::vector<double> y;
    int iterations = 0;
    double solve_time_s = 0.0;
    ConicResiduals residuals;
};

ConicResiduals compute_residuals(const ConicProblem& problem, const std::vector<double>& y);

double objective_value(const ConicProblem& problem, const std::vector<double>& y);

/// Interior-point solve (Nesterov-Todd scaling, predictor-corrector). Each
/// moment variable is identified with a matrix entry where it appears with
/// coefficient one; remaining appearances become coupling equalities, scalar
/// rows get slack variables, and variables without such an entry are split
/// into nonnegative pairs. Deterministic for identical inputs and settings.
Solution solve(const ConicProblem& problem, const SolverSettings& settings = {});

/// Serializes a solution in the line-based format also produced by external
/// solver scripts (magic line, status, value, count, one y per line).
void write_solution(const Solution& solution, const std::string& path);

/// Reads a solution file, validates the dimension against the problem, and
/// recomputes value and residuals from the problem data.
Solution import_solution(const std::string& path, const ConicProblem& problem);

}  // namespace lipcert
