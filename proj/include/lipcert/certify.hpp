#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "lipcert/conic.hpp"
#include "lipcert/network.hpp"
#include "lipcert/relaxation.hpp"

namespace lipcert {

/// Bounding methods. Lbs samples gradients and yields a lower bound; the
/// others solve a conic relaxation and yield certified upper bounds.
enum class Method { Lbs, Shor, Hr1, Hr2 };

Method method_from_string(const std::string& name);
std::string to_string(Method method);
CubicMode cubic_mode_from_string(const std::string& name);
std::string to_string(CubicMode mode);

struct EstimateOptions {
    Method method = Method::Hr2;
    CubicMode cubic_mode = CubicMode::PerTriple;  ///< two-hidden-layer networks only
    long samples = 10000;                         ///< Lbs
    std::uint64_t seed = 0;                       ///< Lbs
    int threads = 0;
    SolverSettings solver;
};

struct EstimateResult {
    double value = 0.0;
    bool upper_bound = false;   ///< false for the sampling method
    SolveStatus status = SolveStatus::Optimal;
    int iterations = 0;
    double solve_time_s = 0.0;
    long moment_vars = 0;
    long psd_blocks = 0;
    ConicResiduals residuals;
};

/// Bound on the largest l1 gradient norm of c . f over the region, by the
/// chosen method. Conic methods support one or two hidden layers.
EstimateResult estimate_lipschitz(const Network& net, const InputRegion& region,
                                  const Eigen::VectorXd& c, const EstimateOptions& opts);
EstimateResult estimate_lipschitz(const Network& net, const InputRegion& region,
                                  int label, const EstimateOptions& opts);

/// Builds the relaxation the chosen conic method would solve (for export and
/// size inspection). Throws for the sampling method.
Relaxation build_relaxation(const Network& net, const InputRegion& region,
                            const Eigen::VectorXd& c, const EstimateOptions& opts);

/// Estimated size of that relaxation without assembling it (zero for the
/// sampling method), for resource guards.
AssemblySizeEstimate estimate_problem_size(const Network& net, const InputRegion& region,
                                           const Eigen::VectorXd& c,
                                           const EstimateOptions& opts);

/// Symmetric matrix of certified slope bounds for all score differences
/// f_i - f_j (zero diagonal). Solves one relaxation per unordered pair.
Eigen::MatrixXd pairwise_matrix(const Network& net, const InputRegion& region,
                                const EstimateOptions& opts);

struct BinaryCertificate {
    int label_a = 0;
    int label_b = 0;
    double margin = 0.0;     ///< f_a(x0) - f_b(x0)
    double lipschitz = 0.0;  ///< certified bound for the difference direction
    double radius = 0.0;
    bool certified = false;  ///< sign of the margin cannot flip within the radius
};

/// Certifies that the comparison between two labels is stable on the
/// infinity-norm ball of the given radius: |margin| > radius * bound.
BinaryCertificate certify_binary(const Network& net, const Eigen::VectorXd& x0,
                                 int label_a, int label_b, double radius,
                                 double lipschitz_bound);

struct MulticlassCertificate {
    int predicted = 0;
    bool certified = false;
    double worst_slack = 0.0;  ///< min over rivals of margin - radius * bound
    int worst_rival = -1;
};

/// Certifies that the arg-max label is stable on the ball of the given radius,
/// using a pairwise bound matrix (entry (i,j) bounds the slope of f_i - f_j).
MulticlassCertificate certify_multiclass(const Network& net, const Eigen::VectorXd& x0,
                                         double radius, const Eigen::MatrixXd& pairwise);

struct Dataset {
    Eigen::MatrixXd points;   ///< one row per point
    std::vector<int> labels;  ///< empty when the file carries no labels
};

/// Loads a dataset from JSON ({"points": [[..]..], "labels": [..]} or a bare
/// array of arrays) or CSV (one point per line; no header, no labels).
Dataset load_dataset(const std::string& path);

struct RatioResult {
    long total = 0;
    long certified = 0;
    long refused = 0;  ///< points whose ball is not contained in the region
    double ratio = 0.0;
    std::vector<std::string> notes;
};

/// Fraction of dataset points whose prediction is certifiably stable at the
/// given radius. Points whose ball leaves the region the bounds were computed
/// on are refused (counted as not certified). When the dataset carries labels,
/// a misclassified point is never counted as certified.
RatioResult certified_ratio(const Network& net, const InputRegion& region,
                            const Dataset& dataset, double radius,
                            const Eigen::MatrixXd& pairwise);

}  // namespace lipcert
