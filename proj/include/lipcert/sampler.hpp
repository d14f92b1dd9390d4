#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "lipcert/network.hpp"

namespace lipcert {

struct LbsOptions {
    long samples = 10000;
    std::uint64_t seed = 0;
    int threads = 0;  ///< 0: LIPCERT_THREADS environment variable, else hardware
};

struct LbsResult {
    double value = 0.0;  ///< largest l1 gradient norm over the sampled points
    Eigen::VectorXd best_point;
    long samples = 0;
};

/// Sampling lower bound on the largest slope of c . f over the region: draws
/// points uniformly and maximizes the l1 norm of the input gradient. The
/// sample sequence is split into fixed-size chunks with independently seeded
/// substreams, so the result is identical for any thread count and growing the
/// sample budget only appends new points (earlier draws are unchanged).
LbsResult lbs(const Network& net, const InputRegion& region, const Eigen::VectorXd& c,
              const LbsOptions& opts = {});
LbsResult lbs(const Network& net, const InputRegion& region, int label,
              const LbsOptions& opts = {});

/// Exact largest slope of c . f for one-hidden-layer networks: enumerates all
/// activation patterns, keeps those realizable with strictly positive margin
/// somewhere in the region (margin-maximization LP, threshold 1e-9), and takes
/// the closed-form slope of the best realizable pattern. Throws when the
/// network has more than one hidden layer or more than 16 hidden units.
double exact_lipschitz_1hidden(const Network& net, const InputRegion& region,
                               const Eigen::VectorXd& c);
double exact_lipschitz_1hidden(const Network& net, const InputRegion& region, int label);

}  // namespace lipcert
