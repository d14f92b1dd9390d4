#include "lipcert/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lipcert/conic.hpp"
#include "lipcert/util.hpp"

namespace lipcert {

namespace {

constexpr long kChunk = 1024;

struct ChunkBest {
    double value = -1.0;
    Eigen::VectorXd point;
};

ChunkBest scan_chunk(const Network& net, const InputRegion& region,
                     const Eigen::VectorXd& c, std::uint64_t seed, long chunk_index,
                     long count) {
    RandomStream rng(mix_seed(seed, static_cast<std::uint64_t>(chunk_index)));
    const int p0 = net.input_dim();
    ChunkBest best;
    Eigen::VectorXd x(p0);
    for (long s = 0; s < count; ++s) {
        for (int a = 0; a < p0; ++a)
            x[a] = region.lower(a) + (region.upper(a) - region.lower(a)) * rng.uniform01();
        const double v = gradient(net, x, c).lpNorm<1>();
        if (v > best.value) {
            best.value = v;
            best.point = x;
        }
    }
    return best;
}

}  // namespace

LbsResult lbs(const Network& net, const InputRegion& region, const Eigen::VectorXd& c,
              const LbsOptions& opts) {
    validate_network(net);
    if (c.size() != net.num_labels())
        throw std::invalid_argument("lbs: direction has " + std::to_string(c.size()) +
                                    " entries, expected " +
                                    std::to_string(net.num_labels()));
    if (opts.samples < 1) throw std::invalid_argument("lbs: need at least one sample");
    if (!region.global && region.center.size() != net.input_dim())
        throw std::invalid_argument("lbs: region centre dimension mismatch");

    const long n_chunks = (opts.samples + kChunk - 1) / kChunk;
    std::vector<ChunkBest> bests(static_cast<std::size_t>(n_chunks));
    auto run = [&](long ci) {
        const long lo = ci * kChunk;
        const long hi = std::min(opts.samples, lo + kChunk);
        bests[static_cast<std::size_t>(ci)] = scan_chunk(net, region, c, opts.seed, ci, hi - lo);
    };

    const int threads =
        static_cast<int>(std::min<long>(resolve_threads(opts.threads), n_chunks));
    if (threads <= 1) {
        for (long ci = 0; ci < n_chunks; ++ci) run(ci);
    } else {
        std::atomic<long> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (long ci = next.fetch_add(1); ci < n_chunks; ci = next.fetch_add(1))
                    run(ci);
            });
        for (auto& th : pool) th.join();
    }

    LbsResult out;
    out.samples = opts.samples;
    out.value = -1.0;
    for (const ChunkBest& b : bests) {
        if (b.value > out.value) {
            out.value = b.value;
            out.best_point = b.point;
        }
    }
    return out;
}

LbsResult lbs(const Network& net, const InputRegion& region, int label,
              const LbsOptions& opts) {
    if (label < 0 || label >= net.num_labels())
        throw std::invalid_argument("lbs: label out of range");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(net.num_labels());
    c[label] = 1.0;
    return lbs(net, region, c, opts);
}

namespace {

/// Margin-maximization LP for one activation pattern: maximize delta subject
/// to x in the region box and sign_j (a_j . x + b_j) >= delta for all units.
double pattern_margin(const Network& net, const InputRegion& region,
                      const std::vector<int>& sign) {
    const int p0 = net.input_dim();
    const int p1 = net.layer_sizes[1];
    const Eigen::MatrixXd& A = net.weights[0];
    const Eigen::VectorXd& b = net.biases[0];

    ConicProblem lp;
    lp.n_y = p0 + 1;
    lp.maximize = true;
    lp.objective = {{p0, 1.0}};
    double margin_cap = 1.0;
    for (int a = 0; a < p0; ++a) {
        lp.inequalities.push_back({{{a, 1.0}}, region.upper(a), "ub"});
        lp.inequalities.push_back({{{a, -1.0}}, -region.lower(a), "lb"});
    }
    for (int j = 0; j < p1; ++j) {
        ConicRow row;
        const double s = static_cast<double>(sign[static_cast<std::size_t>(j)]);
        for (int a = 0; a < p0; ++a)
            if (A(j, a) != 0.0) row.form.emplace_back(a, -s * A(j, a));
        row.form.emplace_back(p0, 1.0);
        row.rhs = s * b[j];
        row.label = "margin";
        lp.inequalities.push_back(std::move(row));
        double reach = std::fabs(b[j]);
        for (int a = 0; a < p0; ++a)
            reach += std::fabs(A(j, a)) * std::max(std::fabs(region.lower(a)),
                                                   std::fabs(region.upper(a)));
        margin_cap = std::max(margin_cap, reach + 1.0);
    }
    lp.inequalities.push_back({{{p0, 1.0}}, margin_cap, "cap"});

    const Solution sol = solve(lp, SolverSettings{});
    if (sol.status != SolveStatus::Optimal && sol.status != SolveStatus::NearOptimal)
        throw std::runtime_error("exact_lipschitz_1hidden: pattern LP ended with status " +
                                 to_string(sol.status));
    return sol.value;
}

}  // namespace

double exact_lipschitz_1hidden(const Network& net, const InputRegion& region,
                               const Eigen::VectorXd& c) {
    validate_network(net);
    if (net.hidden_layers() != 1)
        throw std::invalid_argument(
            "exact_lipschitz_1hidden: network must have exactly one hidden layer");
    const int p1 = net.layer_sizes[1];
    if (p1 > 16)
        throw std::invalid_argument(
            "exact_lipschitz_1hidden: more than 16 hidden units (2^p1 patterns)");
    if (c.size() != net.num_labels())
        throw std::invalid_argument("exact_lipschitz_1hidden: direction size mismatch");
    if (!region.global && region.center.size() != net.input_dim())
        throw std::invalid_argument("exact_lipschitz_1hidden: region centre mismatch");

    const Eigen::VectorXd w = net.output_weights.transpose() * c;  // per-unit weights
    double best = 0.0;
    std::vector<int> sign(static_cast<std::size_t>(p1));
    for (long mask = 0; mask < (1L << p1); ++mask) {
        for (int j = 0; j < p1; ++j)
            sign[static_cast<std::size_t>(j)] = (mask >> j) & 1 ? 1 : -1;
        if (pattern_margin(net, region, sign) < 1e-9) continue;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(net.input_dim());
        for (int j = 0; j < p1; ++j)
            if (sign[static_cast<std::size_t>(j)] == 1)
                v += w[j] * net.weights[0].row(j).transpose();
        best = std::max(best, v.lpNorm<1>());
    }
    return best;
}

double exact_lipschitz_1hidden(const Network& net, const InputRegion& region, int label) {
    if (label < 0 || label >= net.num_labels())
        throw std::invalid_argument("exact_lipschitz_1hidden: label out of range");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(net.num_labels());
    c[label] = 1.0;
    return exact_lipschitz_1hidden(net, region, c);
}

}  // namespace lipcert
