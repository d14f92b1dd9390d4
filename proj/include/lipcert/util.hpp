#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace lipcert {

/// Formats a double with 17 significant digits (%.17g), enough to recover the
/// exact bit pattern on parse.
std::string fmt_g17(double value);

/// Mixes a base seed with a stream id into an independent-looking seed
/// (splitmix64 finalizer), used to derive per-chunk RNG substreams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Worker count: `requested` if positive, else the LIPCERT_THREADS environment
/// variable, else the hardware concurrency; always at least 1.
int resolve_threads(int requested);

/// Deterministic random stream: uniforms are built directly from mt19937_64
/// output bits and normals via Box-Muller, so sequences do not depend on
/// standard-library distribution internals.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : eng_(seed) {}

    /// Uniform on [0, 1).
    double uniform01();
    /// Uniform on (0, 1] (safe as a log argument).
    double uniform01_open0();
    double uniform(double lo, double hi);
    double normal();

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lipcert
