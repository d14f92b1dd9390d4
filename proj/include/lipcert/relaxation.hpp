#pragma once

#include <vector>

#include "lipcert/conic.hpp"
#include "lipcert/moments.hpp"
#include "lipcert/pop.hpp"

namespace lipcert {

/// How degree-3 objective terms of two-hidden-layer problems are supplied
/// with moment blocks:
///   PerTriple  — one 3x3 block [1, t_i, u1_j u2_k] per index triple;
///   Aggregated — one (1+p0+p1) block per second-layer unit;
///   Lifted     — product variables s_jk = u1_j u2_k in the problem itself
///                (requires a problem built by build_lifted_lcep2).
enum class CubicMode { PerTriple, Aggregated, Lifted };

/// A moment relaxation ready for the conic solver. The conic problem is
/// expressed in internally rescaled moments: natural moment alpha equals
/// scale[alpha] times the conic variable, which keeps all matrix entries
/// near unit size. Objective values are unaffected by the rescaling.
struct Relaxation {
    ConicProblem conic;
    MomentIndex index;
    std::vector<double> scale;

    int n_moment_vars() const { return conic.n_y; }
    int n_psd_blocks() const { return static_cast<int>(conic.blocks.size()); }
};

/// Dense first-order relaxation: full degree-1 moment matrix, scalar
/// expectation constraints for every problem constraint, and the paired
/// linear/squared treatment of affine lift definitions. Requires a
/// degree-2 problem.
Relaxation assemble_shor(const PopProblem& pop);

/// Sparse relaxation of the given order: dense degree-1 moment matrix plus
/// per-subset moment and localizing blocks. Requires subsets (build_subsets)
/// satisfying the running intersection property, and an objective covered by
/// the generated blocks.
Relaxation assemble_hr(const PopProblem& pop, int order);

/// Two-hidden-layer assembly: adds the cubic-term blocks of the chosen mode.
/// order 1 keeps all other constraints as scalar expectation rows; order 2
/// uses the full per-subset machinery. Lifted mode delegates to
/// assemble_shor / assemble_hr on the product-lifted problem.
Relaxation assemble_hr_two_hidden(const PopProblem& pop, int order, CubicMode mode);

/// Moment vector (in the relaxation's scaled coordinates) of the point mass
/// at the given variable assignment; used for feasibility checks.
std::vector<double> point_moments(const Relaxation& rel, const std::vector<double>& point);

/// Converts a solved moment vector back to natural (unscaled) moments.
std::vector<double> natural_moments(const Relaxation& rel, const std::vector<double>& y);

struct AssemblySizeEstimate {
    long moment_vars = 0;
    long psd_blocks = 0;
};

/// Cheap upper-bound estimate of the assembly size, for resource guards.
AssemblySizeEstimate estimate_assembly(const PopProblem& pop, bool sparse, int order,
                                       CubicMode mode);

}  // namespace lipcert
