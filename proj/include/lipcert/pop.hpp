#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "lipcert/network.hpp"
#include "lipcert/polynomial.hpp"

namespace lipcert {

/// Typed polynomial variable. Kinds:
///   T  — input direction coordinate, one per input coordinate;
///   X  — activation coordinate (layer 0 is the input itself);
///   U  — derivative selector of a ReLU unit, binary-valued;
///   Z  — pre-activation of a ReLU unit, introduced as an affine lift;
///   S  — product lift u1_j * u2_k used by the degree-reduced two-layer form.
struct Variable {
    enum class Kind { T, X, U, Z, S };
    Kind kind;
    int layer;  ///< for S this is the first-layer unit index
    int coord;  ///< for S this is the second-layer unit index
};

class VariableTable {
public:
    int add(Variable::Kind kind, int layer, int coord);
    int find(Variable::Kind kind, int layer, int coord) const;  ///< -1 if absent
    int size() const { return static_cast<int>(vars_.size()); }
    const Variable& info(int id) const;
    std::string name(int id) const;

    /// Interval bound [lo, hi] for a variable, when known.
    void set_range(int id, double lo, double hi);
    bool has_range(int id) const;
    double lower(int id) const;
    double upper(int id) const;

private:
    std::vector<Variable> vars_;
    std::vector<double> lo_, hi_;
    std::vector<bool> has_range_;
};

struct PopConstraint {
    enum class Sense { Geq0, Eq0 };
    Polynomial poly;
    Sense sense = Sense::Geq0;
    /// Affine definitions of lifted variables; they get the strengthened
    /// linear treatment in relaxations instead of a covering subset.
    bool bad = false;
    int subset = -1;  ///< covering subset index, assigned by build_subsets
    std::string name;
};

/// Polynomial optimization problem: maximize objective subject to
/// constraints. Subsets partition-with-overlap the variables for the sparse
/// relaxations.
struct PopProblem {
    VariableTable vars;
    Polynomial objective;
    std::vector<PopConstraint> constraints;
    std::vector<std::vector<int>> subsets;
    std::vector<std::string> subset_labels;
    std::vector<std::string> warnings;

    // Metadata for network-derived problems (empty otherwise).
    std::vector<int> layer_sizes;
    int hidden_layers = 0;

    std::string to_string() const;
};

/// Builds the slope-maximization problem for one output direction c:
/// maximize t^T (prod_i A_i^T diag(u_i)) c over the region, with binary
/// selectors, sign couplings, activation complementarity and affine
/// pre-activation definitions (tagged bad).
PopProblem build_lcep(const Network& net, const InputRegion& region,
                      const Eigen::VectorXd& c);

/// Convenience overload: c is output row `label` (0-based).
PopProblem build_lcep(const Network& net, const InputRegion& region, int label);

/// Two-hidden-layer variant with product variables s_jk = u1_j u2_k so the
/// objective becomes quadratic; the product definitions are tagged bad.
/// Emits a warning when p1*p2 exceeds size_warning_cap.
PopProblem build_lifted_lcep2(const Network& net, const InputRegion& region,
                              const Eigen::VectorXd& c,
                              long size_warning_cap = 10000);
PopProblem build_lifted_lcep2(const Network& net, const InputRegion& region, int label,
                              long size_warning_cap = 10000);

/// Computes the size-2 covering subsets ({x0_a, t_a}, {x_i_j, z_i_j},
/// {u_i_j, z_i_j}, last layer {u_m_k, z_m_k}), stores them on the problem and
/// tags every non-bad constraint with a covering subset. Throws if some
/// non-bad constraint fits no subset.
void build_subsets(PopProblem& pop);

/// Running intersection property: each subset's overlap with the union of its
/// predecessors is contained in a single earlier subset.
bool verify_rip(const std::vector<std::vector<int>>& subsets);

/// Interval ranges of all pre-activations, propagated through the layers from
/// the input region; entry [i][j] bounds z_{i+1,j}.
std::vector<std::vector<std::pair<double, double>>> preactivation_ranges(
    const Network& net, const InputRegion& region);

}  // namespace lipcert
