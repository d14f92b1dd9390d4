#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace lipcert {

/// Feedforward ReLU network: hidden layers x_i = relu(A_i x_{i-1} + b_i) for
/// i = 1..m followed by a linear output layer y = C x_m + d. The output bias d
/// is stored for completeness but plays no role in slope computations.
struct Network {
    std::vector<int> layer_sizes;          ///< [p_0, p_1, ..., p_m]
    std::vector<Eigen::MatrixXd> weights;  ///< A_i of shape p_i x p_{i-1}
    std::vector<Eigen::VectorXd> biases;   ///< b_i of length p_i
    Eigen::MatrixXd output_weights;        ///< C of shape K x p_m
    Eigen::VectorXd output_bias;           ///< d of length K (may be zero)

    int hidden_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_sizes.front(); }
    int num_labels() const { return static_cast<int>(output_weights.rows()); }
};

/// Axis-aligned input region. The unrestricted ("global") case is represented
/// as a box of radius 10 centred at the origin; local regions are
/// infinity-norm balls of radius epsilon around a given centre.
struct InputRegion {
    bool global = true;
    Eigen::VectorXd center;  ///< empty for the global case (treated as 0)
    double epsilon = 10.0;   ///< box half-width

    static InputRegion global_ball(double radius = 10.0);
    static InputRegion local_box(const Eigen::VectorXd& center, double eps);

    double lower(int coord) const;
    double upper(int coord) const;
    /// Centre coordinate (0 for the global case).
    double center_at(int coord) const;
};

/// Result of a forward pass: all activations, pre-activations and scores.
struct ForwardTrace {
    std::vector<Eigen::VectorXd> activations;      ///< x_0, ..., x_m
    std::vector<Eigen::VectorXd> preactivations;   ///< z_1, ..., z_m
    Eigen::VectorXd scores;                        ///< y = C x_m + d
};

/// Throws std::runtime_error naming the offending layer if shapes are
/// inconsistent.
void validate_network(const Network& net);

ForwardTrace forward(const Network& net, const Eigen::VectorXd& x0);

/// Gradient of score k with respect to the input at x0. At exact zero
/// pre-activations the derivative is taken as 0.
Eigen::VectorXd gradient(const Network& net, const Eigen::VectorXd& x0, int label);

/// Gradient of the scalar c . f(x) with respect to the input at x0.
Eigen::VectorXd gradient(const Network& net, const Eigen::VectorXd& x0,
                         const Eigen::VectorXd& c);

/// Loads a network from JSON; errors name the offending layer or field.
Network load_network(const std::string& path);

/// Saves a network as single-line JSON with 17 significant digits per number,
/// so save/load round-trips are lossless and byte-stable.
void save_network(const Network& net, const std::string& path);

/// Deterministic banded random network with scalar output. Entry (j,k) of
/// hidden weight i is nonzero only if |j*p_{i-1}/p_i - k| <= s/2 (0-based
/// indices, exact integer arithmetic); nonzero entries are N(0,1)/sqrt(s),
/// biases N(0,1), and the dense output row is N(0,1)/sqrt(p_m).
Network random_network(const std::vector<int>& layer_sizes, int sparsity,
                       std::uint64_t seed);

}  // namespace lipcert
