#include "lipcert/network.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lipcert/util.hpp"

namespace lipcert {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

Eigen::VectorXd parse_vector(const json& j, const std::string& what, int expected) {
    if (!j.is_array())
        fail(what + ": expected an array of numbers");
    if (static_cast<int>(j.size()) != expected)
        fail(what + ": expected " + std::to_string(expected) + " entries, found " +
             std::to_string(j.size()));
    Eigen::VectorXd v(expected);
    for (int i = 0; i < expected; ++i) {
        if (!j[i].is_number()) fail(what + ": entry " + std::to_string(i) + " is not a number");
        v[i] = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& what, int rows, int cols) {
    if (!j.is_array())
        fail(what + ": expected an array of rows");
    if (static_cast<int>(j.size()) != rows)
        fail(what + ": expected " + std::to_string(rows) + " rows, found " +
             std::to_string(j.size()));
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        m.row(r) = parse_vector(j[r], what + ", row " + std::to_string(r), cols).transpose();
    return m;
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    os << "[";
    for (int i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << fmt_g17(v[i]);
    }
    os << "]";
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    os << "[";
    for (int r = 0; r < m.rows(); ++r) {
        if (r) os << ",";
        write_vector(os, m.row(r).transpose());
    }
    os << "]";
}

}  // namespace

InputRegion InputRegion::global_ball(double radius) {
    InputRegion r;
    r.global = true;
    r.epsilon = radius;
    return r;
}

InputRegion InputRegion::local_box(const Eigen::VectorXd& center, double eps) {
    InputRegion r;
    r.global = false;
    r.center = center;
    r.epsilon = eps;
    return r;
}

double InputRegion::center_at(int coord) const {
    if (global || center.size() == 0) return 0.0;
    if (coord < 0 || coord >= center.size())
        throw std::out_of_range("InputRegion: coordinate out of range");
    return center[coord];
}

double InputRegion::lower(int coord) const { return center_at(coord) - epsilon; }
double InputRegion::upper(int coord) const { return center_at(coord) + epsilon; }

void validate_network(const Network& net) {
    const int m = net.hidden_layers();
    if (m < 1) fail("network: needs at least one hidden layer");
    if (static_cast<int>(net.layer_sizes.size()) != m + 1)
        fail("network: layer_sizes has " + std::to_string(net.layer_sizes.size()) +
             " entries, expected " + std::to_string(m + 1));
    for (int p : net.layer_sizes)
        if (p < 1) fail("network: layer sizes must be positive");
    if (static_cast<int>(net.biases.size()) != m)
        fail("network: " + std::to_string(net.biases.size()) + " bias vectors for " +
             std::to_string(m) + " hidden layers");
    for (int i = 0; i < m; ++i) {
        const std::string layer = "hidden layer " + std::to_string(i + 1);
        if (net.weights[i].rows() != net.layer_sizes[i + 1] ||
            net.weights[i].cols() != net.layer_sizes[i])
            fail("network: " + layer + " weight matrix is " +
                 std::to_string(net.weights[i].rows()) + "x" +
                 std::to_string(net.weights[i].cols()) + ", expected " +
                 std::to_string(net.layer_sizes[i + 1]) + "x" +
                 std::to_string(net.layer_sizes[i]));
        if (net.biases[i].size() != net.layer_sizes[i + 1])
            fail("network: " + layer + " bias has " + std::to_string(net.biases[i].size()) +
                 " entries, expected " + std::to_string(net.layer_sizes[i + 1]));
    }
    if (net.output_weights.cols() != net.layer_sizes.back())
        fail("network: output weights have " + std::to_string(net.output_weights.cols()) +
             " columns, expected " + std::to_string(net.layer_sizes.back()));
    if (net.output_weights.rows() < 1) fail("network: needs at least one output row");
    if (net.output_bias.size() != 0 && net.output_bias.size() != net.output_weights.rows())
        fail("network: output bias has " + std::to_string(net.output_bias.size()) +
             " entries, expected " + std::to_string(net.output_weights.rows()));
}

ForwardTrace forward(const Network& net, const Eigen::VectorXd& x0) {
    if (x0.size() != net.input_dim())
        fail("forward: input has " + std::to_string(x0.size()) + " entries, expected " +
             std::to_string(net.input_dim()));
    ForwardTrace tr;
    tr.activations.push_back(x0);
    Eigen::VectorXd x = x0;
    for (int i = 0; i < net.hidden_layers(); ++i) {
        Eigen::VectorXd z = net.weights[i] * x + net.biases[i];
        tr.preactivations.push_back(z);
        x = z.cwiseMax(0.0);
        tr.activations.push_back(x);
    }
    tr.scores = net.output_weights * x;
    if (net.output_bias.size() == net.output_weights.rows()) tr.scores += net.output_bias;
    return tr;
}

Eigen::VectorXd gradient(const Network& net, const Eigen::VectorXd& x0, int label) {
    if (label < 0 || label >= net.num_labels())
        fail("gradient: label " + std::to_string(label) + " out of range");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(net.num_labels());
    c[label] = 1.0;
    return gradient(net, x0, c);
}

Eigen::VectorXd gradient(const Network& net, const Eigen::VectorXd& x0,
                         const Eigen::VectorXd& c) {
    if (c.size() != net.num_labels())
        fail("gradient: direction has " + std::to_string(c.size()) + " entries, expected " +
             std::to_string(net.num_labels()));
    ForwardTrace tr = forward(net, x0);
    Eigen::VectorXd v = net.output_weights.transpose() * c;
    for (int i = net.hidden_layers() - 1; i >= 0; --i) {
        const Eigen::VectorXd& z = tr.preactivations[i];
        for (int j = 0; j < v.size(); ++j)
            if (z[j] <= 0.0) v[j] = 0.0;
        v = net.weights[i].transpose() * v;
    }
    return v;
}

Network load_network(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("load_network: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        fail("load_network: '" + path + "' is not valid JSON: " + e.what());
    }
    if (!j.contains("layer_sizes")) fail("load_network: missing field 'layer_sizes'");
    if (!j.contains("weights")) fail("load_network: missing field 'weights'");
    if (!j.contains("biases")) fail("load_network: missing field 'biases'");
    if (!j.contains("output_weights")) fail("load_network: missing field 'output_weights'");

    Network net;
    for (const auto& e : j["layer_sizes"]) {
        if (!e.is_number_integer() || e.get<int>() < 1)
            fail("load_network: layer_sizes must be positive integers");
        net.layer_sizes.push_back(e.get<int>());
    }
    if (net.layer_sizes.size() < 2)
        fail("load_network: layer_sizes needs at least input and one hidden layer");
    const int m = static_cast<int>(net.layer_sizes.size()) - 1;

    const json& jw = j["weights"];
    const json& jb = j["biases"];
    if (static_cast<int>(jw.size()) != m)
        fail("load_network: " + std::to_string(jw.size()) + " weight matrices for " +
             std::to_string(m) + " hidden layers");
    if (static_cast<int>(jb.size()) != m)
        fail("load_network: " + std::to_string(jb.size()) + " bias vectors for " +
             std::to_string(m) + " hidden layers");
    for (int i = 0; i < m; ++i) {
        const std::string layer = "hidden layer " + std::to_string(i + 1);
        net.weights.push_back(parse_matrix(jw[i], "load_network: " + layer + " weights",
                                           net.layer_sizes[i + 1], net.layer_sizes[i]));
        net.biases.push_back(parse_vector(jb[i], "load_network: " + layer + " bias",
                                          net.layer_sizes[i + 1]));
    }

    const json& jc = j["output_weights"];
    if (!jc.is_array() || jc.empty()) fail("load_network: output_weights must be a nonempty array of rows");
    const int K = static_cast<int>(jc.size());
    net.output_weights =
        parse_matrix(jc, "load_network: output weights", K, net.layer_sizes.back());
    if (j.contains("output_bias"))
        net.output_bias = parse_vector(j["output_bias"], "load_network: output bias", K);
    else
        net.output_bias = Eigen::VectorXd::Zero(K);
    validate_network(net);
    return net;
}

void save_network(const Network& net, const std::string& path) {
    validate_network(net);
    std::ostringstream os;
    os << "{\"layer_sizes\":[";
    for (std::size_t i = 0; i < net.layer_sizes.size(); ++i) {
        if (i) os << ",";
        os << net.layer_sizes[i];
    }
    os << "],\"weights\":[";
    for (int i = 0; i < net.hidden_layers(); ++i) {
        if (i) os << ",";
        write_matrix(os, net.weights[i]);
    }
    os << "],\"biases\":[";
    for (int i = 0; i < net.hidden_layers(); ++i) {
        if (i) os << ",";
        write_vector(os, net.biases[i]);
    }
    os << "],\"output_weights\":";
    write_matrix(os, net.output_weights);
    os << ",\"output_bias\":";
    Eigen::VectorXd d = net.output_bias;
    if (d.size() == 0) d = Eigen::VectorXd::Zero(net.num_labels());
    write_vector(os, d);
    os << "}\n";

    std::ofstream out(path);
    if (!out) fail("save_network: cannot open '" + path + "' for writing");
    out << os.str();
    if (!out) fail("save_network: write to '" + path + "' failed");
}

Network random_network(const std::vector<int>& layer_sizes, int sparsity,
                       std::uint64_t seed) {
    if (sparsity < 1) throw std::invalid_argument("random_network: sparsity must be >= 1");
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("random_network: need input and at least one hidden layer");
    for (int p : layer_sizes)
        if (p < 1) throw std::invalid_argument("random_network: layer sizes must be positive");

    RandomStream rng(seed);
    Network net;
    net.layer_sizes = layer_sizes;
    const int m = static_cast<int>(layer_sizes.size()) - 1;
    const double scale = 1.0 / std::sqrt(static_cast<double>(sparsity));
    for (int i = 0; i < m; ++i) {
        const std::int64_t p_prev = layer_sizes[i];
        const std::int64_t p_cur = layer_sizes[i + 1];
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p_cur, p_prev);
        for (std::int64_t jrow = 0; jrow < p_cur; ++jrow)
            for (std::int64_t k = 0; k < p_prev; ++k) {
                // |jrow * p_prev / p_cur - k| <= sparsity / 2, exactly.
                const std::int64_t lhs = 2 * std::llabs(jrow * p_prev - k * p_cur);
                if (lhs <= static_cast<std::int64_t>(sparsity) * p_cur)
                    a(jrow, k) = rng.normal() * scale;
            }
        net.weights.push_back(a);
        Eigen::VectorXd b(p_cur);
        for (std::int64_t jrow = 0; jrow < p_cur; ++jrow) b[jrow] = rng.normal();
        net.biases.push_back(b);
    }
    const int pm = layer_sizes.back();
    net.output_weights.resize(1, pm);
    const double cscale = 1.0 / std::sqrt(static_cast<double>(pm));
    for (int k = 0; k < pm; ++k) net.output_weights(0, k) = rng.normal() * cscale;
    net.output_bias = Eigen::VectorXd::Zero(1);
    return net;
}

}  // namespace lipcert
