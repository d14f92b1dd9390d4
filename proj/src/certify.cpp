#include "lipcert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lipcert/pop.hpp"
#include "lipcert/sampler.hpp"

namespace lipcert {

Method method_from_string(const std::string& name) {
    if (name == "lbs") return Method::Lbs;
    if (name == "shor") return Method::Shor;
    if (name == "hr1") return Method::Hr1;
    if (name == "hr2") return Method::Hr2;
    throw std::invalid_argument("unknown method '" + name +
                                "' (expected lbs, shor, hr1 or hr2)");
}

std::string to_string(Method method) {
    switch (method) {
        case Method::Lbs: return "lbs";
        case Method::Shor: return "shor";
        case Method::Hr1: return "hr1";
        case Method::Hr2: return "hr2";
    }
    return "?";
}

CubicMode cubic_mode_from_string(const std::string& name) {
    if (name == "per_triple") return CubicMode::PerTriple;
    if (name == "aggregated") return CubicMode::Aggregated;
    if (name == "lifted") return CubicMode::Lifted;
    throw std::invalid_argument("unknown cubic mode '" + name +
                                "' (expected per_triple, aggregated or lifted)");
}

std::string to_string(CubicMode mode) {
    switch (mode) {
        case CubicMode::PerTriple: return "per_triple";
        case CubicMode::Aggregated: return "aggregated";
        case CubicMode::Lifted: return "lifted";
    }
    return "?";
}

namespace {

/// Contracts an output-space direction through the linear output layer into
/// the last-hidden-layer weights the slope problems are built from.
Eigen::VectorXd hidden_direction(const Network& net, const Eigen::VectorXd& c) {
    if (c.size() != net.num_labels())
        throw std::invalid_argument("direction has " + std::to_string(c.size()) +
                                    " entries, expected " +
                                    std::to_string(net.num_labels()));
    return net.output_weights.transpose() * c;
}

}  // namespace

Relaxation build_relaxation(const Network& net, const InputRegion& region,
                            const Eigen::VectorXd& c, const EstimateOptions& opts) {
    if (opts.method == Method::Lbs)
        throw std::invalid_argument("the sampling method has no conic relaxation");
    validate_network(net);
    const int m = net.hidden_layers();
    if (m > 2)
        throw std::runtime_error(
            "conic methods support networks with one or two hidden layers");
    const Eigen::VectorXd w = hidden_direction(net, c);
    const int order = opts.method == Method::Hr1 ? 1 : 2;
    if (m == 1) {
        PopProblem pop = build_lcep(net, region, w);
        if (opts.method == Method::Shor) return assemble_shor(pop);
        build_subsets(pop);
        return assemble_hr(pop, order);
    }
    if (opts.method == Method::Shor || opts.cubic_mode == CubicMode::Lifted) {
        PopProblem pop = build_lifted_lcep2(net, region, w);
        if (opts.method == Method::Shor) return assemble_shor(pop);
        build_subsets(pop);
        return assemble_hr_two_hidden(pop, order, CubicMode::Lifted);
    }
    PopProblem pop = build_lcep(net, region, w);
    build_subsets(pop);
    return assemble_hr_two_hidden(pop, order, opts.cubic_mode);
}

AssemblySizeEstimate estimate_problem_size(const Network& net, const InputRegion& region,
                                           const Eigen::VectorXd& c,
                                           const EstimateOptions& opts) {
    if (opts.method == Method::Lbs) return {};
    validate_network(net);
    const int m = net.hidden_layers();
    if (m > 2)
        throw std::runtime_error(
            "conic methods support networks with one or two hidden layers");
    const Eigen::VectorXd w = hidden_direction(net, c);
    const bool sparse = opts.method == Method::Hr1 || opts.method == Method::Hr2;
    const int order = opts.method == Method::Hr1 ? 1 : 2;
    if (m == 2 && (opts.method == Method::Shor || opts.cubic_mode == CubicMode::Lifted)) {
        PopProblem pop = build_lifted_lcep2(net, region, w);
        if (sparse) build_subsets(pop);
        return estimate_assembly(pop, sparse, order, CubicMode::Lifted);
    }
    PopProblem pop = build_lcep(net, region, w);
    if (sparse) build_subsets(pop);
    return estimate_assembly(pop, sparse, order,
                             m == 2 ? opts.cubic_mode : CubicMode::Lifted);
}

EstimateResult estimate_lipschitz(const Network& net, const InputRegion& region,
                                  const Eigen::VectorXd& c, const EstimateOptions& opts) {
    validate_network(net);
    if (c.size() != net.num_labels())
        throw std::invalid_argument("estimate_lipschitz: direction size mismatch");
    EstimateResult out;
    if (opts.method == Method::Lbs) {
        LbsOptions lo;
        lo.samples = opts.samples;
        lo.seed = opts.seed;
        lo.threads = opts.threads;
        const LbsResult r = lbs(net, region, c, lo);
        out.value = r.value;
        out.upper_bound = false;
        out.status = SolveStatus::Optimal;
        return out;
    }
    const Relaxation rel = build_relaxation(net, region, c, opts);
    const Solution sol = solve(rel.conic, opts.solver);
    out.value = sol.value;
    out.upper_bound = true;
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.solve_time_s = sol.solve_time_s;
    out.moment_vars = rel.n_moment_vars();
    out.psd_blocks = rel.n_psd_blocks();
    out.residuals = sol.residuals;
    return out;
}

EstimateResult estimate_lipschitz(const Network& net, const InputRegion& region,
                                  int label, const EstimateOptions& opts) {
    if (label < 0 || label >= net.num_labels())
        throw std::invalid_argument("estimate_lipschitz: label out of range");
    Eigen::VectorXd c = Eigen::VectorXd::Zero(net.num_labels());
    c[label] = 1.0;
    return estimate_lipschitz(net, region, c, opts);
}

Eigen::MatrixXd pairwise_matrix(const Network& net, const InputRegion& region,
                                const EstimateOptions& opts) {
    if (opts.method == Method::Lbs)
        throw std::invalid_argument(
            "pairwise bounds need an upper-bounding method, not sampling");
    validate_network(net);
    const int K = net.num_labels();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(K, K);
    for (int i = 0; i < K; ++i) {
        for (int j = i + 1; j < K; ++j) {
            Eigen::VectorXd c = Eigen::VectorXd::Zero(K);
            c[i] = 1.0;
            c[j] = -1.0;
            const EstimateResult r = estimate_lipschitz(net, region, c, opts);
            if (r.status != SolveStatus::Optimal && r.status != SolveStatus::NearOptimal)
                throw std::runtime_error("pairwise_matrix: labels (" + std::to_string(i) +
                                         "," + std::to_string(j) +
                                         ") ended with solver status " +
                                         to_string(r.status));
            M(i, j) = M(j, i) = std::max(0.0, r.value);
        }
    }
    return M;
}

BinaryCertificate certify_binary(const Network& net, const Eigen::VectorXd& x0,
                                 int label_a, int label_b, double radius,
                                 double lipschitz_bound) {
    validate_network(net);
    const int K = net.num_labels();
    if (label_a < 0 || label_a >= K || label_b < 0 || label_b >= K)
        throw std::invalid_argument("certify_binary: label out of range");
    if (label_a == label_b)
        throw std::invalid_argument("certify_binary: labels must differ");
    if (radius < 0.0) throw std::invalid_argument("certify_binary: negative radius");
    const Eigen::VectorXd scores = forward(net, x0).scores;
    BinaryCertificate cert;
    cert.label_a = label_a;
    cert.label_b = label_b;
    cert.margin = scores[label_a] - scores[label_b];
    cert.lipschitz = std::max(0.0, lipschitz_bound);
    cert.radius = radius;
    cert.certified = std::fabs(cert.margin) > radius * cert.lipschitz && cert.margin != 0.0;
    return cert;
}

MulticlassCertificate certify_multiclass(const Network& net, const Eigen::VectorXd& x0,
                                         double radius, const Eigen::MatrixXd& pairwise) {
    validate_network(net);
    const int K = net.num_labels();
    if (pairwise.rows() != K || pairwise.cols() != K)
        throw std::invalid_argument("certify_multiclass: pairwise matrix must be " +
                                    std::to_string(K) + "x" + std::to_string(K));
    if (radius < 0.0) throw std::invalid_argument("certify_multiclass: negative radius");
    const Eigen::VectorXd scores = forward(net, x0).scores;
    int pred = 0;
    for (int k = 1; k < K; ++k)
        if (scores[k] > scores[pred]) pred = k;

    MulticlassCertificate cert;
    cert.predicted = pred;
    cert.certified = true;
    cert.worst_slack = std::numeric_limits<double>::infinity();
    for (int j = 0; j < K; ++j) {
        if (j == pred) continue;
        const double slack =
            scores[pred] - scores[j] - radius * std::max(0.0, pairwise(pred, j));
        if (slack < cert.worst_slack) {
            cert.worst_slack = slack;
            cert.worst_rival = j;
        }
        if (slack <= 0.0) cert.certified = false;
    }
    if (K == 1) cert.worst_slack = std::numeric_limits<double>::infinity();
    return cert;
}

namespace {

Dataset dataset_from_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("load_dataset: '" + path + "' is not valid JSON: " +
                                 e.what());
    }
    const nlohmann::json* pts = nullptr;
    Dataset ds;
    if (j.is_array()) {
        pts = &j;
    } else if (j.is_object() && j.contains("points")) {
        pts = &j["points"];
        if (j.contains("labels")) {
            for (const auto& l : j["labels"]) {
                if (!l.is_number_integer())
                    throw std::runtime_error("load_dataset: labels must be integers");
                ds.labels.push_back(l.get<int>());
            }
        }
    } else {
        throw std::runtime_error("load_dataset: '" + path +
                                 "' must be an array of points or contain a 'points' field");
    }
    if (!pts->is_array() || pts->empty())
        throw std::runtime_error("load_dataset: '" + path + "' has no points");
    const int n = static_cast<int>(pts->size());
    const auto& first = (*pts)[0];
    if (!first.is_array() || first.empty())
        throw std::runtime_error("load_dataset: points must be arrays of numbers");
    const int dim = static_cast<int>(first.size());
    ds.points.resize(n, dim);
    for (int i = 0; i < n; ++i) {
        const auto& row = (*pts)[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != dim)
            throw std::runtime_error("load_dataset: point " + std::to_string(i) +
                                     " does not have " + std::to_string(dim) + " entries");
        for (int a = 0; a < dim; ++a) {
            if (!row[static_cast<std::size_t>(a)].is_number())
                throw std::runtime_error("load_dataset: point " + std::to_string(i) +
                                         " entry " + std::to_string(a) + " is not a number");
            ds.points(i, a) = row[static_cast<std::size_t>(a)].get<double>();
        }
    }
    if (!ds.labels.empty() && static_cast<int>(ds.labels.size()) != n)
        throw std::runtime_error("load_dataset: " + std::to_string(ds.labels.size()) +
                                 " labels for " + std::to_string(n) + " points");
    return ds;
}

Dataset dataset_from_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t");
            if (b == std::string::npos)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": empty cell");
            const auto e = cell.find_last_not_of(" \t");
            const std::string trimmed = cell.substr(b, e - b + 1);
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(trimmed, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != trimmed.size())
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": '" + trimmed + "' is not a number");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("load_dataset: '" + path + "' has no points");
    Dataset ds;
    ds.points.resize(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < ds.points.rows(); ++i)
        for (int a = 0; a < ds.points.cols(); ++a)
            ds.points(i, a) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
    return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
        return dataset_from_csv(path);
    return dataset_from_json(path);
}

RatioResult certified_ratio(const Network& net, const InputRegion& region,
                            const Dataset& dataset, double radius,
                            const Eigen::MatrixXd& pairwise) {
    validate_network(net);
    if (dataset.points.rows() < 1)
        throw std::invalid_argument("certified_ratio: empty dataset");
    if (dataset.points.cols() != net.input_dim())
        throw std::invalid_argument("certified_ratio: points have " +
                                    std::to_string(dataset.points.cols()) +
                                    " coordinates, network expects " +
                                    std::to_string(net.input_dim()));
    if (!dataset.labels.empty() &&
        static_cast<long>(dataset.labels.size()) != dataset.points.rows())
        throw std::invalid_argument("certified_ratio: label count mismatch");
    if (radius < 0.0) throw std::invalid_argument("certified_ratio: negative radius");

    RatioResult res;
    res.total = dataset.points.rows();
    for (long i = 0; i < res.total; ++i) {
        const Eigen::VectorXd x = dataset.points.row(i).transpose();
        bool inside = true;
        for (int a = 0; a < x.size(); ++a) {
            if (x[a] - radius < region.lower(a) || x[a] + radius > region.upper(a)) {
                inside = false;
                break;
            }
        }
        if (!inside) {
            ++res.refused;
            res.notes.push_back("point " + std::to_string(i) +
                                ": ball of radius " + std::to_string(radius) +
                                " leaves the bound region; not certified");
            continue;
        }
        const MulticlassCertificate cert = certify_multiclass(net, x, radius, pairwise);
        if (!cert.certified) continue;
        if (!dataset.labels.empty() &&
            dataset.labels[static_cast<std::size_t>(i)] != cert.predicted)
            continue;
        ++res.certified;
    }
    res.ratio = static_cast<double>(res.certified) / static_cast<double>(res.total);
    return res;
}

}  // namespace lipcert
