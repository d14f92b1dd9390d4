#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lipcert/certify.hpp"
#include "lipcert/conic.hpp"
#include "lipcert/network.hpp"
#include "lipcert/relaxation.hpp"
#include "lipcert/sampler.hpp"
#include "lipcert/sdpa.hpp"

namespace {

using nlohmann::json;

constexpr long kMaxMomentVars = 5'000'000;
constexpr long kMaxPsdBlocks = 100'000;

/// Refusals that are neither usage errors nor certification outcomes
/// (resource guard, solver breakdown); they map to exit code 3.
struct RunFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        const std::string tok = s.substr(pos, comma - pos);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || tok.empty())
            throw std::invalid_argument(what + ": '" + tok + "' is not a number");
        out.push_back(v);
        pos = comma + 1;
        if (comma == s.size()) break;
    }
    if (out.empty()) throw std::invalid_argument(what + ": empty list");
    return out;
}

std::vector<int> parse_ints(const std::string& s, const std::string& what) {
    std::vector<int> out;
    for (double v : parse_doubles(s, what)) {
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw std::invalid_argument(what + ": expected integers");
        out.push_back(i);
    }
    return out;
}

struct Options {
    std::string config;
    std::string net_path;
    std::string out_path;
    std::string method = "hr2";
    std::string cubic_mode = "per_triple";
    int label = 0;
    std::string diff;
    std::string center;
    double eps = 0.1;
    double radius = 10.0;
    long samples = 10000;
    std::uint64_t seed = 0;
    int threads = 0;
    int max_iter = 200;
    double time_limit = 0.0;  ///< seconds; 0 = unlimited
    double tol = 1e-8;
    bool force = false;
    bool verbose = false;
    std::string layers;
    int sparsity = 1;
    std::string dataset;
    std::string point;
    int expected_label = -1;
    std::string solution;
};

void log_line(const Options& opt, const std::string& msg) {
    if (opt.verbose) std::cerr << "lipcert: " << msg << "\n";
}

/// Values from --config fill in every option the command line did not set
/// explicitly (command line wins). Unknown keys are errors.
void apply_config(CLI::App* sub, Options& opt) {
    if (opt.config.empty()) return;
    std::ifstream is(opt.config);
    if (!is) throw std::invalid_argument("config: cannot open '" + opt.config + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config: '" + opt.config + "' is not valid JSON: " +
                                    e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");

    auto set_if_unset = [&](const char* flag, auto& target) {
        const std::string key = std::string(flag).substr(2);
        if (!j.contains(key)) return;
        const CLI::Option* o = sub->get_option_no_throw(flag);
        if (o != nullptr && o->count() > 0) return;  // explicit flag wins
        try {
            j.at(key).get_to(target);
        } catch (const json::exception&) {
            throw std::invalid_argument("config: key '" + key + "' has the wrong type");
        }
    };

    static const std::vector<std::string> known = {
        "net",     "out",     "method",  "cubic-mode", "label",   "diff",
        "center",  "eps",     "radius",  "samples",    "seed",    "threads",
        "max-iter", "time-limit", "tol", "force",      "verbose", "layers",
        "sparsity", "dataset", "point",  "expected-label", "solution"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
        if (sub->get_option_no_throw("--" + key) == nullptr)
            throw std::invalid_argument("config: key '" + key +
                                        "' does not apply to this command");
    }

    set_if_unset("--net", opt.net_path);
    set_if_unset("--out", opt.out_path);
    set_if_unset("--method", opt.method);
    set_if_unset("--cubic-mode", opt.cubic_mode);
    set_if_unset("--label", opt.label);
    set_if_unset("--diff", opt.diff);
    set_if_unset("--center", opt.center);
    set_if_unset("--eps", opt.eps);
    set_if_unset("--radius", opt.radius);
    set_if_unset("--samples", opt.samples);
    set_if_unset("--seed", opt.seed);
    set_if_unset("--threads", opt.threads);
    set_if_unset("--max-iter", opt.max_iter);
    set_if_unset("--time-limit", opt.time_limit);
    set_if_unset("--tol", opt.tol);
    set_if_unset("--force", opt.force);
    set_if_unset("--verbose", opt.verbose);
    set_if_unset("--layers", opt.layers);
    set_if_unset("--sparsity", opt.sparsity);
    set_if_unset("--dataset", opt.dataset);
    set_if_unset("--point", opt.point);
    set_if_unset("--expected-label", opt.expected_label);
    set_if_unset("--solution", opt.solution);
}

lipcert::EstimateOptions estimate_options(const Options& opt) {
    lipcert::EstimateOptions eo;
    eo.method = lipcert::method_from_string(opt.method);
    eo.cubic_mode = lipcert::cubic_mode_from_string(opt.cubic_mode);
    eo.samples = opt.samples;
    eo.seed = opt.seed;
    eo.threads = opt.threads;
    eo.solver.feas_tol = opt.tol;
    eo.solver.gap_tol = opt.tol;
    eo.solver.max_iter = opt.max_iter;
    eo.solver.time_limit_s = opt.time_limit > 0.0
                                 ? opt.time_limit
                                 : std::numeric_limits<double>::infinity();
    eo.solver.verbose = opt.verbose;
    return eo;
}

lipcert::InputRegion make_region(const Options& opt, const lipcert::Network& net) {
    if (opt.center.empty()) return lipcert::InputRegion::global_ball(opt.radius);
    const std::vector<double> c = parse_doubles(opt.center, "--center");
    if (static_cast<int>(c.size()) != net.input_dim())
        throw std::invalid_argument("--center: expected " + std::to_string(net.input_dim()) +
                                    " coordinates, got " + std::to_string(c.size()));
    Eigen::VectorXd v(net.input_dim());
    for (int i = 0; i < net.input_dim(); ++i) v[i] = c[static_cast<std::size_t>(i)];
    return lipcert::InputRegion::local_box(v, opt.eps);
}

Eigen::VectorXd make_direction(const Options& opt, const lipcert::Network& net) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(net.num_labels());
    if (!opt.diff.empty()) {
        const std::vector<int> pair = parse_ints(opt.diff, "--diff");
        if (pair.size() != 2) throw std::invalid_argument("--diff: expected two labels");
        for (int l : pair)
            if (l < 0 || l >= net.num_labels())
                throw std::invalid_argument("--diff: label out of range");
        if (pair[0] == pair[1]) throw std::invalid_argument("--diff: labels must differ");
        c[pair[0]] = 1.0;
        c[pair[1]] = -1.0;
        return c;
    }
    if (opt.label < 0 || opt.label >= net.num_labels())
        throw std::invalid_argument("--label: out of range for this network");
    c[opt.label] = 1.0;
    return c;
}

void resource_guard(const lipcert::Network& net, const lipcert::InputRegion& region,
                    const Eigen::VectorXd& c, const lipcert::EstimateOptions& eo,
                    const Options& opt) {
    if (eo.method == lipcert::Method::Lbs) return;
    const lipcert::AssemblySizeEstimate est =
        lipcert::estimate_problem_size(net, region, c, eo);
    if (est.moment_vars > kMaxMomentVars || est.psd_blocks > kMaxPsdBlocks) {
        if (opt.force) {
            log_line(opt, "resource guard overridden by --force (approx. " +
                              std::to_string(est.moment_vars) + " moment variables, " +
                              std::to_string(est.psd_blocks) + " blocks)");
            return;
        }
        throw RunFailure("refusing to assemble: approx. " +
                         std::to_string(est.moment_vars) + " moment variables and " +
                         std::to_string(est.psd_blocks) +
                         " matrix blocks exceed the built-in limits (" +
                         std::to_string(kMaxMomentVars) + " / " +
                         std::to_string(kMaxPsdBlocks) + "); pass --force to override");
    }
}

json region_json(const lipcert::InputRegion& region) {
    json r;
    r["global"] = region.global;
    if (region.global) {
        r["radius"] = region.epsilon;
    } else {
        r["eps"] = region.epsilon;
        std::vector<double> c(region.center.data(),
                              region.center.data() + region.center.size());
        r["center"] = c;
    }
    return r;
}

json residuals_json(const lipcert::ConicResiduals& res) {
    return json{{"equality_inf", res.equality_inf},
                {"inequality_inf", res.inequality_inf},
                {"psd_min_eig", res.psd_min_eig}};
}

void emit(const json& report) { std::cout << report.dump() << std::endl; }

int run_gen(const Options& opt) {
    if (opt.layers.empty()) throw std::invalid_argument("gen: --layers is required");
    if (opt.out_path.empty()) throw std::invalid_argument("gen: --out is required");
    const std::vector<int> sizes = parse_ints(opt.layers, "--layers");
    const lipcert::Network net = lipcert::random_network(sizes, opt.sparsity, opt.seed);
    lipcert::save_network(net, opt.out_path);
    json report;
    report["command"] = "gen";
    report["out"] = opt.out_path;
    report["layer_sizes"] = sizes;
    report["labels"] = net.num_labels();
    report["sparsity"] = opt.sparsity;
    report["seed"] = opt.seed;
    emit(report);
    return 0;
}

int run_estimate(const Options& opt) {
    if (opt.net_path.empty()) throw std::invalid_argument("estimate: --net is required");
    const lipcert::Network net = lipcert::load_network(opt.net_path);
    const lipcert::InputRegion region = make_region(opt, net);
    const Eigen::VectorXd c = make_direction(opt, net);
    const lipcert::EstimateOptions eo = estimate_options(opt);

    json report;
    report["command"] = "estimate";
    report["net"] = opt.net_path;
    report["method"] = opt.method;
    if (net.hidden_layers() == 2 && eo.method != lipcert::Method::Lbs &&
        eo.method != lipcert::Method::Shor)
        report["cubic_mode"] = opt.cubic_mode;
    if (!opt.diff.empty())
        report["diff"] = opt.diff;
    else
        report["label"] = opt.label;
    report["region"] = region_json(region);

    if (!opt.solution.empty()) {
        if (eo.method == lipcert::Method::Lbs)
            throw std::invalid_argument("estimate: --solution needs a conic method");
        log_line(opt, "assembling relaxation for solution check");
        const lipcert::Relaxation rel = lipcert::build_relaxation(net, region, c, eo);
        const lipcert::Solution sol = lipcert::import_solution(opt.solution, rel.conic);
        report["solution_file"] = opt.solution;
        report["value"] = sol.value;
        report["upper_bound"] = true;
        report["status"] = lipcert::to_string(sol.status);
        report["moment_vars"] = rel.n_moment_vars();
        report["psd_blocks"] = rel.n_psd_blocks();
        report["residuals"] = residuals_json(sol.residuals);
        emit(report);
        return sol.status == lipcert::SolveStatus::Optimal ||
                       sol.status == lipcert::SolveStatus::NearOptimal
                   ? 0
                   : 3;
    }

    resource_guard(net, region, c, eo, opt);
    log_line(opt, "estimating with method " + opt.method);
    const lipcert::EstimateResult res = lipcert::estimate_lipschitz(net, region, c, eo);
    report["value"] = res.value;
    report["upper_bound"] = res.upper_bound;
    report["status"] = lipcert::to_string(res.status);
    if (eo.method == lipcert::Method::Lbs) {
        report["samples"] = opt.samples;
        report["seed"] = opt.seed;
    } else {
        report["iterations"] = res.iterations;
        report["solve_time_s"] = res.solve_time_s;
        report["moment_vars"] = res.moment_vars;
        report["psd_blocks"] = res.psd_blocks;
        report["residuals"] = residuals_json(res.residuals);
    }
    emit(report);
    const bool ok = !res.upper_bound || res.status == lipcert::SolveStatus::Optimal ||
                    res.status == lipcert::SolveStatus::NearOptimal;
    return ok ? 0 : 3;
}

int run_export(const Options& opt) {
    if (opt.net_path.empty()) throw std::invalid_argument("export: --net is required");
    if (opt.out_path.empty()) throw std::invalid_argument("export: --out is required");
    const lipcert::Network net = lipcert::load_network(opt.net_path);
    const lipcert::InputRegion region = make_region(opt, net);
    const Eigen::VectorXd c = make_direction(opt, net);
    lipcert::EstimateOptions eo = estimate_options(opt);
    if (eo.method == lipcert::Method::Lbs)
        throw std::invalid_argument("export: the sampling method has no conic form");
    resource_guard(net, region, c, eo, opt);
    log_line(opt, "assembling relaxation for export");
    const lipcert::Relaxation rel = lipcert::build_relaxation(net, region, c, eo);
    lipcert::write_sdpa(rel.conic, opt.out_path);
    json report;
    report["command"] = "export";
    report["net"] = opt.net_path;
    report["out"] = opt.out_path;
    report["method"] = opt.method;
    report["moment_vars"] = rel.n_moment_vars();
    report["psd_blocks"] = rel.n_psd_blocks();
    report["equalities"] = rel.conic.equalities.size();
    report["inequalities"] = rel.conic.inequalities.size();
    emit(report);
    return 0;
}

int run_certify(const Options& opt) {
    if (opt.net_path.empty()) throw std::invalid_argument("certify: --net is required");
    if (opt.dataset.empty() == opt.point.empty())
        throw std::invalid_argument("certify: give exactly one of --dataset or --point");
    const lipcert::Network net = lipcert::load_network(opt.net_path);
    const lipcert::InputRegion region = lipcert::InputRegion::global_ball(opt.radius);
    lipcert::EstimateOptions eo = estimate_options(opt);
    if (eo.method == lipcert::Method::Lbs)
        throw std::invalid_argument(
            "certify: sampling gives lower bounds and cannot certify; use a conic method");
    if (net.num_labels() >= 2) {
        Eigen::VectorXd probe = Eigen::VectorXd::Zero(net.num_labels());
        probe[0] = 1.0;
        probe[1] = -1.0;
        resource_guard(net, region, probe, eo, opt);
    }
    log_line(opt, "computing pairwise bounds (" +
                      std::to_string(net.num_labels() * (net.num_labels() - 1) / 2) +
                      " relaxations)");
    Eigen::MatrixXd pairwise;
    try {
        pairwise = lipcert::pairwise_matrix(net, region, eo);
    } catch (const std::runtime_error& e) {
        throw RunFailure(e.what());
    }
    json pw = json::array();
    for (int i = 0; i < pairwise.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < pairwise.cols(); ++j) row.push_back(pairwise(i, j));
        pw.push_back(row);
    }

    json report;
    report["command"] = "certify";
    report["net"] = opt.net_path;
    report["method"] = opt.method;
    report["eps"] = opt.eps;
    report["region"] = region_json(region);
    report["pairwise"] = pw;

    if (!opt.point.empty()) {
        const std::vector<double> coords = parse_doubles(opt.point, "--point");
        if (static_cast<int>(coords.size()) != net.input_dim())
            throw std::invalid_argument("--point: expected " +
                                        std::to_string(net.input_dim()) + " coordinates");
        Eigen::VectorXd x(net.input_dim());
        for (int i = 0; i < net.input_dim(); ++i) x[i] = coords[static_cast<std::size_t>(i)];
        for (int a = 0; a < x.size(); ++a)
            if (x[a] - opt.eps < region.lower(a) || x[a] + opt.eps > region.upper(a))
                throw RunFailure(
                    "certify: the ball around --point leaves the bound region; "
                    "increase --radius");
        const lipcert::MulticlassCertificate cert =
            lipcert::certify_multiclass(net, x, opt.eps, pairwise);
        report["certified"] = cert.certified;
        report["predicted"] = cert.predicted;
        report["worst_slack"] = cert.worst_slack;
        if (cert.worst_rival >= 0) report["worst_rival"] = cert.worst_rival;
        if (opt.expected_label >= 0) {
            report["expected_label"] = opt.expected_label;
            report["correct"] = cert.predicted == opt.expected_label;
        }
        emit(report);
        const bool ok = cert.certified &&
                        (opt.expected_label < 0 || cert.predicted == opt.expected_label);
        return ok ? 0 : 4;
    }

    const lipcert::Dataset ds = lipcert::load_dataset(opt.dataset);
    const lipcert::RatioResult ratio =
        lipcert::certified_ratio(net, region, ds, opt.eps, pairwise);
    for (const std::string& note : ratio.notes) log_line(opt, note);
    report["dataset"] = opt.dataset;
    report["total"] = ratio.total;
    report["certified"] = ratio.certified;
    report["refused"] = ratio.refused;
    report["ratio"] = ratio.ratio;
    emit(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"certified Lipschitz bounds for ReLU networks"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON file with option defaults");
        sub->add_flag("--verbose", opt.verbose, "log progress to stderr");
    };
    auto add_problem = [&](CLI::App* sub) {
        sub->add_option("--net", opt.net_path, "network JSON file");
        sub->add_option("--method", opt.method, "lbs, shor, hr1 or hr2");
        sub->add_option("--cubic-mode", opt.cubic_mode,
                        "per_triple, aggregated or lifted (two hidden layers)");
        sub->add_option("--label", opt.label, "score to bound (default 0)");
        sub->add_option("--diff", opt.diff, "bound the difference of two scores: i,j");
        sub->add_option("--radius", opt.radius, "half-width of the global input box");
        sub->add_option("--threads", opt.threads, "worker threads (0: LIPCERT_THREADS)");
        sub->add_option("--max-iter", opt.max_iter, "interior-point iteration limit");
        sub->add_option("--time-limit", opt.time_limit, "solve time limit in seconds");
        sub->add_option("--tol", opt.tol, "solver feasibility/gap tolerance");
        sub->add_flag("--force", opt.force, "override the problem-size guard");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a banded random network");
    add_common(gen);
    gen->add_option("--layers", opt.layers, "comma-separated layer sizes, input first");
    gen->add_option("--sparsity", opt.sparsity, "band width of hidden weights");
    gen->add_option("--seed", opt.seed, "generator seed");
    gen->add_option("--out", opt.out_path, "output network JSON path");

    CLI::App* est = app.add_subcommand("estimate", "bound the largest slope");
    add_common(est);
    add_problem(est);
    est->add_option("--center", opt.center, "local region centre (comma-separated)");
    est->add_option("--eps", opt.eps, "local region half-width");
    est->add_option("--samples", opt.samples, "sample count for the lbs method");
    est->add_option("--seed", opt.seed, "sample seed for the lbs method");
    est->add_option("--solution", opt.solution,
                    "check an externally produced solution file instead of solving");

    CLI::App* exp = app.add_subcommand("export", "write the relaxation in SDPA format");
    add_common(exp);
    add_problem(exp);
    exp->add_option("--center", opt.center, "local region centre (comma-separated)");
    exp->add_option("--eps", opt.eps, "local region half-width");
    exp->add_option("--out", opt.out_path, "output .dat-s path");

    CLI::App* cert = app.add_subcommand("certify", "certify label stability");
    add_common(cert);
    add_problem(cert);
    cert->add_option("--eps", opt.eps, "perturbation radius to certify");
    cert->add_option("--dataset", opt.dataset, "points to certify (JSON or CSV)");
    cert->add_option("--point", opt.point, "single point (comma-separated)");
    cert->add_option("--expected-label", opt.expected_label,
                     "require this prediction for success");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "lipcert: " << e.what() << "\n";
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        apply_config(sub, opt);
        if (sub == gen) return run_gen(opt);
        if (sub == est) return run_estimate(opt);
        if (sub == exp) return run_export(opt);
        return run_certify(opt);
    } catch (const RunFailure& e) {
        std::cerr << "lipcert: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "lipcert: " << e.what() << "\n";
        return 2;
    }
}
