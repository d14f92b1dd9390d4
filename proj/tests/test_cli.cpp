#include <sys/wait.h>

#include <Eigen/Dense>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "lipcert/certify.hpp"
#include "lipcert/conic.hpp"
#include "lipcert/network.hpp"
#include "lipcert/sampler.hpp"
#include "lipcert/sdpa.hpp"

#ifndef LIPCERT_CLI_PATH
#error "LIPCERT_CLI_PATH must point at the command line binary"
#endif

namespace {

using nlohmann::json;

std::string work_dir() {
    static const std::string dir = [] {
        const std::string d = "/tmp/lipcert_cli_work";
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_text(const std::string& path, const std::string& body) {
    std::ofstream os(path);
    os << body;
}

/// Runs the binary with the given arguments; returns the exit code and
/// captures the streams.
int run_cli(const std::string& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
    const std::string out = work_dir() + "/stdout.txt";
    const std::string err = work_dir() + "/stderr.txt";
    const std::string cmd =
        std::string(LIPCERT_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
    const int raw = std::system(cmd.c_str());
    if (out_text) *out_text = slurp(out);
    if (err_text) *err_text = slurp(err);
    if (raw == -1) return -1;
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -2;
}

json run_json(const std::string& args, int expected_code) {
    std::string out;
    const int code = run_cli(args, &out);
    REQUIRE(code == expected_code);
    REQUIRE_FALSE(out.empty());
    return json::parse(out);
}

// 2-input net with an always-active hidden layer near the origin and scores
// (3, 1, 2) at zero; used for the certification commands.
std::string three_class_path() {
    lipcert::Network net;
    net.layer_sizes = {2, 2};
    net.weights.push_back(Eigen::MatrixXd::Identity(2, 2));
    Eigen::VectorXd b(2);
    b << 5.0, 5.0;
    net.biases.push_back(b);
    net.output_weights.resize(3, 2);
    net.output_weights << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
    net.output_bias.resize(3);
    net.output_bias << -2.0, -4.0, -8.0;
    const std::string path = work_dir() + "/three.json";
    lipcert::save_network(net, path);
    return path;
}

}  // namespace

TEST_CASE("gen writes a loadable network and reports its shape") {
    const std::string out = work_dir() + "/gen23.json";
    const json rep =
        run_json("gen --layers 2,3 --sparsity 2 --seed 5 --out " + out, 0);
    CHECK(rep["command"] == "gen");
    CHECK(rep["out"] == out);
    CHECK(rep["layer_sizes"] == json::array({2, 3}));
    CHECK(rep["labels"] == 1);
    CHECK(rep["seed"] == 5);

    const lipcert::Network loaded = lipcert::load_network(out);
    const lipcert::Network direct = lipcert::random_network({2, 3}, 2, 5);
    CHECK(loaded.layer_sizes == direct.layer_sizes);
    CHECK(loaded.weights[0] == direct.weights[0]);
    CHECK(loaded.biases[0] == direct.biases[0]);
    CHECK(loaded.output_weights == direct.output_weights);
}

TEST_CASE("gen rejects bad layer lists and missing outputs") {
    std::string err;
    CHECK(run_cli("gen --layers 3 --out " + work_dir() + "/x.json", nullptr, &err) == 2);
    CHECK(run_cli("gen --layers 2,3", nullptr, &err) == 2);
    CHECK(err.find("--out") != std::string::npos);
    CHECK(run_cli("gen --out " + work_dir() + "/x.json", nullptr, &err) == 2);
}

TEST_CASE("sampling estimates are deterministic and match the library") {
    const std::string net_path = work_dir() + "/net23.json";
    run_json("gen --layers 2,3 --sparsity 2 --seed 7 --out " + net_path, 0);

    const std::string args =
        "estimate --net " + net_path + " --method lbs --samples 2000 --seed 3";
    std::string out1, out2;
    REQUIRE(run_cli(args, &out1) == 0);
    REQUIRE(run_cli(args, &out2) == 0);
    CHECK(out1 == out2);  // byte-identical report on repeat runs

    const json rep = json::parse(out1);
    CHECK(rep["command"] == "estimate");
    CHECK(rep["method"] == "lbs");
    CHECK(rep["upper_bound"] == false);
    CHECK(rep["status"] == "optimal");
    CHECK(rep["samples"] == 2000);
    CHECK(rep["seed"] == 3);
    CHECK(rep["label"] == 0);
    CHECK(rep["region"]["global"] == true);
    CHECK(rep["region"]["radius"] == 10.0);

    const lipcert::Network net = lipcert::load_network(net_path);
    lipcert::LbsOptions lo;
    lo.samples = 2000;
    lo.seed = 3;
    const lipcert::LbsResult direct =
        lipcert::lbs(net, lipcert::InputRegion::global_ball(10.0), 0, lo);
    CHECK(rep["value"].get<double>() == direct.value);
}

TEST_CASE("conic estimates report certified upper bounds above the sampled lower bound") {
    const std::string net_path = work_dir() + "/net23b.json";
    run_json("gen --layers 2,3 --sparsity 2 --seed 9 --out " + net_path, 0);

    const json lower = run_json(
        "estimate --net " + net_path + " --method lbs --samples 4000 --seed 1", 0);
    const json upper = run_json("estimate --net " + net_path + " --method shor", 0);
    CHECK(upper["upper_bound"] == true);
    const std::string status = upper["status"].get<std::string>();
    CHECK((status == "optimal" || status == "near_optimal"));
    CHECK(upper["value"].get<double>() >= lower["value"].get<double>() - 1e-6);
    CHECK(upper["moment_vars"].get<long>() > 0);
    CHECK(upper["psd_blocks"].get<long>() > 0);
    CHECK(upper["iterations"].get<int>() > 0);
    CHECK(upper["residuals"]["equality_inf"].get<double>() <= 1e-5);

    // A local region around a fixed centre is echoed back.
    const json local = run_json("estimate --net " + net_path +
                                    " --method shor --center 0.5,-0.25 --eps 0.2",
                                0);
    CHECK(local["region"]["global"] == false);
    CHECK(local["region"]["eps"] == 0.2);
    CHECK(local["region"]["center"] == json::array({0.5, -0.25}));
    CHECK(local["value"].get<double>() <= upper["value"].get<double>() + 1e-6);
}

TEST_CASE("export writes the same bytes the library serializes") {
    const std::string net_path = work_dir() + "/net23c.json";
    run_json("gen --layers 2,3 --sparsity 2 --seed 4 --out " + net_path, 0);
    const std::string dat = work_dir() + "/shor.dat-s";

    const json rep =
        run_json("export --net " + net_path + " --method shor --out " + dat, 0);
    CHECK(rep["command"] == "export");
    CHECK(rep["equalities"].get<long>() > 0);

    const lipcert::Network net = lipcert::load_network(net_path);
    lipcert::EstimateOptions eo;
    eo.method = lipcert::Method::Shor;
    Eigen::VectorXd c = Eigen::VectorXd::Ones(1);
    const lipcert::Relaxation rel = lipcert::build_relaxation(
        net, lipcert::InputRegion::global_ball(10.0), c, eo);
    CHECK(slurp(dat) == lipcert::export_sdpa(rel.conic));

    // The exported file encodes a minimization of the negated objective.
    const lipcert::ConicProblem parsed = lipcert::import_sdpa(dat);
    const lipcert::Solution back = lipcert::solve(parsed, {});
    const lipcert::Solution direct = lipcert::solve(rel.conic, {});
    CHECK(back.value == doctest::Approx(-direct.value).epsilon(1e-6));
}

TEST_CASE("externally produced solution files can be checked without solving") {
    const std::string net_path = work_dir() + "/net23d.json";
    run_json("gen --layers 2,3 --sparsity 2 --seed 8 --out " + net_path, 0);

    const lipcert::Network net = lipcert::load_network(net_path);
    lipcert::EstimateOptions eo;
    eo.method = lipcert::Method::Shor;
    Eigen::VectorXd c = Eigen::VectorXd::Ones(1);
    const lipcert::Relaxation rel = lipcert::build_relaxation(
        net, lipcert::InputRegion::global_ball(10.0), c, eo);
    lipcert::Solution sol = lipcert::solve(rel.conic, {});
    REQUIRE(sol.status == lipcert::SolveStatus::Optimal);

    const std::string sol_path = work_dir() + "/shor.sol";
    lipcert::write_solution(sol, sol_path);
    const json rep = run_json("estimate --net " + net_path +
                                  " --method shor --solution " + sol_path,
                              0);
    CHECK(rep["solution_file"] == sol_path);
    CHECK(rep["value"].get<double>() == doctest::Approx(sol.value).epsilon(1e-9));
    CHECK(rep["status"] == "optimal");

    // A solution whose stored status is not a success exits with code 3.
    sol.status = lipcert::SolveStatus::Infeasible;
    lipcert::write_solution(sol, sol_path);
    CHECK(run_cli("estimate --net " + net_path + " --method shor --solution " +
                  sol_path) == 3);

    // A solution sized for a different relaxation is a usage error.
    sol.status = lipcert::SolveStatus::Optimal;
    lipcert::write_solution(sol, sol_path);
    std::string err;
    CHECK(run_cli("estimate --net " + net_path + " --method hr2 --solution " +
                      sol_path,
                  nullptr, &err) == 2);
    CHECK(err.find("variables") != std::string::npos);
}

TEST_CASE("config files fill unset options and the command line wins") {
    const std::string net_path = work_dir() + "/net23e.json";
    run_json("gen --layers 2,3 --sparsity 2 --seed 2 --out " + net_path, 0);

    const std::string cfg = work_dir() + "/cfg.json";
    write_text(cfg, R"({"method": "lbs", "samples": 640, "seed": 9})");

    const json from_cfg =
        run_json("estimate --net " + net_path + " --config " + cfg, 0);
    CHECK(from_cfg["method"] == "lbs");
    CHECK(from_cfg["samples"] == 640);
    CHECK(from_cfg["seed"] == 9);

    const json mixed = run_json(
        "estimate --net " + net_path + " --config " + cfg + " --seed 3", 0);
    CHECK(mixed["samples"] == 640);  // config still fills what was not given
    CHECK(mixed["seed"] == 3);       // explicit flag beats the config value

    const json net_from_cfg = [&] {
        const std::string cfg2 = work_dir() + "/cfg2.json";
        write_text(cfg2, R"({"net": ")" + net_path + R"(", "method": "lbs"})");
        return run_json("estimate --config " + cfg2, 0);
    }();
    CHECK(net_from_cfg["net"] == net_path);
}

TEST_CASE("config files reject unknown, inapplicable and mistyped keys") {
    const std::string net_path = work_dir() + "/net23f.json";
    run_json("gen --layers 2,3 --sparsity 2 --seed 2 --out " + net_path, 0);
    std::string err;

    const std::string bad_key = work_dir() + "/bad_key.json";
    write_text(bad_key, R"({"methd": "lbs"})");
    CHECK(run_cli("estimate --net " + net_path + " --config " + bad_key, nullptr,
                  &err) == 2);
    CHECK(err.find("unknown key") != std::string::npos);

    const std::string inapplicable = work_dir() + "/inapplicable.json";
    write_text(inapplicable, R"({"layers": "2,3"})");
    CHECK(run_cli("estimate --net " + net_path + " --config " + inapplicable,
                  nullptr, &err) == 2);
    CHECK(err.find("does not apply") != std::string::npos);

    const std::string mistyped = work_dir() + "/mistyped.json";
    write_text(mistyped, R"({"samples": "many"})");
    CHECK(run_cli("estimate --net " + net_path + " --config " + mistyped, nullptr,
                  &err) == 2);
    CHECK(err.find("wrong type") != std::string::npos);

    const std::string not_json = work_dir() + "/not_json.json";
    write_text(not_json, "{nope");
    CHECK(run_cli("estimate --net " + net_path + " --config " + not_json, nullptr,
                  &err) == 2);
    CHECK(run_cli("estimate --net " + net_path + " --config " + work_dir() +
                      "/missing_cfg.json",
                  nullptr, &err) == 2);
}

TEST_CASE("usage errors exit with code 2") {
    const std::string net_path = work_dir() + "/net23g.json";
    run_json("gen --layers 2,3 --sparsity 2 --seed 2 --out " + net_path, 0);

    CHECK(run_cli("") == 2);                      // a subcommand is required
    CHECK(run_cli("frobnicate") == 2);            // unknown subcommand
    CHECK(run_cli("estimate") == 2);              // --net is required
    CHECK(run_cli("estimate --net " + net_path + " --method simplex") == 2);
    CHECK(run_cli("estimate --net /tmp/lipcert_missing_net.json") == 2);
    CHECK(run_cli("estimate --net " + net_path + " --label 5 --method lbs") == 2);
    CHECK(run_cli("estimate --net " + net_path + " --diff 0,0 --method shor") == 2);
    CHECK(run_cli("estimate --net " + net_path + " --center 1 --method shor") == 2);
    CHECK(run_cli("export --net " + net_path + " --method lbs --out /tmp/x.dat-s") == 2);
    CHECK(run_cli("certify --net " + net_path) == 2);  // needs --point or --dataset
}

TEST_CASE("certification refusals and failures use distinct exit codes") {
    const std::string net_path = three_class_path();

    // Certifiable point well inside the region.
    const json good = run_json("certify --net " + net_path +
                                   " --method shor --point 0,0 --eps 0.1",
                               0);
    CHECK(good["command"] == "certify");
    CHECK(good["certified"] == true);
    CHECK(good["predicted"] == 0);
    CHECK(good["worst_slack"].get<double>() > 0.0);
    REQUIRE(good["pairwise"].is_array());
    CHECK(good["pairwise"].size() == 3);

    // Ball pokes out of the default radius-10 box: refusal, exit 3.
    std::string err;
    CHECK(run_cli("certify --net " + net_path +
                      " --method shor --point 9.95,0 --eps 0.1",
                  nullptr, &err) == 3);
    CHECK(err.find("leaves the bound region") != std::string::npos);

    // Expected label disagrees with the prediction: exit 4.
    std::string out;
    CHECK(run_cli("certify --net " + net_path +
                      " --method shor --point 0,0 --eps 0.1 --expected-label 1",
                  &out) == 4);
    const json wrong = json::parse(out);
    CHECK(wrong["correct"] == false);
    CHECK(wrong["expected_label"] == 1);

    // Radius too large to certify: exit 4 with certified=false.
    CHECK(run_cli("certify --net " + net_path +
                      " --method shor --point 0,0 --eps 2.0",
                  &out) == 4);
    CHECK(json::parse(out)["certified"] == false);

    // The sampling method cannot certify.
    CHECK(run_cli("certify --net " + net_path + " --method lbs --point 0,0") == 2);
}

TEST_CASE("certifying a dataset reports the certified ratio") {
    const std::string net_path = three_class_path();
    const std::string data = work_dir() + "/points.json";
    write_text(data, R"({"points": [[0, 0], [0.5, 0.5]], "labels": [0, 0]})");

    const json rep = run_json("certify --net " + net_path + " --method shor --eps 0.1 " +
                                  "--dataset " + data,
                              0);
    CHECK(rep["total"] == 2);
    CHECK(rep["refused"] == 0);
    CHECK(rep["certified"] == 2);
    CHECK(rep["ratio"].get<double>() == doctest::Approx(1.0));

    // A wrong label drops that point from the certified count.
    write_text(data, R"({"points": [[0, 0], [0.5, 0.5]], "labels": [0, 1]})");
    const json rel = run_json("certify --net " + net_path + " --method shor --eps 0.1 " +
                                  "--dataset " + data,
                              0);
    CHECK(rel["certified"] == 1);
    CHECK(rel["ratio"].get<double>() == doctest::Approx(0.5));

    // Unreadable dataset paths are usage errors.
    CHECK(run_cli("certify --net " + net_path + " --method shor --eps 0.1 " +
                  "--dataset /tmp/lipcert_missing_data.json") == 2);
}
