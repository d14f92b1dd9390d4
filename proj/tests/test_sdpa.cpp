#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "lipcert/conic.hpp"
#include "lipcert/network.hpp"
#include "lipcert/pop.hpp"
#include "lipcert/relaxation.hpp"
#include "lipcert/sdpa.hpp"

using lipcert::ConicBlock;
using lipcert::ConicProblem;
using lipcert::ConicRow;
using lipcert::Solution;
using lipcert::SolveStatus;

namespace {

ConicProblem correlation_problem() {
    ConicProblem p;
    p.n_y = 1;
    p.maximize = true;
    p.objective = {{0, 1.0}};
    ConicBlock b;
    b.dim = 2;
    b.label = "corr";
    b.entries.push_back({0, 0, 1.0, {}});
    b.entries.push_back({0, 1, 0.0, {{0, 1.0}}});
    b.entries.push_back({1, 1, 1.0, {}});
    p.blocks.push_back(b);
    return p;
}

ConicProblem mixed_problem() {
    ConicProblem p = correlation_problem();
    p.n_y = 2;
    p.objective.push_back({1, -0.25});
    p.equalities.push_back({{{1, 1.0}, {0, 0.5}}, 0.75, "tie"});
    p.inequalities.push_back({{{1, 1.0}}, 2.0, "cap"});
    return p;
}

ConicProblem lcep_shor() {
    const lipcert::Network net = lipcert::random_network({2, 3}, 2, 7);
    return lipcert::assemble_shor(
               lipcert::build_lcep(net, lipcert::InputRegion::global_ball(10.0), 0))
        .conic;
}

ConicProblem lcep_hr2() {
    const lipcert::Network net = lipcert::random_network({2, 3}, 2, 7);
    lipcert::PopProblem pop =
        lipcert::build_lcep(net, lipcert::InputRegion::global_ball(10.0), 0);
    lipcert::build_subsets(pop);
    return lipcert::assemble_hr(pop, 2).conic;
}

std::string temp_path(const char* name) {
    return std::string(::getenv("TMPDIR") ? ::getenv("TMPDIR") : "/tmp") + "/" + name;
}

bool solved(const Solution& s) {
    return s.status == SolveStatus::Optimal || s.status == SolveStatus::NearOptimal;
}

}  // namespace

TEST_CASE("export, parse and re-export are byte-stable") {
    for (const ConicProblem& p :
         {correlation_problem(), mixed_problem(), lcep_shor(), lcep_hr2()}) {
        const std::string text = lipcert::export_sdpa(p);
        const ConicProblem back = lipcert::parse_sdpa(text, "roundtrip");
        CHECK(lipcert::export_sdpa(back) == text);
    }
}

TEST_CASE("exported file encodes the negated maximization objective") {
    const ConicProblem orig = correlation_problem();
    const Solution s_orig = lipcert::solve(orig, {});
    REQUIRE(solved(s_orig));
    const ConicProblem parsed = lipcert::parse_sdpa(lipcert::export_sdpa(orig), "t");
    CHECK_FALSE(parsed.maximize);
    const Solution s_back = lipcert::solve(parsed, {});
    REQUIRE(solved(s_back));
    CHECK(s_back.value == doctest::Approx(-s_orig.value).epsilon(1e-6));
}

TEST_CASE("parsed problems keep the feasible set of the original") {
    const ConicProblem orig = mixed_problem();
    const Solution s_orig = lipcert::solve(orig, {});
    REQUIRE(solved(s_orig));
    const ConicProblem parsed = lipcert::parse_sdpa(lipcert::export_sdpa(orig), "t");
    // Equalities come back as paired one-sided slots; the optimum is unchanged.
    CHECK(parsed.equalities.empty());
    const Solution s_back = lipcert::solve(parsed, {});
    REQUIRE(solved(s_back));
    CHECK(s_back.value == doctest::Approx(-s_orig.value).epsilon(1e-5));
}

TEST_CASE("files round-trip through disk") {
    const ConicProblem p = mixed_problem();
    const std::string path = temp_path("lipcert_rt.dat-s");
    lipcert::write_sdpa(p, path);
    const ConicProblem back = lipcert::import_sdpa(path);
    CHECK(lipcert::export_sdpa(back) == lipcert::export_sdpa(p));
    std::remove(path.c_str());
    CHECK_THROWS_AS(lipcert::import_sdpa("/nonexistent/problem.dat-s"),
                    std::runtime_error);
}

TEST_CASE("foreign formatting quirks are tolerated") {
    // Comments, braces, commas, parentheses, blank lines, out-of-order entries.
    const std::string text =
        "* hand-written test problem\n"
        "\" another comment style\n"
        "2\n"
        "2\n"
        "{2, -1}\n"
        "(1.0, 0.0)\n"
        "\n"
        "2 1 1 1 1.0\n"
        "0 1 1 1 -1.0\n"
        "1 1 1 2 1.0\n"
        "0 2 1 1 -2.0\n"
        "1 2 1 1 -1.0\n";
    const ConicProblem p = lipcert::parse_sdpa(text, "foreign");
    CHECK(p.n_y == 2);
    CHECK(p.blocks.size() == 1);
    CHECK(p.blocks[0].dim == 2);
    CHECK(p.inequalities.size() == 1);
    // Slot row: -(-1) y0 <= -(-2), i.e. y0 <= 2.
    REQUIRE(p.inequalities[0].form.size() == 1);
    CHECK(p.inequalities[0].form[0].first == 0);
    CHECK(p.inequalities[0].form[0].second == 1.0);
    CHECK(p.inequalities[0].rhs == 2.0);
    // Canonical re-export is stable.
    const std::string canon = lipcert::export_sdpa(p);
    CHECK(lipcert::export_sdpa(lipcert::parse_sdpa(canon, "again")) == canon);
}

TEST_CASE("duplicate entries accumulate") {
    const std::string text =
        "1\n1\n-1\n1.0\n"
        "1 1 1 1 0.25\n"
        "1 1 1 1 0.5\n";
    const ConicProblem p = lipcert::parse_sdpa(text, "dup");
    REQUIRE(p.inequalities.size() == 1);
    REQUIRE(p.inequalities[0].form.size() == 1);
    CHECK(p.inequalities[0].form[0].second == doctest::Approx(-0.75));
}

TEST_CASE("parse errors carry the origin and line number") {
    CHECK_THROWS_WITH_AS(lipcert::parse_sdpa("abc\n", "bad.dat-s"),
                         doctest::Contains("bad.dat-s:1"), std::runtime_error);
    CHECK_THROWS_WITH_AS(lipcert::parse_sdpa("1\n1\n0\n1.0\n", "zero.dat-s"),
                         doctest::Contains("zero.dat-s:3"), std::runtime_error);
    CHECK_THROWS_WITH_AS(lipcert::parse_sdpa("1\n1\n-2\n1.0\n1 1 1 2 5.0\n", "off.dat-s"),
                         doctest::Contains("off-diagonal"), std::runtime_error);
    CHECK_THROWS_WITH_AS(lipcert::parse_sdpa("1\n1\n2\n1.0\n7 1 1 1 5.0\n", "mat.dat-s"),
                         doctest::Contains("matrix number"), std::runtime_error);
    CHECK_THROWS_WITH_AS(lipcert::parse_sdpa("1\n1\n2\n1.0\n1 3 1 1 5.0\n", "blk.dat-s"),
                         doctest::Contains("block number"), std::runtime_error);
    CHECK_THROWS_WITH_AS(lipcert::parse_sdpa("1\n1\n2\n1.0\n1 1 5 1 5.0\n", "idx.dat-s"),
                         doctest::Contains("out of range"), std::runtime_error);
    CHECK_THROWS_WITH_AS(lipcert::parse_sdpa("2\n1\n2\n1.0 2.0\n1 1 1\n", "trunc.dat-s"),
                         doctest::Contains("unexpected end of file"), std::runtime_error);
    CHECK_THROWS_AS(lipcert::parse_sdpa("-1\n", "neg.dat-s"), std::runtime_error);
}

TEST_CASE("entries at exact zero are dropped in both directions") {
    ConicProblem p;
    p.n_y = 1;
    p.maximize = false;
    p.objective = {{0, 1.0}};
    ConicBlock b;
    b.dim = 1;
    b.label = "z";
    b.entries.push_back({0, 0, 0.0, {{0, 1.0}}});
    p.blocks.push_back(b);
    p.inequalities.push_back({{{0, 0.0}}, 1.0, "null_coef"});
    const std::string text = lipcert::export_sdpa(p);
    // The zero coefficient must not appear as an entry line.
    const ConicProblem back = lipcert::parse_sdpa(text, "z");
    REQUIRE(back.inequalities.size() == 1);
    CHECK(back.inequalities[0].form.empty());
    CHECK(lipcert::export_sdpa(back) == text);
}
