#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "lipcert/moments.hpp"
#include "lipcert/polynomial.hpp"

using lipcert::LinearForm;
using lipcert::Monomial;
using lipcert::MomentIndex;
using lipcert::Polynomial;
using lipcert::SymbolicBlock;

namespace {

/// Evaluates a symbolic block numerically when y holds point moments.
double block_entry(const SymbolicBlock& b, int r, int c, const std::vector<double>& y) {
    return lipcert::eval_form(b.at(r, c), y);
}

/// Moment vector of the point mass at `pt`: y_idx = monomial_idx(pt).
std::vector<double> point_vector(const MomentIndex& index, const std::vector<double>& pt) {
    std::vector<double> y(index.size());
    for (int i = 0; i < index.size(); ++i) y[i] = index.monomial(i).eval(pt);
    return y;
}

}  // namespace

TEST_CASE("normalize_form sorts, merges and drops zeros") {
    LinearForm f = {{3, 2.0}, {1, -1.0}, {3, -2.0}, {0, 0.5}, {1, 4.0}};
    f = lipcert::normalize_form(std::move(f));
    REQUIRE(f.size() == 2);
    CHECK(f[0].first == 0);
    CHECK(f[0].second == 0.5);
    CHECK(f[1].first == 1);
    CHECK(f[1].second == 3.0);
    const std::vector<double> y = {2.0, 10.0};
    CHECK(lipcert::eval_form(f, y) == doctest::Approx(31.0));
}

TEST_CASE("monomial_basis enumerates graded-lex monomials up to the degree") {
    const std::vector<int> vars = {0, 2};
    const auto basis = lipcert::monomial_basis(vars, 2);
    REQUIRE(basis.size() == 6);  // C(2+2,2)
    CHECK(basis[0].is_one());
    CHECK(basis[1] == Monomial::var(0));
    CHECK(basis[2] == Monomial::var(2));
    CHECK(basis[3] == Monomial::var(0, 2));
    CHECK(basis[4] == Monomial::var(0) * Monomial::var(2));
    CHECK(basis[5] == Monomial::var(2, 2));
    // Degree-3 basis over three variables has C(3+3,3) = 20 elements.
    CHECK(lipcert::monomial_basis({0, 1, 2}, 3).size() == 20);
}

TEST_CASE("moment index pins the constant to slot zero and registers stably") {
    MomentIndex index;
    CHECK(index.size() == 1);
    CHECK(index.lookup(Monomial::one()) == 0);
    const int ix = index.index_of(Monomial::var(4));
    CHECK(ix == 1);
    CHECK(index.index_of(Monomial::var(4)) == ix);  // idempotent
    CHECK(index.lookup(Monomial::var(5)) == -1);
    CHECK(index.monomial(ix) == Monomial::var(4));
}

TEST_CASE("riesz maps a polynomial to its expectation form") {
    MomentIndex index;
    const Polynomial p =
        Polynomial(3.0) + Polynomial::variable(1) * Polynomial::variable(0) * 2.0 -
        Polynomial::variable(1) * 0.5;
    const LinearForm f = index.riesz(p);
    // Constant term lands on index 0.
    REQUIRE(f.size() == 3);
    CHECK(f[0].first == 0);
    CHECK(f[0].second == 3.0);
    const int ixy = index.lookup(Monomial::var(0) * Monomial::var(1));
    const int iy = index.lookup(Monomial::var(1));
    REQUIRE(ixy > 0);
    REQUIRE(iy > 0);
    std::vector<double> y(index.size(), 0.0);
    y[0] = 1.0;
    y[static_cast<std::size_t>(ixy)] = 7.0;
    y[static_cast<std::size_t>(iy)] = 4.0;
    CHECK(lipcert::eval_form(f, y) == doctest::Approx(3.0 + 14.0 - 2.0));
}

TEST_CASE("moment matrix at point moments is the basis outer product") {
    MomentIndex index;
    const std::vector<int> vars = {0, 1};
    const SymbolicBlock m = lipcert::moment_matrix(vars, 2, index);
    CHECK(m.dim == 6);
    CHECK(m.sense == lipcert::BlockSense::PSD);
    REQUIRE(m.row_basis.size() == 6);

    std::vector<double> pt = {1.5, -0.5};
    const std::vector<double> y = point_vector(index, pt);
    for (int r = 0; r < m.dim; ++r)
        for (int c = r; c < m.dim; ++c) {
            const double expect = m.row_basis[r].eval(pt) * m.row_basis[c].eval(pt);
            CHECK(block_entry(m, r, c, y) == doctest::Approx(expect));
        }
}

TEST_CASE("localizing matrix weights the moment matrix by its polynomial") {
    MomentIndex index;
    const std::vector<int> vars = {0};
    // g = 1 - x^2 over basis [1, x].
    Polynomial g(1.0);
    g -= Polynomial::variable(0) * Polynomial::variable(0);
    const SymbolicBlock loc =
        lipcert::localizing_matrix(g, vars, 1, index, lipcert::BlockSense::PSD);
    CHECK(loc.dim == 2);
    std::vector<double> pt = {0.25};
    const std::vector<double> y = point_vector(index, pt);
    const double gval = 1.0 - 0.25 * 0.25;
    CHECK(block_entry(loc, 0, 0, y) == doctest::Approx(gval));
    CHECK(block_entry(loc, 0, 1, y) == doctest::Approx(gval * 0.25));
    CHECK(block_entry(loc, 1, 1, y) == doctest::Approx(gval * 0.25 * 0.25));

    const SymbolicBlock zero =
        lipcert::localizing_matrix(g, vars, 1, index, lipcert::BlockSense::Zero);
    CHECK(zero.sense == lipcert::BlockSense::Zero);
}

TEST_CASE("triple block carries the cubic and quartic moments of one triple") {
    MomentIndex index;
    const int t = 0, u1 = 1, u2 = 2;
    const SymbolicBlock b = lipcert::triple_moment_block(t, u1, u2, index);
    CHECK(b.dim == 3);
    // Rows are [1, t, u1*u2]; entry (1,2) is the cubic L(t u1 u2).
    const int cubic = index.lookup(Monomial::var(t) * Monomial::var(u1) * Monomial::var(u2));
    REQUIRE(cubic >= 0);
    const std::vector<double> pt = {0.5, 1.0, 1.0};
    const std::vector<double> y = point_vector(index, pt);
    CHECK(block_entry(b, 1, 2, y) == doctest::Approx(0.5));
    CHECK(block_entry(b, 2, 2, y) == doctest::Approx(1.0));  // quartic u1^2 u2^2
    CHECK(block_entry(b, 0, 0, y) == doctest::Approx(1.0));
}

TEST_CASE("aggregated block covers all first-layer pairings of one unit") {
    MomentIndex index;
    const std::vector<int> t_vars = {0, 1};
    const std::vector<int> u1_vars = {2, 3, 4};
    const int u2 = 5;
    const SymbolicBlock b = lipcert::aggregated_moment_block(t_vars, u1_vars, u2, index);
    CHECK(b.dim == 1 + 2 + 3);
    // Every cubic t_a u1_j u2 is now registered.
    for (int a : t_vars)
        for (int j : u1_vars)
            CHECK(index.lookup(Monomial::var(a) * Monomial::var(j) * Monomial::var(u2)) >= 0);
    const std::vector<double> pt = {0.5, -1.0, 1.0, 0.0, 1.0, 1.0};
    const std::vector<double> y = point_vector(index, pt);
    // Entry (t_a row, u1_j row) equals t_a * u1_j * u2 at the point.
    for (std::size_t a = 0; a < t_vars.size(); ++a)
        for (std::size_t j = 0; j < u1_vars.size(); ++j) {
            const int r = 1 + static_cast<int>(a);
            const int c = 1 + static_cast<int>(t_vars.size() + j);
            const double expect = pt[a] * pt[2 + j] * pt[5];
            CHECK(block_entry(b, r, c, y) == doctest::Approx(expect));
        }
}

TEST_CASE("symbolic block access is symmetric and bounds-checked") {
    MomentIndex index;
    const SymbolicBlock m = lipcert::moment_matrix({0}, 1, index);
    CHECK(m.at(1, 0) == m.at(0, 1));  // lower-triangle access mirrors the stored upper
    CHECK_THROWS_AS(m.at(0, 5), std::out_of_range);
    CHECK_THROWS_AS(m.at(-1, 0), std::out_of_range);
}
