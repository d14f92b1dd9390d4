#include <vector>

#include "doctest.h"
#include "lipcert/polynomial.hpp"

using lipcert::Monomial;
using lipcert::Polynomial;

TEST_CASE("monomials multiply by merging factors") {
    const Monomial a = Monomial::var(0);
    const Monomial b = Monomial::var(1, 2);
    const Monomial p = a * b * a;
    CHECK(p.degree() == 4);
    CHECK(p.exponent_of(0) == 2);
    CHECK(p.exponent_of(1) == 2);
    CHECK(p.exponent_of(7) == 0);
    CHECK(Monomial::one().is_one());
    CHECK((a * Monomial::one()) == a);
}

TEST_CASE("monomial evaluation multiplies powers") {
    const Monomial m = Monomial::var(0, 2) * Monomial::var(2);
    const std::vector<double> x = {3.0, 100.0, -2.0};
    CHECK(m.eval(x) == doctest::Approx(-18.0));
    CHECK(Monomial::one().eval(x) == 1.0);
}

TEST_CASE("graded-lex order sorts by degree then leading variable power") {
    const Monomial one = Monomial::one();
    const Monomial a = Monomial::var(0);
    const Monomial b = Monomial::var(1);
    const Monomial a2 = Monomial::var(0, 2);
    const Monomial ab = Monomial::var(0) * Monomial::var(1);
    const Monomial b2 = Monomial::var(1, 2);
    const std::vector<Monomial> expect = {one, a, b, a2, ab, b2};
    for (std::size_t i = 0; i < expect.size(); ++i)
        for (std::size_t j = 0; j < expect.size(); ++j)
            CHECK(lipcert::grlex_less(expect[i], expect[j]) == (i < j));
}

TEST_CASE("polynomial arithmetic merges and cancels terms") {
    const Polynomial x = Polynomial::variable(0);
    const Polynomial y = Polynomial::variable(1);
    Polynomial p = (x + y) * (x - y);  // x^2 - y^2
    CHECK(p.term_count() == 2);
    CHECK(p.coefficient(Monomial::var(0, 2)) == doctest::Approx(1.0));
    CHECK(p.coefficient(Monomial::var(1, 2)) == doctest::Approx(-1.0));
    CHECK(p.coefficient(Monomial::var(0) * Monomial::var(1)) == 0.0);
    p += y * y;
    p -= x * x;
    CHECK(p.is_zero());
}

TEST_CASE("polynomial evaluation matches a hand-expanded value") {
    // p = 2 x0 x1 - 3 x1^2 + 5
    Polynomial p = 2.0 * (Polynomial::variable(0) * Polynomial::variable(1)) -
                   3.0 * (Polynomial::variable(1) * Polynomial::variable(1)) +
                   Polynomial(5.0);
    const std::vector<double> at = {2.0, -1.0};
    CHECK(p.eval(at) == doctest::Approx(2.0 * 2.0 * -1.0 - 3.0 * 1.0 + 5.0));
    CHECK(p.degree() == 2);
}

TEST_CASE("support lists every variable that appears") {
    Polynomial p = Polynomial::variable(3) * Polynomial::variable(1) + Polynomial(1.0);
    const std::set<int> s = p.support();
    CHECK(s == std::set<int>{1, 3});
}

TEST_CASE("add_term removes terms that become exactly zero") {
    Polynomial p;
    p.add_term(Monomial::var(0), 1.5);
    p.add_term(Monomial::var(0), -1.5);
    CHECK(p.is_zero());
    p.add_term(Monomial::one(), 0.0);
    CHECK(p.is_zero());
}
