#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace lipcert {

/// Monomial over integer variable ids, stored as a sparse list of
/// (id, exponent) factors sorted by id. Exponents are strictly positive;
/// the empty list is the constant monomial 1.
class Monomial {
public:
    Monomial() = default;

    static Monomial one() { return {}; }
    static Monomial var(int id, int exp = 1);

    int degree() const;
    int exponent_of(int id) const;
    bool is_one() const { return factors_.empty(); }

    Monomial operator*(const Monomial& other) const;

    double eval(const std::vector<double>& values_by_id) const;

    const std::vector<std::pair<int, int>>& factors() const { return factors_; }

    bool operator==(const Monomial& other) const { return factors_ == other.factors_; }
    bool operator!=(const Monomial& other) const { return factors_ != other.factors_; }

    std::string to_string(
        const std::function<std::string(int)>& var_name = nullptr) const;

    struct Hash {
        std::size_t operator()(const Monomial& m) const;
    };

private:
    std::vector<std::pair<int, int>> factors_;
};

/// Graded-lexicographic order: lower total degree first; within a degree the
/// monomial with the larger exponent at the smallest differing variable id
/// comes first (so for ids a < b: 1, a, b, a^2, ab, b^2, ...).
bool grlex_less(const Monomial& a, const Monomial& b);

struct GrlexLess {
    bool operator()(const Monomial& a, const Monomial& b) const { return grlex_less(a, b); }
};

/// Sparse multivariate polynomial with real coefficients. Terms are kept in
/// graded-lex order; exact-zero coefficients are never stored.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(double constant);

    static Polynomial variable(int id);
    static Polynomial monomial(const Monomial& m, double coef = 1.0);

    int degree() const;
    bool is_zero() const { return terms_.empty(); }
    std::size_t term_count() const { return terms_.size(); }

    /// Coefficient of a monomial (0 when absent).
    double coefficient(const Monomial& m) const;

    std::set<int> support() const;

    double eval(const std::vector<double>& values_by_id) const;

    Polynomial& operator+=(const Polynomial& other);
    Polynomial& operator-=(const Polynomial& other);
    Polynomial& operator*=(double scalar);
    Polynomial operator+(const Polynomial& other) const;
    Polynomial operator-(const Polynomial& other) const;
    Polynomial operator-() const;
    Polynomial operator*(const Polynomial& other) const;
    Polynomial operator*(double scalar) const;

    void add_term(const Monomial& m, double coef);

    const std::map<Monomial, double, GrlexLess>& terms() const { return terms_; }

    std::string to_string(
        const std::function<std::string(int)>& var_name = nullptr) const;

private:
    std::map<Monomial, double, GrlexLess> terms_;
};

inline Polynomial operator*(double scalar, const Polynomial& p) { return p * scalar; }

}  // namespace lipcert
