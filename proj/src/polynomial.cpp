#include "lipcert/polynomial.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lipcert {

Monomial Monomial::var(int id, int exp) {
    if (id < 0) throw std::invalid_argument("Monomial::var: negative variable id");
    if (exp < 0) throw std::invalid_argument("Monomial::var: negative exponent");
    Monomial m;
    if (exp > 0) m.factors_.emplace_back(id, exp);
    return m;
}

int Monomial::degree() const {
    int d = 0;
    for (const auto& [id, e] : factors_) d += e;
    return d;
}

int Monomial::exponent_of(int id) const {
    for (const auto& [vid, e] : factors_)
        if (vid == id) return e;
    return 0;
}

Monomial Monomial::operator*(const Monomial& other) const {
    Monomial out;
    out.factors_.reserve(factors_.size() + other.factors_.size());
    std::size_t i = 0, j = 0;
    while (i < factors_.size() && j < other.factors_.size()) {
        if (factors_[i].first < other.factors_[j].first) {
            out.factors_.push_back(factors_[i++]);
        } else if (factors_[i].first > other.factors_[j].first) {
            out.factors_.push_back(other.factors_[j++]);
        } else {
            out.factors_.emplace_back(factors_[i].first,
                                      factors_[i].second + other.factors_[j].second);
            ++i;
            ++j;
        }
    }
    while (i < factors_.size()) out.factors_.push_back(factors_[i++]);
    while (j < other.factors_.size()) out.factors_.push_back(other.factors_[j++]);
    return out;
}

double Monomial::eval(const std::vector<double>& values_by_id) const {
    double v = 1.0;
    for (const auto& [id, e] : factors_) {
        if (id >= static_cast<int>(values_by_id.size()))
            throw std::out_of_range("Monomial::eval: variable id beyond value vector");
        v *= std::pow(values_by_id[id], e);
    }
    return v;
}

std::string Monomial::to_string(const std::function<std::string(int)>& var_name) const {
    if (factors_.empty()) return "1";
    std::ostringstream os;
    bool first = true;
    for (const auto& [id, e] : factors_) {
        if (!first) os << "*";
        first = false;
        if (var_name)
            os << var_name(id);
        else
            os << "v" << id;
        if (e > 1) os << "^" << e;
    }
    return os.str();
}

std::size_t Monomial::Hash::operator()(const Monomial& m) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (const auto& [id, e] : m.factors()) {
        h = (h ^ static_cast<std::uint64_t>(id)) * 1099511628211ull;
        h = (h ^ static_cast<std::uint64_t>(e)) * 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
}

bool grlex_less(const Monomial& a, const Monomial& b) {
    const int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    // Same degree: walk factor lists; at the smallest id where exponents
    // differ, the monomial with the larger exponent precedes.
    const auto& fa = a.factors();
    const auto& fb = b.factors();
    std::size_t i = 0, j = 0;
    while (i < fa.size() && j < fb.size()) {
        if (fa[i].first < fb[j].first) return true;   // a has positive exp at smaller id
        if (fa[i].first > fb[j].first) return false;  // b does
        if (fa[i].second != fb[j].second) return fa[i].second > fb[j].second;
        ++i;
        ++j;
    }
    // One list exhausted: equal so far with equal degree means both exhausted.
    return false;
}

Polynomial::Polynomial(double constant) {
    if (constant != 0.0) terms_.emplace(Monomial::one(), constant);
}

Polynomial Polynomial::variable(int id) {
    Polynomial p;
    p.terms_.emplace(Monomial::var(id), 1.0);
    return p;
}

Polynomial Polynomial::monomial(const Monomial& m, double coef) {
    Polynomial p;
    if (coef != 0.0) p.terms_.emplace(m, coef);
    return p;
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
    return d;
}

double Polynomial::coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

std::set<int> Polynomial::support() const {
    std::set<int> s;
    for (const auto& [m, c] : terms_)
        for (const auto& [id, e] : m.factors()) s.insert(id);
    return s;
}

double Polynomial::eval(const std::vector<double>& values_by_id) const {
    double v = 0.0;
    for (const auto& [m, c] : terms_) v += c * m.eval(values_by_id);
    return v;
}

void Polynomial::add_term(const Monomial& m, double coef) {
    if (coef == 0.0) return;
    auto [it, inserted] = terms_.emplace(m, coef);
    if (!inserted) {
        it->second += coef;
        if (it->second == 0.0) terms_.erase(it);
    }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    for (const auto& [m, c] : other.terms_) add_term(m, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
    for (const auto& [m, c] : other.terms_) add_term(m, -c);
    return *this;
}

Polynomial& Polynomial::operator*=(double scalar) {
    if (scalar == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [m, c] : terms_) c *= scalar;
    return *this;
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
    Polynomial out = *this;
    out += other;
    return out;
}

Polynomial Polynomial::operator-(const Polynomial& other) const {
    Polynomial out = *this;
    out -= other;
    return out;
}

Polynomial Polynomial::operator-() const {
    Polynomial out = *this;
    for (auto& [m, c] : out.terms_) c = -c;
    return out;
}

Polynomial Polynomial::operator*(const Polynomial& other) const {
    Polynomial out;
    for (const auto& [ma, ca] : terms_)
        for (const auto& [mb, cb] : other.terms_) out.add_term(ma * mb, ca * cb);
    return out;
}

Polynomial Polynomial::operator*(double scalar) const {
    Polynomial out = *this;
    out *= scalar;
    return out;
}

std::string Polynomial::to_string(const std::function<std::string(int)>& var_name) const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
        if (first) {
            if (c < 0) os << "-";
        } else {
            os << (c < 0 ? " - " : " + ");
        }
        first = false;
        const double a = std::abs(c);
        if (m.is_one()) {
            os << a;
        } else {
            if (a != 1.0) os << a << "*";
            os << m.to_string(var_name);
        }
    }
    return os.str();
}

}  // namespace lipcert
