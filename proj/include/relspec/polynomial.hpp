#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relspec/error.hpp"

namespace relspec::poly {

/// Exponent vector over the real input variables (the bias is not a
/// variable). The all-zero vector is the constant item.
class Monomial {
public:
    using exponent_type = std::uint16_t;

    Monomial() = default;
    explicit Monomial(std::size_t variables) : exponents_(variables, 0) {}
    explicit Monomial(std::vector<exponent_type> exponents) : exponents_(std::move(exponents)) {
        for (auto e : exponents_) degree_ += e;
    }

    static Monomial constant(std::size_t variables) { return Monomial(variables); }
    static Monomial variable(std::size_t variables, std::size_t index) {
        relspec::detail::require(index < variables, "monomial: variable index out of range");
        std::vector<exponent_type> e(variables, 0);
        e[index] = 1;
        return Monomial(std::move(e));
    }

    std::size_t variables() const { return exponents_.size(); }
    std::size_t degree() const { return degree_; }
    exponent_type operator[](std::size_t i) const { return exponents_[i]; }
    const std::vector<exponent_type>& exponents() const { return exponents_; }
    bool is_constant() const { return degree_ == 0; }

    /// Product x^a * x^b; throws on exponent overflow.
    friend Monomial operator*(const Monomial& a, const Monomial& b) {
        relspec::detail::require(a.variables() == b.variables(), "monomial: variable-count mismatch");
        std::vector<exponent_type> e(a.variables());
        for (std::size_t i = 0; i < e.size(); ++i) {
            const unsigned sum = unsigned{a.exponents_[i]} + unsigned{b.exponents_[i]};
            if (sum > std::numeric_limits<exponent_type>::max())
                throw ValidationError("monomial: exponent overflow");
            e[i] = static_cast<exponent_type>(sum);
        }
        return Monomial(std::move(e));
    }

    double evaluate(std::span<const double> x) const {
        double v = 1.0;
        for (std::size_t i = 0; i < exponents_.size(); ++i)
            for (exponent_type k = 0; k < exponents_[i]; ++k) v *= x[i];
        return v;
    }

    friend bool operator==(const Monomial& a, const Monomial& b) { return a.exponents_ == b.exponents_; }
    friend auto operator<=>(const Monomial& a, const Monomial& b) { return a.exponents_ <=> b.exponents_; }

private:
    std::vector<exponent_type> exponents_;
    std::size_t degree_ = 0;
};

/// Sparse multivariate polynomial with real coefficients. Exact zeros are
/// never stored; no epsilon pruning is done.
class SparsePoly {
public:
    using Terms = std::map<Monomial, double>;

    SparsePoly() = default;
    explicit SparsePoly(std::size_t variables) : variables_(variables) {}

    static SparsePoly constant(std::size_t variables, double c) {
        SparsePoly p(variables);
        p.add_term(Monomial::constant(variables), c);
        return p;
    }
    static SparsePoly variable(std::size_t variables, std::size_t index, double c = 1.0) {
        SparsePoly p(variables);
        p.add_term(Monomial::variable(variables, index), c);
        return p;
    }

    std::size_t variables() const { return variables_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }
    const Terms& terms() const { return terms_; }

    std::size_t degree() const {
        std::size_t d = 0;
        for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
        return d;
    }

    double coefficient(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? 0.0 : it->second;
    }

    /// Accumulate c into the coefficient of m, dropping the term if it
    /// becomes exactly zero.
    void add_term(const Monomial& m, double c) {
        relspec::detail::require(m.variables() == variables_, "poly: monomial variable-count mismatch");
        if (c == 0.0) return;
        auto [it, inserted] = terms_.try_emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    /// this += scale * other
    void add_scaled(const SparsePoly& other, double scale) {
        check_same(other);
        if (scale == 0.0) return;
        for (const auto& [m, c] : other.terms_) add_term(m, scale * c);
    }

    double evaluate(std::span<const double> x) const {
        if (x.size() != variables_)
            throw ValidationError("poly: evaluation point has " + std::to_string(x.size()) +
                                  " components, expected " + std::to_string(variables_));
        double s = 0.0;
        for (const auto& [m, c] : terms_) s += c * m.evaluate(x);
        return s;
    }

    friend SparsePoly operator+(const SparsePoly& a, const SparsePoly& b) {
        SparsePoly out = a;
        out.add_scaled(b, 1.0);
        return out;
    }

    friend SparsePoly operator-(const SparsePoly& a) {
        SparsePoly out(a.variables_);
        for (const auto& [m, c] : a.terms_) out.terms_.emplace(m, -c);
        return out;
    }

    friend SparsePoly operator*(double s, const SparsePoly& p) {
        SparsePoly out(p.variables_);
        out.add_scaled(p, s);
        return out;
    }

    friend SparsePoly operator*(const SparsePoly& a, const SparsePoly& b) {
        a.check_same(b);
        SparsePoly out(a.variables_);
        for (const auto& [ma, ca] : a.terms_)
            for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
        return out;
    }

    friend bool operator==(const SparsePoly& a, const SparsePoly& b) {
        return a.variables_ == b.variables_ && a.terms_ == b.terms_;
    }

private:
    void check_same(const SparsePoly& other) const {
        if (other.variables_ != variables_)
            throw ValidationError("poly: variable-count mismatch (" + std::to_string(variables_) + " vs " +
                                  std::to_string(other.variables_) + ")");
    }

    std::size_t variables_ = 0;
    Terms terms_;
};

inline SparsePoly poly_add(const SparsePoly& a, const SparsePoly& b) { return a + b; }
inline SparsePoly poly_mul(const SparsePoly& a, const SparsePoly& b) { return a * b; }

/// C(n, k) as a double-free integer; used for item-count bounds.
inline std::size_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace relspec::poly
