#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace huda {

/// Maximum number of simultaneously active derivative seeds per sweep.
inline constexpr std::size_t kMaxTangents = 32;

/// Forward-mode scalar: a value plus up to kMaxTangents directional derivatives.
///
/// Arithmetic follows the chain rule for +, -, *, /, tanh, sqrt and abs
/// (subgradient 0 at 0). Comparisons read the value only, so control flow
/// (step acceptance, event sign tests) is tangent-independent. A Dual with
/// zero active tangents computes values with exactly the same double
/// operations as plain arithmetic.
class Dual {
public:
    Dual() = default;
    Dual(double value) : v_(value) {} // NOLINT: implicit by design
    Dual(double value, std::size_t seed_index, std::size_t n_seeds) : v_(value), n_(static_cast<std::uint32_t>(n_seeds)) {
        std::fill_n(d_.data(), n_, 0.0);
        d_[seed_index] = 1.0;
    }

    Dual(const Dual& o) : v_(o.v_), n_(o.n_) { std::copy_n(o.d_.data(), n_, d_.data()); }
    Dual& operator=(const Dual& o) {
        v_ = o.v_;
        n_ = o.n_;
        std::copy_n(o.d_.data(), n_, d_.data());
        return *this;
    }

    double value() const { return v_; }
    std::size_t width() const { return n_; }
    double tangent(std::size_t i) const { return i < n_ ? d_[i] : 0.0; }

    void set_value(double v) { v_ = v; }
    void set_tangent(std::size_t i, double t) {
        if (i >= n_) {
            std::fill(d_.data() + n_, d_.data() + i + 1, 0.0);
            n_ = static_cast<std::uint32_t>(i + 1);
        }
        d_[i] = t;
    }
    void clear_tangents() { n_ = 0; }

    Dual operator-() const {
        Dual r;
        r.v_ = -v_;
        r.n_ = n_;
        for (std::uint32_t i = 0; i < n_; ++i) r.d_[i] = -d_[i];
        return r;
    }

    Dual& operator+=(const Dual& b) {
        v_ += b.v_;
        widen(b.n_);
        for (std::uint32_t i = 0; i < b.n_; ++i) d_[i] += b.d_[i];
        return *this;
    }
    Dual& operator-=(const Dual& b) {
        v_ -= b.v_;
        widen(b.n_);
        for (std::uint32_t i = 0; i < b.n_; ++i) d_[i] -= b.d_[i];
        return *this;
    }
    Dual& operator*=(const Dual& b) {
        widen(b.n_);
        for (std::uint32_t i = 0; i < n_; ++i) d_[i] = d_[i] * b.v_ + v_ * b.tangent(i);
        v_ *= b.v_;
        return *this;
    }
    Dual& operator/=(const Dual& b) {
        widen(b.n_);
        const double q = v_ / b.v_;
        for (std::uint32_t i = 0; i < n_; ++i) d_[i] = (d_[i] - q * b.tangent(i)) / b.v_;
        v_ = q;
        return *this;
    }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator/(Dual a, const Dual& b) { return a /= b; }

    friend bool operator<(const Dual& a, const Dual& b) { return a.v_ < b.v_; }
    friend bool operator>(const Dual& a, const Dual& b) { return a.v_ > b.v_; }
    friend bool operator<=(const Dual& a, const Dual& b) { return a.v_ <= b.v_; }
    friend bool operator>=(const Dual& a, const Dual& b) { return a.v_ >= b.v_; }
    friend bool operator==(const Dual& a, const Dual& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Dual& a, const Dual& b) { return a.v_ != b.v_; }

    friend Dual tanh(const Dual& a) {
        Dual r;
        r.v_ = std::tanh(a.v_);
        r.n_ = a.n_;
        const double sech2 = 1.0 - r.v_ * r.v_;
        for (std::uint32_t i = 0; i < a.n_; ++i) r.d_[i] = sech2 * a.d_[i];
        return r;
    }
    friend Dual sqrt(const Dual& a) {
        Dual r;
        r.v_ = std::sqrt(a.v_);
        r.n_ = a.n_;
        const double s = r.v_ > 0.0 ? 0.5 / r.v_ : 0.0;
        for (std::uint32_t i = 0; i < a.n_; ++i) r.d_[i] = s * a.d_[i];
        return r;
    }
    friend Dual abs(const Dual& a) {
        Dual r;
        r.v_ = std::abs(a.v_);
        r.n_ = a.n_;
        const double s = a.v_ > 0.0 ? 1.0 : (a.v_ < 0.0 ? -1.0 : 0.0);
        for (std::uint32_t i = 0; i < a.n_; ++i) r.d_[i] = s * a.d_[i];
        return r;
    }

private:
    void widen(std::uint32_t m) {
        if (m > n_) {
            std::fill(d_.data() + n_, d_.data() + m, 0.0);
            n_ = m;
        }
    }

    double v_ = 0.0;
    std::uint32_t n_ = 0;
    std::array<double, kMaxTangents> d_;
};

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value(); }

inline double tangent_of(double, std::size_t) { return 0.0; }
inline double tangent_of(const Dual& x, std::size_t i) { return x.tangent(i); }

/// Extracts the value parts of a dual vector.
inline std::vector<double> values_of(std::span<const Dual> xs) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i].value();
    return out;
}

inline std::vector<Dual> to_dual(std::span<const double> xs) {
    return std::vector<Dual>(xs.begin(), xs.end());
}

} // namespace huda

namespace huda::detail {
// ADL helpers so generic code can write tanh(x) for both double and Dual.
using std::abs;
using std::sqrt;
using std::tanh;
} // namespace huda::detail
