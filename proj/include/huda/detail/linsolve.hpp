#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "huda/dual.hpp"

namespace huda::detail {

/// Gaussian elimination with partial pivoting on an n x n row-major system,
/// in place. Pivoting compares scalar values. Returns false when a pivot
/// magnitude drops to pivot_tol or below.
template <class T>
bool lu_solve(std::vector<T>& a, std::vector<T>& b, std::size_t n, double pivot_tol = 1e-12) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(value_of(a[col * n + col]));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double m = std::abs(value_of(a[r * n + col]));
            if (m > best) {
                best = m;
                piv = r;
            }
        }
        if (best <= pivot_tol) return false;
        if (piv != col) {
            for (std::size_t c = col; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const T f = a[r * n + col] / a[col * n + col];
            a[r * n + col] = T(0.0);
            for (std::size_t c = col + 1; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t ri = n; ri-- > 0;) {
        T acc = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) acc -= a[ri * n + c] * b[c];
        b[ri] = acc / a[ri * n + ri];
    }
    return true;
}

/// Least-squares solve of an m x k system via normal equations.
/// Returns false when J^T J is singular.
inline bool normal_solve(std::span<const double> j, std::size_t m, std::size_t k,
                         std::span<const double> rhs, std::vector<double>& out) {
    std::vector<double> jtj(k * k, 0.0), jtr(k, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            jtr[c] += j[r * k + c] * rhs[r];
            for (std::size_t c2 = 0; c2 < k; ++c2) jtj[c * k + c2] += j[r * k + c] * j[r * k + c2];
        }
    if (!lu_solve(jtj, jtr, k, 1e-14)) return false;
    out = std::move(jtr);
    return true;
}

} // namespace huda::detail
