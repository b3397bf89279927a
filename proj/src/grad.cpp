#include "huda/grad.hpp"

#include <cmath>
#include <string>

#include "huda/errors.hpp"

namespace huda {

GradResult gradient(const DualLossFn& loss_fn, std::span<const double> params, std::size_t chunk) {
    const std::size_t n = params.size();
    chunk = std::min(std::max<std::size_t>(1, chunk), kMaxTangents);
    GradResult out;
    out.grad.assign(n, 0.0);

    std::vector<Dual> p(n);
    std::size_t start = 0;
    do {
        const std::size_t width = std::min(chunk, n - start);
        for (std::size_t i = 0; i < n; ++i) p[i] = Dual(params[i]);
        for (std::size_t i = 0; i < width; ++i) p[start + i] = Dual(params[start + i], i, width);
        const Dual loss = loss_fn(p);
        if (start == 0) {
            out.value = loss.value();
            if (!std::isfinite(out.value)) throw NonFiniteGradient("loss value is not finite", -1);
        }
        for (std::size_t i = 0; i < width; ++i) {
            const double g = loss.tangent(i);
            if (!std::isfinite(g))
                throw NonFiniteGradient("gradient entry " + std::to_string(start + i) + " is not finite",
                                        static_cast<long>(start + i));
            out.grad[start + i] = g;
        }
        start += chunk;
    } while (start < n);
    return out;
}

GradResult finite_difference_gradient(const PlainLossFn& loss_fn, std::span<const double> params, double h) {
    if (!(h > 0.0)) throw HudaError("finite difference step must be positive");
    const std::size_t n = params.size();
    GradResult out;
    out.grad.assign(n, 0.0);
    std::vector<double> p(params.begin(), params.end());
    out.value = loss_fn(p);
    if (!std::isfinite(out.value)) throw NonFiniteGradient("loss value is not finite", -1);
    for (std::size_t i = 0; i < n; ++i) {
        const double hi = h * (1.0 + std::abs(params[i]));
        p[i] = params[i] + hi;
        const double lp = loss_fn(p);
        p[i] = params[i] - hi;
        const double lm = loss_fn(p);
        p[i] = params[i];
        out.grad[i] = (lp - lm) / (2.0 * hi);
        if (!std::isfinite(out.grad[i]))
            throw NonFiniteGradient("finite-difference entry " + std::to_string(i) + " is not finite",
                                    static_cast<long>(i));
    }
    return out;
}

} // namespace huda
