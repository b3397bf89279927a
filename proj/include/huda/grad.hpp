#pragma once

#include <functional>
#include <span>
#include <vector>

#include "huda/dual.hpp"

namespace huda {

using DualLossFn = std::function<Dual(std::span<const Dual>)>;
using PlainLossFn = std::function<double(std::span<const double>)>;

struct GradResult {
    double value = 0.0;
    std::vector<double> grad;
};

/// Full gradient of a scalar loss by forward sweeps of up to `chunk` seeds
/// (capped at kMaxTangents). The value part equals the undifferentiated
/// evaluation bitwise. Throws NonFiniteGradient with the offending
/// parameter index.
GradResult gradient(const DualLossFn& loss_fn, std::span<const double> params,
                    std::size_t chunk = kMaxTangents);

/// Central finite differences, step h (1 + |p_i|) per coordinate.
GradResult finite_difference_gradient(const PlainLossFn& loss_fn, std::span<const double> params,
                                      double h = 1e-6);

} // namespace huda
