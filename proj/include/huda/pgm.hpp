#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "huda/connect.hpp"

namespace huda {

/// Binary 8-bit PGM (P5).
void write_pgm(const std::string& path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> pixels);

/// Grayscale dump of a matrix: pixel = round(255 min(1, |w| * scale)) with
/// scale = 1 / max|w| (1 for an all-zero block). The applied scale goes to
/// a sidecar text line at <path>.txt. Returns the scale.
double dump_matrix_grayscale(const std::string& name, std::size_t rows, std::size_t cols,
                             std::span<const double> w, const std::string& path);

double dump_matrix_grayscale(const std::string& name, const ConnBlock& block, const std::string& path);

} // namespace huda
