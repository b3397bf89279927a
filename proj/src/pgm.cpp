#include "huda/pgm.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "huda/errors.hpp"

namespace huda {

void write_pgm(const std::string& path, std::size_t rows, std::size_t cols,
               std::span<const std::uint8_t> pixels) {
    if (pixels.size() != rows * cols) throw IoError("pixel buffer does not match PGM dimensions");
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    std::fprintf(f, "P5\n%zu %zu\n255\n", cols, rows);
    if (!pixels.empty()) std::fwrite(pixels.data(), 1, pixels.size(), f);
    std::fclose(f);
}

double dump_matrix_grayscale(const std::string& name, std::size_t rows, std::size_t cols,
                             std::span<const double> w, const std::string& path) {
    if (w.size() != rows * cols) throw IoError("matrix buffer does not match dimensions");
    if (w.empty()) throw IoError("refusing to dump an empty matrix");
    double wmax = 0.0;
    for (double v : w) wmax = std::max(wmax, std::abs(v));
    const double scale = wmax > 0.0 ? 1.0 / wmax : 1.0;
    std::vector<std::uint8_t> px(w.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        px[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::min(1.0, std::abs(w[i]) * scale)));
    write_pgm(path, rows, cols, px);

    std::FILE* f = std::fopen((path + ".txt").c_str(), "w");
    if (!f) throw IoError("cannot open '" + path + ".txt' for writing");
    std::fprintf(f, "%s (scale %.17g)\n", name.c_str(), scale);
    std::fclose(f);
    return scale;
}

double dump_matrix_grayscale(const std::string& name, const ConnBlock& block, const std::string& path) {
    return dump_matrix_grayscale(name, block.rows, block.cols, block.w, path);
}

} // namespace huda
