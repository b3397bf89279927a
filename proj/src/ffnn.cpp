#include "huda/ffnn.hpp"

#include <cmath>
#include <string>

#include "huda/rng.hpp"

namespace huda {

std::vector<double> init_ffnn(const FfnnSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> p;
    p.reserve(spec.n_params());
    for (const auto& l : spec.layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        for (std::size_t i = 0; i < l.in * l.out; ++i) p.push_back(rng.uniform_sym(bound));
        for (std::size_t i = 0; i < l.out; ++i) p.push_back(0.0);
    }
    return p;
}

template <class T>
void ffnn_forward(const FfnnSpec& spec, std::span<const T> params, std::span<const T> in, std::span<T> out) {
    std::vector<T> cur(in.begin(), in.end());
    std::vector<T> next;
    std::size_t off = 0;
    for (const auto& l : spec.layers) {
        next.assign(l.out, T(0.0));
        for (std::size_t r = 0; r < l.out; ++r) {
            T acc = params[off + l.in * l.out + r]; // bias
            for (std::size_t c = 0; c < l.in; ++c) acc += params[off + r * l.in + c] * cur[c];
            using std::tanh;
            next[r] = l.act == Activation::Tanh ? tanh(acc) : acc;
        }
        off += l.in * l.out + l.out;
        cur.swap(next);
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cur[i];
}

template void ffnn_forward<double>(const FfnnSpec&, std::span<const double>, std::span<const double>,
                                   std::span<double>);
template void ffnn_forward<Dual>(const FfnnSpec&, std::span<const Dual>, std::span<const Dual>, std::span<Dual>);

std::vector<double> ffnn_forward(const FfnnSpec& spec, std::span<const double> params, std::span<const double> in) {
    if (in.size() != spec.n_in())
        throw DimensionMismatch("ffnn input length " + std::to_string(in.size()) + ", expected " +
                                std::to_string(spec.n_in()));
    if (params.size() != spec.n_params())
        throw DimensionMismatch("ffnn parameter length " + std::to_string(params.size()) + ", expected " +
                                std::to_string(spec.n_params()));
    std::vector<double> out(spec.n_out(), 0.0);
    ffnn_forward<double>(spec, params, in, out);
    return out;
}

FfnnModel::FfnnModel(FfnnSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    dims_ = Dims{0, 0, spec_.n_in(), spec_.n_out(), 0, spec_.n_params()};
    p0_ = init_ffnn(spec_, seed);
}

} // namespace huda
