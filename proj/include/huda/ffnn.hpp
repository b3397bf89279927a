#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "huda/model.hpp"

namespace huda {

enum class Activation { Tanh, Linear };

/// One fully connected layer: out = act(W x + b), W stored row-major.
struct LayerSpec {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation act = Activation::Tanh;
};

/// Feed-forward network description. Parameters live in one flat vector,
/// layer by layer, each layer W row-major followed by b.
struct FfnnSpec {
    std::vector<LayerSpec> layers;

    std::size_t n_params() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.in * l.out + l.out;
        return n;
    }
    std::size_t n_in() const { return layers.empty() ? 0 : layers.front().in; }
    std::size_t n_out() const { return layers.empty() ? 0 : layers.back().out; }
};

/// The two-layer tanh network used as the machine-learning submodel.
inline FfnnSpec mlm_ffnn_spec() {
    return FfnnSpec{{LayerSpec{4, 8, Activation::Tanh}, LayerSpec{8, 2, Activation::Tanh}}};
}

/// Glorot-uniform weights (|w| <= sqrt(6/(fan_in+fan_out))), zero biases.
std::vector<double> init_ffnn(const FfnnSpec& spec, std::uint64_t seed);

/// Forward pass, identical code for plain and dual scalars.
template <class T>
void ffnn_forward(const FfnnSpec& spec, std::span<const T> params, std::span<const T> in, std::span<T> out);

extern template void ffnn_forward<double>(const FfnnSpec&, std::span<const double>, std::span<const double>,
                                          std::span<double>);
extern template void ffnn_forward<Dual>(const FfnnSpec&, std::span<const Dual>, std::span<const Dual>,
                                        std::span<Dual>);

/// Convenience front end with dimension checks.
std::vector<double> ffnn_forward(const FfnnSpec& spec, std::span<const double> params, std::span<const double> in);

/// Pure algebraic model wrapping a feed-forward network: y = FFNN(u).
class FfnnModel : public ModelBase<FfnnModel> {
public:
    FfnnModel(FfnnSpec spec, std::uint64_t seed);

    const Dims& dims() const override { return dims_; }
    std::vector<double> p0() const override { return p0_; }
    std::vector<double> xc0() const override { return {}; }
    std::string name() const override { return "ffnn"; }

    const FfnnSpec& spec() const { return spec_; }

    template <class T>
    void fc_impl(std::span<const T>, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                 std::span<T>) const {}
    template <class T>
    void g_impl(std::span<const T>, std::span<const T>, std::span<const T> u, std::span<const T> p, const T&,
                std::span<T> y) const {
        ffnn_forward(spec_, p, u, y);
    }
    template <class T>
    void c_impl(std::span<const T>, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                std::span<T>) const {}
    template <class T>
    void a_impl(std::span<const T>, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                const EventQ&, std::span<T>, std::span<T>) const {}

private:
    FfnnSpec spec_;
    Dims dims_;
    std::vector<double> p0_;
};

} // namespace huda
