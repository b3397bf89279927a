#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "huda/bench.hpp"
#include "huda/compose.hpp"
#include "huda/ffnn.hpp"
#include "huda/grad.hpp"
#include "huda/rng.hpp"
#include "huda/train.hpp"

using namespace huda;

namespace {

Dual seeded(double v, std::size_t i, std::size_t n) { return Dual(v, i, n); }

/// The experiment combination: bouncing-ball FPM plus the two-layer FFNN
/// under the P topology.
CombinedPtr make_p_cm(std::uint64_t seed) {
    const auto fpm = build_fpm();
    const auto mlm = std::make_shared<FfnnModel>(mlm_ffnn_spec(), seed + 100);
    const auto conn = init_connections(parse_topology("P"), ConnDims{4, 4, 4, 4, 2, 4}, 0.05, seed);
    return combine(fpm, mlm, conn);
}

} // namespace

TEST_CASE("dual arithmetic chain rules") {
    auto check_rule = [](auto f, double x0) {
        const Dual y = f(seeded(x0, 0, 1));
        const double h = 1e-7 * (1.0 + std::abs(x0));
        const double fd = (value_of(f(Dual(x0 + h))) - value_of(f(Dual(x0 - h)))) / (2 * h);
        CHECK(y.tangent(0) == doctest::Approx(fd).epsilon(1e-6));
    };
    check_rule([](Dual x) { return x * x + Dual(3.0) * x - Dual(1.0) / x; }, 0.7);
    check_rule([](Dual x) { return tanh(x * x); }, -0.4);
    check_rule([](Dual x) { return sqrt(x + Dual(2.0)); }, 1.3);
    check_rule([](Dual x) { return abs(x * Dual(-2.0)); }, 0.9);

    SUBCASE("abs at zero uses subgradient zero") {
        const Dual y = abs(seeded(0.0, 0, 1));
        CHECK(y.value() == 0.0);
        CHECK(y.tangent(0) == 0.0);
    }
    SUBCASE("comparisons read values only") {
        const Dual a = seeded(1.0, 0, 1);
        const Dual b(1.0);
        CHECK(a == b);
        CHECK(!(a < b));
    }
    SUBCASE("widths widen as needed") {
        Dual a = seeded(2.0, 0, 2);
        Dual b = seeded(3.0, 1, 2);
        const Dual c = a * b;
        CHECK(c.value() == 6.0);
        CHECK(c.tangent(0) == 3.0);
        CHECK(c.tangent(1) == 2.0);
    }
}

TEST_CASE("ffnn forward pass") {
    SUBCASE("all-zero parameters map to zero") {
        const FfnnSpec spec = mlm_ffnn_spec();
        const std::vector<double> p(spec.n_params(), 0.0);
        const auto y = ffnn_forward(spec, p, std::vector<double>{0.3, -0.7, 2.0, 0.1});
        CHECK(y == std::vector<double>{0.0, 0.0});
    }
    SUBCASE("single tanh neuron table value") {
        const FfnnSpec spec{{LayerSpec{1, 1, Activation::Tanh}}};
        const std::vector<double> p{1.0, 0.0};
        const auto y = ffnn_forward(spec, p, std::vector<double>{0.5});
        CHECK(y[0] == doctest::Approx(0.46212).epsilon(1e-4));
    }
    SUBCASE("dual tangent on one weight matches finite differences") {
        const FfnnSpec spec = mlm_ffnn_spec();
        std::vector<double> p = init_ffnn(spec, 5);
        const std::vector<double> in{0.2, -0.3, 0.5, 0.7};
        const std::size_t wi = 13;

        std::vector<Dual> pd(p.begin(), p.end());
        pd[wi] = seeded(p[wi], 0, 1);
        std::vector<Dual> ind(in.begin(), in.end());
        std::vector<Dual> out(2);
        ffnn_forward<Dual>(spec, pd, ind, out);

        const double h = 1e-6;
        auto eval_at = [&](double w) {
            auto pc = p;
            pc[wi] = w;
            return ffnn_forward(spec, pc, in);
        };
        const auto yp = eval_at(p[wi] + h);
        const auto ym = eval_at(p[wi] - h);
        for (int k = 0; k < 2; ++k) {
            const double fd = (yp[k] - ym[k]) / (2 * h);
            CHECK(out[k].tangent(0) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
    SUBCASE("dimension checks") {
        const FfnnSpec spec = mlm_ffnn_spec();
        CHECK_THROWS_AS(ffnn_forward(spec, std::vector<double>(58, 0.0), std::vector<double>{1.0}),
                        DimensionMismatch);
        CHECK_THROWS_AS(ffnn_forward(spec, std::vector<double>(3, 0.0), std::vector<double>(4, 0.0)),
                        DimensionMismatch);
    }
}

TEST_CASE("ffnn initialization") {
    const FfnnSpec spec = mlm_ffnn_spec();
    const auto p1 = init_ffnn(spec, 9);
    const auto p2 = init_ffnn(spec, 9);
    const auto p3 = init_ffnn(spec, 10);
    CHECK(p1.size() == 58);
    CHECK(p1 == p2);
    CHECK(p1 != p3);
    std::size_t off = 0;
    for (const auto& l : spec.layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        for (std::size_t i = 0; i < l.in * l.out; ++i) CHECK(std::abs(p1[off + i]) <= bound);
        for (std::size_t i = 0; i < l.out; ++i) CHECK(p1[off + l.in * l.out + i] == 0.0);
        off += l.in * l.out + l.out;
    }
}

TEST_CASE("gradient of a quadratic") {
    DualLossFn loss = [](std::span<const Dual> p) { return p[0] * p[0] + p[1] * p[1]; };
    const std::vector<double> params{1.0, 2.0};
    const GradResult g = gradient(loss, params);
    CHECK(g.value == 5.0);
    CHECK(g.grad == std::vector<double>{2.0, 4.0});

    PlainLossFn plain = [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1]; };
    const GradResult fd = finite_difference_gradient(plain, params, 1e-6);
    CHECK(fd.grad[0] == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(fd.grad[1] == doctest::Approx(4.0).epsilon(1e-5));

    SUBCASE("negating the loss negates the finite-difference gradient exactly") {
        PlainLossFn neg = [&](std::span<const double> p) { return -plain(p); };
        const GradResult fdn = finite_difference_gradient(neg, params, 1e-6);
        CHECK(fdn.grad[0] == -fd.grad[0]);
        CHECK(fdn.grad[1] == -fd.grad[1]);
    }
    SUBCASE("non-finite losses are reported with the index") {
        DualLossFn bad = [](std::span<const Dual> p) { return sqrt(p[0] - Dual(10.0)); };
        CHECK_THROWS_AS(gradient(bad, std::vector<double>{1.0}), NonFiniteGradient);
    }
}

TEST_CASE("chunked sweeps agree") {
    DualLossFn loss = [](std::span<const Dual> p) {
        Dual acc(0.0);
        for (std::size_t i = 0; i < p.size(); ++i) acc += tanh(p[i] * Dual(0.3 * (1.0 + (double)i))) * p[(i + 1) % p.size()];
        return acc;
    };
    Rng rng(4);
    std::vector<double> params(10);
    for (auto& v : params) v = rng.uniform_sym(1.5);
    const GradResult g1 = gradient(loss, params, 1);
    const GradResult gn = gradient(loss, params, params.size());
    CHECK(g1.value == gn.value);
    for (std::size_t i = 0; i < params.size(); ++i)
        CHECK(g1.grad[i] == doctest::Approx(gn.grad[i]).epsilon(1e-12));
}

TEST_CASE("gradients through the solver match finite differences") {
    const auto cm = make_p_cm(21);
    const auto truth = build_ground_truth();
    const std::vector<double> x0{0.0, 0.0, 0.0, 0.0};
    const std::vector<double> params = cm->p0();

    SolverOpts tight;
    tight.rel_tol = 1e-10;
    tight.abs_tol = 1e-12;
    const LossSpec spec;

    auto run_check = [&](double horizon, double tol, std::size_t expect_events) {
        const Dataset data = generate_dataset(*truth, x0, {0.0, horizon}, 50.0);
        const auto traj = integrate(*cm, x0, {}, params, {0.0, horizon}, tight);
        CHECK(traj.events.size() == expect_events);

        DualLossFn dual_loss = [&](std::span<const Dual> p) {
            return simulate_loss<Dual>(*cm, data, p, x0, {}, horizon, spec, tight);
        };
        PlainLossFn plain_loss = [&](std::span<const double> p) {
            return simulate_loss<double>(*cm, data, p, x0, {}, horizon, spec, tight);
        };
        const GradResult ad = gradient(dual_loss, params);
        const GradResult fd = finite_difference_gradient(plain_loss, params, 1e-6);
        CHECK(ad.value == fd.value);

        Rng rng(77);
        double scale = 0.0;
        for (double g : fd.grad) scale = std::max(scale, std::abs(g));
        for (int k = 0; k < 20; ++k) {
            const std::size_t i = rng.index(params.size());
            CHECK(std::abs(ad.grad[i] - fd.grad[i]) <= tol * std::max(scale, std::abs(fd.grad[i])));
        }
    };

    SUBCASE("event-free horizon") { run_check(0.2, 1e-3, 0); }
    SUBCASE("horizon containing one bounce") { run_check(0.5, 1e-2, 1); }
}

TEST_CASE("zero-seed evaluation is bitwise the plain path") {
    const auto cm = make_p_cm(33);
    const auto truth = build_ground_truth();
    const std::vector<double> x0{0.1, 1.0, -0.2, 3.0};
    const Dataset data = generate_dataset(*truth, x0, {0.0, 0.7}, 50.0);
    const std::vector<double> params = cm->p0();
    const LossSpec spec;
    const SolverOpts opts;

    const double plain = simulate_loss<double>(*cm, data, params, x0, {}, 0.7, spec, opts);
    const std::vector<Dual> pd(params.begin(), params.end());
    const Dual dual = simulate_loss<Dual>(*cm, data, pd, x0, {}, 0.7, spec, opts);
    CHECK(dual.value() == plain);
    CHECK(dual.width() == 0);
}
