#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "huda/ffnn.hpp"
#include "huda/model.hpp"
#include "huda/solve.hpp"

namespace huda {

/// Physical constants of the bouncing-ball benchmark. The ball mass enters
/// only the friction term of the ground truth; it is not fixed by the
/// benchmark definition and defaults to 1.
struct BallConsts {
    double g = 9.81;  ///< gravity
    double r = 0.1;   ///< ball radius
    double d = 0.1;   ///< energy dissipation per wall hit
    double mu = 0.15; ///< air friction coefficient (ground truth only)
    double m = 1.0;   ///< ball mass
};

/// Bouncing ball in two dimensions, state [s_x, v_x, s_y, v_y], walls at
/// +-1, no air friction. Four event indicators measure the distance to the
/// walls; the affect reflects and damps the normal velocity.
class BouncingBallModel : public ModelBase<BouncingBallModel> {
public:
    explicit BouncingBallModel(BallConsts consts = {}, bool air_friction = false)
        : consts_(consts), friction_(air_friction) {
        dims_ = Dims{4, 0, 0, 0, 4, 0};
    }

    const Dims& dims() const override { return dims_; }
    std::vector<double> p0() const override { return {}; }
    std::vector<double> xc0() const override { return {0.0, 0.0, 0.0, 0.0}; }
    std::string name() const override { return friction_ ? "ball_gt" : "ball_fpm"; }

    const BallConsts& consts() const { return consts_; }

    template <class T>
    void fc_impl(std::span<const T> xc, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                 std::span<T> dxc) const {
        const T& vx = xc[1];
        const T& vy = xc[3];
        dxc[0] = vx;
        dxc[2] = vy;
        if (friction_) {
            using std::sqrt;
            const T v = sqrt(vx * vx + vy * vy);
            const T drag = v * T(consts_.mu / consts_.m);
            dxc[1] = T(0.0) - vx * drag;
            dxc[3] = T(-consts_.g) - vy * drag;
        } else {
            dxc[1] = T(0.0);
            dxc[3] = T(-consts_.g);
        }
    }

    template <class T>
    void g_impl(std::span<const T>, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                std::span<T>) const {}

    template <class T>
    void c_impl(std::span<const T> xc, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                std::span<T> z) const {
        // grouped as (1 - r) +- s so the indicators are exactly zero on the
        // post-affect states s = +-(1 - r)
        const T wall(1.0 - consts_.r);
        z[0] = wall + xc[0];
        z[1] = wall - xc[0];
        z[2] = wall + xc[2];
        z[3] = wall - xc[2];
    }

    template <class T>
    void a_impl(std::span<const T> xc, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                const EventQ& q, std::span<T> xc_post, std::span<T>) const {
        for (std::size_t i = 0; i < 4; ++i) xc_post[i] = xc[i];
        const T damp(1.0 - consts_.d);
        if (q.test(0)) {
            xc_post[0] = T(-1.0 + consts_.r);
            xc_post[1] = -xc[1] * damp;
        }
        if (q.test(1)) {
            xc_post[0] = T(1.0 - consts_.r);
            xc_post[1] = -xc[1] * damp;
        }
        if (q.test(2)) {
            xc_post[2] = T(-1.0 + consts_.r);
            xc_post[3] = -xc[3] * damp;
        }
        if (q.test(3)) {
            xc_post[2] = T(1.0 - consts_.r);
            xc_post[3] = -xc[3] * damp;
        }
    }

private:
    BallConsts consts_;
    bool friction_;
    Dims dims_;
};

/// The first-principles model (no air friction).
ModelPtr build_fpm(BallConsts consts = {});

/// The data-generating model (quadratic air friction added to both
/// accelerations).
ModelPtr build_ground_truth(BallConsts consts = {});

/// Benchmark scenario: initial state, role and time span.
struct Scenario {
    int id = 0;
    std::vector<double> x0;
    bool training = true;
    std::pair<double, double> tspan{0.0, 2.1};
};

/// Scenarios 1-4 train, 5 tests. Throws UnknownScenario outside {1..5}.
Scenario scenario(int s);

/// Built-in scenario set, overridable from a JSON document of the form
/// [{"id": 1, "x0": [..4 entries..], "training": true, "tspan": [0.0, 2.1]}, ...].
std::vector<Scenario> default_scenarios();
std::vector<Scenario> scenarios_from_json(const std::string& text);
std::vector<Scenario> load_scenarios_json(const std::string& path);

/// Uniformly sampled reference data for one scenario.
struct Dataset {
    int scenario_id = 0;
    std::pair<double, double> tspan{0.0, 2.1};
    std::vector<double> x0;
    std::vector<double> times;
    std::vector<std::vector<double>> states; // one row per time
};

/// Integrates the given truth model from x0 at tight tolerances
/// (rel 1e-9) and samples it on the uniform grid k/sample_hz.
Dataset generate_dataset(const HudaModel& truth, std::span<const double> x0,
                         std::pair<double, double> tspan, double sample_hz, int scenario_id = 0);

/// As above on an explicit (ascending) sample grid.
Dataset generate_dataset(const HudaModel& truth, std::span<const double> x0,
                         std::pair<double, double> tspan, std::vector<double> times, int scenario_id);

/// Ground-truth dataset of a benchmark scenario.
Dataset generate_dataset(const Scenario& sc, double sample_hz);

/// Sample grid for the hold-type (discrete) variants: t0 plus the midpoints
/// of the 10 Hz hold intervals, where the held state is well defined.
std::vector<double> rnn_sample_times(std::pair<double, double> tspan);

void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

/// The four model families that share the training loop.
enum class VariantKind { Continuous, Discrete, ContinuousEvent, DiscreteEvent };

VariantKind parse_variant(const std::string& name);
std::string variant_name(VariantKind kind);

/// Builds one of the common-interface variants:
///  - Continuous: neural ODE, f_c = FFNN(x_c)
///  - Discrete: RNN, discrete state updated by an FFNN at 10 Hz time events
///  - *Event: the same extended by the bouncing-ball wall events
ModelPtr build_variant(VariantKind kind, std::uint64_t seed, BallConsts consts = {});

/// Initial model state matching a ball state for the given variant.
std::pair<std::vector<double>, std::vector<double>> variant_initial_state(VariantKind kind,
                                                                          std::span<const double> ball_x0);

/// Sampling period of the discrete variants' time events, seconds.
inline constexpr double kRnnPeriod = 0.1;

} // namespace huda
