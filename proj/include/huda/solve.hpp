#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "huda/model.hpp"

namespace huda {

/// Options for the adaptive embedded Runge-Kutta integration.
struct SolverOpts {
    double rel_tol = 1e-6;
    double abs_tol = 1e-8;
    double max_step = 0.0;          ///< 0: use 0.05 * (tf - t0)
    double event_time_tol = 1e-10;  ///< event localization accuracy, seconds
    int max_events_per_instant = 8; ///< cascade limit at one super-dense instant
    double event_zero_band = 1e-9;  ///< indicators within the band count as "on the surface"
    std::vector<double> dense_sampling; ///< optional fixed output grid (ascending)
    bool record_nodes = true;       ///< keep accepted-step samples in the trajectory
};

/// One trajectory sample: state at a super-dense time point.
struct Sample {
    SuperDenseTime when;
    std::vector<double> xc;
    std::vector<double> xd;
};

/// One handled event: which indicators fired, the source event group, and
/// the state before/after the affect.
struct EventRecord {
    SuperDenseTime when; ///< pre-event instant; the post state lives at minor+1
    int group = 0;       ///< index into the model's event_groups()
    EventQ q;
    std::vector<double> x_pre;  ///< xc ++ xd
    std::vector<double> x_post; ///< xc ++ xd
};

/// Continuous extension of one accepted step (4th-order interpolant),
/// truncated at events. Evaluation uses theta = (t - t0) / h.
template <class T>
struct DenseSeg {
    T t0{};
    double h = 0.0;    ///< step length the polynomial was built on
    double span = 0.0; ///< valid length (shorter than h when cut by an event)
    std::uint32_t minor = 0;
    std::array<std::vector<T>, 5> rcont; // interpolation coefficients, n_xc each
    std::vector<T> xd;                   // discrete state on the segment

    void eval_xc(const T& t, std::span<T> out) const {
        const T theta = (t - t0) / T(h);
        const T om = T(1.0) - theta;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = rcont[0][i] +
                     theta * (rcont[1][i] + om * (rcont[2][i] + theta * (rcont[3][i] + om * rcont[4][i])));
        }
    }
};

using DenseSegment = DenseSeg<double>;

/// Super-dense-time sequence of samples with event records and the
/// piecewise continuous extension between events.
struct Trajectory {
    std::vector<Sample> samples;
    std::vector<EventRecord> events;
    std::vector<DenseSegment> segments;
    double t_begin = 0.0;
    double t_end = 0.0;

    /// State at time t through the continuous extension (pre-event segment
    /// at event instants). Clamps to the covered span.
    std::pair<std::vector<double>, std::vector<double>> eval(double t) const;

    const Sample& final_sample() const { return samples.back(); }
};

/// Streaming consumer of integration results. The engine reports accepted
/// nodes and event pairs (on_sample), interpolated states on the requested
/// dense grid (on_grid), handled events, and finished dense segments.
template <class T>
class SampleSink {
public:
    virtual ~SampleSink() = default;
    virtual void on_sample(const SuperDenseTime&, std::span<const T> /*xc*/, std::span<const T> /*xd*/) {}
    virtual void on_grid(const T& /*t*/, std::span<const T> /*xc*/, std::span<const T> /*xd*/) {}
    virtual void on_event(const SuperDenseTime&, int /*group*/, const EventQ&, std::span<const T> /*xc_pre*/,
                          std::span<const T> /*xd_pre*/, std::span<const T> /*xc_post*/,
                          std::span<const T> /*xd_post*/) {}
    virtual bool wants_segments() const { return false; }
    virtual void on_segment(const DenseSeg<T>&) {}
};

/// Core integration loop; identical code for plain and dual scalars. Step
/// acceptance and event localization read scalar values only, so the step
/// sequence is tangent-independent.
template <class T>
void integrate_sink(const HudaModel& model, std::span<const T> xc0, std::span<const T> xd0,
                    std::span<const T> p, std::pair<double, double> tspan, const SolverOpts& opts,
                    SampleSink<T>& sink);

extern template void integrate_sink<double>(const HudaModel&, std::span<const double>, std::span<const double>,
                                            std::span<const double>, std::pair<double, double>,
                                            const SolverOpts&, SampleSink<double>&);
extern template void integrate_sink<Dual>(const HudaModel&, std::span<const Dual>, std::span<const Dual>,
                                          std::span<const Dual>, std::pair<double, double>, const SolverOpts&,
                                          SampleSink<Dual>&);

/// Integrates and materializes the trajectory.
Trajectory integrate(const HudaModel& model, std::span<const double> xc0, std::span<const double> xd0,
                     std::span<const double> p, std::pair<double, double> tspan, const SolverOpts& opts = {});

/// Convenience overload starting from the model's own initial state and
/// parameters.
Trajectory integrate(const HudaModel& model, std::pair<double, double> tspan, const SolverOpts& opts = {});

/// Localizes the earliest zero crossing of any event indicator on one dense
/// segment within [t_lo, t_hi]. Returns the crossing time and the multi-hot
/// q of every indicator crossing within event_time_tol of it. Throws
/// NoCrossing when no indicator changes sign across the bracket.
std::pair<double, EventQ> locate_event(const DenseSegment& seg, const HudaModel& model,
                                       std::span<const double> p, double t_lo, double t_hi,
                                       double event_time_tol = 1e-10);

/// CSV export: header `t,minor,x1..xn`, one row per sample, 17 significant
/// digits. Events go to a sidecar `t,minor,source,q,pre...,post...`.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
void write_events_csv(const Trajectory& traj, const std::string& path, std::size_t n_groups = 1);

/// Reads a trajectory-format CSV back into (times, minors, states).
struct CsvTable {
    std::vector<double> t;
    std::vector<std::uint32_t> minor;
    std::vector<std::vector<double>> x; // one row per sample
};
CsvTable read_trajectory_csv(const std::string& path);

} // namespace huda
