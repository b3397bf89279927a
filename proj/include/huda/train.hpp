#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "huda/bench.hpp"
#include "huda/grad.hpp"
#include "huda/model.hpp"
#include "huda/solve.hpp"

namespace huda {

/// Scaled mean-absolute-error loss: mean over the compared sample times and
/// channels of |scale_i (x_i - ref_i)|. The benchmark scales positions by
/// 0.5 and velocities by 0.1.
struct LossSpec {
    std::vector<double> channel_scales{0.5, 0.1, 0.5, 0.1};
};

/// MAE between the trajectory (through its continuous extension) and the
/// dataset, over data times within [t0, t0 + horizon]. Throws EmptyHorizon
/// when no data time falls inside.
double mae_loss(const Trajectory& traj, const Dataset& data, const LossSpec& spec, double horizon);

/// Simulates the model from (xc0, xd0) with parameters p over the horizon
/// and accumulates the same loss on the fly; plain and dual paths share the
/// value arithmetic bitwise.
template <class T>
T simulate_loss(const HudaModel& model, const Dataset& data, std::span<const T> p,
                std::span<const double> xc0, std::span<const double> xd0, double horizon,
                const LossSpec& spec, const SolverOpts& solver);

extern template double simulate_loss<double>(const HudaModel&, const Dataset&, std::span<const double>,
                                             std::span<const double>, std::span<const double>, double,
                                             const LossSpec&, const SolverOpts&);
extern template Dual simulate_loss<Dual>(const HudaModel&, const Dataset&, std::span<const Dual>,
                                         std::span<const double>, std::span<const double>, double,
                                         const LossSpec&, const SolverOpts&);

struct AdamParams {
    double eta = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Optimizer and schedule state: flat parameters, Adam moments, the growing
/// horizon cursor and the run seed.
struct TrainState {
    std::vector<double> params;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step_count = 0;
    AdamParams adam;
    double horizon = 0.0;
    double horizon_max = 0.0;
    std::uint64_t seed = 0;
};

/// Bias-corrected Adam update in place. Throws NonFiniteGradient.
void adam_step(TrainState& state, std::span<const double> grad);

/// Raises the horizon by `increment` when the worst training-scenario MAE
/// falls under `threshold`, clamped at the full span. Returns the new value.
double growing_horizon_update(TrainState& state, double worst_scenario_mae, double threshold = 0.05,
                              double increment = 0.01);

struct TrainConfig {
    std::uint64_t steps = 3000;
    std::uint64_t seed = 1;
    std::size_t chunk = kMaxTangents;
    std::uint64_t eval_every = 1;        ///< worst-scenario MAE cadence, steps (0 freezes the horizon)
    double horizon_init_frac = 0.05;
    double horizon_increment = 0.01;
    double horizon_threshold = 0.05;
    AdamParams adam;
    SolverOpts solver;
    LossSpec loss;
    /// Per-dataset initial model state; derived from the dataset x0 when
    /// absent (matching continuous or leading discrete states).
    std::vector<std::pair<std::vector<double>, std::vector<double>>> initial_states;
};

struct LossEntry {
    std::uint64_t step = 0;
    int scenario = 0;
    double horizon = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    TrainState state;
    std::vector<LossEntry> history;
};

/// Initial model state for a dataset: continuous states when the sizes
/// match, leading discrete states for purely discrete models, the model
/// defaults otherwise.
std::pair<std::vector<double>, std::vector<double>> initial_state_for(const HudaModel& model,
                                                                      const Dataset& data);

/// The shared training loop: per step one scenario is drawn uniformly at
/// random (seeded), simulated over the current horizon, and the scaled MAE
/// gradient drives one Adam step; every eval_every steps the worst-scenario
/// MAE gates the growing horizon. Bit-reproducible per (seed, config).
TrainResult train(const HudaModel& model, const std::vector<Dataset>& datasets, const TrainConfig& config);

/// Evaluates the model MAE against one dataset at the given parameters.
double evaluate_mae(const HudaModel& model, const Dataset& data, std::span<const double> params,
                    double horizon, const LossSpec& spec, const SolverOpts& solver,
                    const std::pair<std::vector<double>, std::vector<double>>* initial = nullptr);

/// Checkpoint (exact JSON round trip) and loss history CSV.
void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);
void write_loss_history_csv(const std::vector<LossEntry>& history, const std::string& path);

} // namespace huda
