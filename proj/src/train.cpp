#include "huda/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "huda/rng.hpp"

namespace huda {

namespace {

constexpr double kHorizonSlack = 1e-9;

std::vector<std::size_t> times_within(const Dataset& data, double horizon) {
    const double cutoff = data.tspan.first + horizon + kHorizonSlack;
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < data.times.size(); ++k)
        if (data.times[k] <= cutoff) idx.push_back(k);
    if (idx.empty())
        throw EmptyHorizon("no data sample within horizon " + std::to_string(horizon));
    return idx;
}

} // namespace

double mae_loss(const Trajectory& traj, const Dataset& data, const LossSpec& spec, double horizon) {
    const auto idx = times_within(data, horizon);
    const std::size_t n_ch = spec.channel_scales.size();
    double acc = 0.0;
    for (std::size_t k : idx) {
        const auto [xc, xd] = traj.eval(data.times[k]);
        const auto& ref = data.states[k];
        if (ref.size() < n_ch) throw DimensionMismatch("dataset has fewer channels than the loss spec");
        for (std::size_t c = 0; c < n_ch; ++c) {
            const double x = c < xc.size() ? xc[c] : xd[c - xc.size()];
            acc += std::abs(spec.channel_scales[c] * (x - ref[c]));
        }
    }
    return acc / static_cast<double>(idx.size() * n_ch);
}

namespace {

template <class T>
class LossSink final : public SampleSink<T> {
public:
    LossSink(const Dataset& data, const std::vector<std::size_t>& idx, const LossSpec& spec)
        : data_(data), idx_(idx), spec_(spec) {}

    void on_grid(const T&, std::span<const T> xc, std::span<const T> xd) override {
        const auto& ref = data_.states[idx_[cursor_++]];
        const std::size_t n_ch = spec_.channel_scales.size();
        using std::abs;
        for (std::size_t c = 0; c < n_ch; ++c) {
            const T& x = c < xc.size() ? xc[c] : xd[c - xc.size()];
            acc_ += abs(T(spec_.channel_scales[c]) * (x - T(ref[c])));
        }
    }

    T mae() const { return acc_ / T(static_cast<double>(idx_.size() * spec_.channel_scales.size())); }

private:
    const Dataset& data_;
    const std::vector<std::size_t>& idx_;
    const LossSpec& spec_;
    std::size_t cursor_ = 0;
    T acc_{0.0};
};

} // namespace

template <class T>
T simulate_loss(const HudaModel& model, const Dataset& data, std::span<const T> p,
                std::span<const double> xc0, std::span<const double> xd0, double horizon,
                const LossSpec& spec, const SolverOpts& solver) {
    const auto idx = times_within(data, horizon);
    const std::size_t n_ch = spec.channel_scales.size();
    if (model.dims().n_x() < n_ch)
        throw DimensionMismatch("model state has fewer channels than the loss spec");

    SolverOpts opts = solver;
    opts.dense_sampling.clear();
    for (std::size_t k : idx) opts.dense_sampling.push_back(data.times[k]);
    const double tf = std::min(data.tspan.second, data.tspan.first + horizon);
    const std::pair<double, double> tspan{data.tspan.first, std::max(tf, opts.dense_sampling.back())};

    std::vector<T> xc(xc0.begin(), xc0.end());
    std::vector<T> xd(xd0.begin(), xd0.end());
    LossSink<T> sink(data, idx, spec);
    integrate_sink<T>(model, xc, xd, p, tspan, opts, sink);
    return sink.mae();
}

template double simulate_loss<double>(const HudaModel&, const Dataset&, std::span<const double>,
                                      std::span<const double>, std::span<const double>, double,
                                      const LossSpec&, const SolverOpts&);
template Dual simulate_loss<Dual>(const HudaModel&, const Dataset&, std::span<const Dual>,
                                  std::span<const double>, std::span<const double>, double, const LossSpec&,
                                  const SolverOpts&);

void adam_step(TrainState& state, std::span<const double> grad) {
    if (grad.size() != state.params.size())
        throw DimensionMismatch("gradient length does not match parameter count");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw NonFiniteGradient("non-finite gradient entry " + std::to_string(i),
                                    static_cast<long>(i));
    state.step_count += 1;
    const auto& a = state.adam;
    const double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        state.m[i] = a.beta1 * state.m[i] + (1.0 - a.beta1) * grad[i];
        state.v[i] = a.beta2 * state.v[i] + (1.0 - a.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        state.params[i] -= a.eta * mhat / (std::sqrt(vhat) + a.eps);
    }
}

double growing_horizon_update(TrainState& state, double worst_scenario_mae, double threshold,
                              double increment) {
    if (worst_scenario_mae < threshold)
        state.horizon = std::min(state.horizon + increment, state.horizon_max);
    return state.horizon;
}

std::pair<std::vector<double>, std::vector<double>> initial_state_for(const HudaModel& model,
                                                                      const Dataset& data) {
    const Dims& d = model.dims();
    if (d.n_xc == data.x0.size()) return {data.x0, model.xd0()};
    if (d.n_xc == 0 && d.n_xd >= data.x0.size()) {
        std::vector<double> xd = model.xd0();
        std::copy(data.x0.begin(), data.x0.end(), xd.begin());
        return {{}, xd};
    }
    return {model.xc0(), model.xd0()};
}

double evaluate_mae(const HudaModel& model, const Dataset& data, std::span<const double> params,
                    double horizon, const LossSpec& spec, const SolverOpts& solver,
                    const std::pair<std::vector<double>, std::vector<double>>* initial) {
    const auto init = initial ? *initial : initial_state_for(model, data);
    return simulate_loss<double>(model, data, params, init.first, init.second, horizon, spec, solver);
}

TrainResult train(const HudaModel& model, const std::vector<Dataset>& datasets, const TrainConfig& config) {
    if (datasets.empty()) throw HudaError("training requires at least one dataset");

    TrainResult result;
    TrainState& state = result.state;
    state.params = model.p0();
    state.m.assign(state.params.size(), 0.0);
    state.v.assign(state.params.size(), 0.0);
    state.adam = config.adam;
    state.seed = config.seed;
    const double span = datasets.front().tspan.second - datasets.front().tspan.first;
    state.horizon_max = span;
    state.horizon = config.horizon_init_frac * span;

    std::vector<std::pair<std::vector<double>, std::vector<double>>> inits;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        if (i < config.initial_states.size() && (!config.initial_states[i].first.empty() ||
                                                 !config.initial_states[i].second.empty()))
            inits.push_back(config.initial_states[i]);
        else
            inits.push_back(initial_state_for(model, datasets[i]));
    }

    Rng rng(config.seed);
    result.history.reserve(config.steps);
    for (std::uint64_t step = 1; step <= config.steps; ++step) {
        const std::size_t pick = rng.index(datasets.size());
        const Dataset& data = datasets[pick];
        const auto& init = inits[pick];
        DualLossFn loss_fn = [&](std::span<const Dual> p) {
            return simulate_loss<Dual>(model, data, p, init.first, init.second, state.horizon, config.loss,
                                       config.solver);
        };
        GradResult g;
        try {
            g = gradient(loss_fn, state.params, config.chunk);
        } catch (HudaError& e) {
            throw HudaError("training step " + std::to_string(step) + ": " + e.what());
        }
        result.history.push_back(LossEntry{step, data.scenario_id, state.horizon, g.value});
        adam_step(state, g.grad);

        if (config.eval_every > 0 && step % config.eval_every == 0 && state.horizon < state.horizon_max) {
            double worst = 0.0;
            for (std::size_t i = 0; i < datasets.size(); ++i)
                worst = std::max(worst, evaluate_mae(model, datasets[i], state.params, state.horizon,
                                                     config.loss, config.solver, &inits[i]));
            growing_horizon_update(state, worst, config.horizon_threshold, config.horizon_increment);
        }
    }
    return result;
}

void save_checkpoint(const TrainState& state, const std::string& path) {
    nlohmann::json j;
    j["params"] = state.params;
    j["m"] = state.m;
    j["v"] = state.v;
    j["step"] = state.step_count;
    j["horizon"] = state.horizon;
    j["horizon_max"] = state.horizon_max;
    j["seed"] = state.seed;
    j["adam"] = {{"eta", state.adam.eta},
                 {"beta1", state.adam.beta1},
                 {"beta2", state.adam.beta2},
                 {"eps", state.adam.eps}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j = nlohmann::json::parse(ss.str());
    TrainState state;
    state.params = j.at("params").get<std::vector<double>>();
    state.m = j.at("m").get<std::vector<double>>();
    state.v = j.at("v").get<std::vector<double>>();
    state.step_count = j.at("step").get<std::uint64_t>();
    state.horizon = j.at("horizon").get<double>();
    state.horizon_max = j.at("horizon_max").get<double>();
    state.seed = j.at("seed").get<std::uint64_t>();
    state.adam.eta = j.at("adam").at("eta").get<double>();
    state.adam.beta1 = j.at("adam").at("beta1").get<double>();
    state.adam.beta2 = j.at("adam").at("beta2").get<double>();
    state.adam.eps = j.at("adam").at("eps").get<double>();
    return state;
}

void write_loss_history_csv(const std::vector<LossEntry>& history, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    std::fprintf(f, "step,scenario,horizon,loss\n");
    for (const auto& e : history)
        std::fprintf(f, "%llu,%d,%.17g,%.17g\n", static_cast<unsigned long long>(e.step), e.scenario,
                     e.horizon, e.loss);
    std::fclose(f);
}

} // namespace huda
