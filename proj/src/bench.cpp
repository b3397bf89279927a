#include "huda/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "huda/rng.hpp"

namespace huda {

ModelPtr build_fpm(BallConsts consts) { return std::make_shared<BouncingBallModel>(consts, false); }

ModelPtr build_ground_truth(BallConsts consts) { return std::make_shared<BouncingBallModel>(consts, true); }

Scenario scenario(int s) {
    Scenario sc;
    sc.id = s;
    switch (s) {
    case 1: sc.x0 = {-0.25, -6.0, 0.5, 8.0}; break;
    case 2: sc.x0 = {0.5, 8.0, -0.25, -6.0}; break;
    case 3: sc.x0 = {0.0, 0.0, 0.0, 4.0}; break;
    case 4: sc.x0 = {-0.75, 4.0, -0.5, 6.0}; break;
    case 5:
        sc.x0 = {-0.5, 2.0, 0.5, 2.0};
        sc.training = false;
        break;
    default: throw UnknownScenario("scenario id must be in 1..5, got " + std::to_string(s));
    }
    return sc;
}

std::vector<Scenario> default_scenarios() {
    std::vector<Scenario> all;
    for (int s = 1; s <= 5; ++s) all.push_back(scenario(s));
    return all;
}

std::vector<Scenario> scenarios_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_array() || j.empty()) throw IoError("scenario config must be a non-empty JSON array");
    std::vector<Scenario> out;
    for (const auto& e : j) {
        Scenario sc;
        sc.id = e.at("id").get<int>();
        sc.x0 = e.at("x0").get<std::vector<double>>();
        sc.training = e.value("training", true);
        if (e.contains("tspan")) {
            const auto span = e.at("tspan").get<std::vector<double>>();
            if (span.size() != 2) throw IoError("scenario tspan must have two entries");
            sc.tspan = {span[0], span[1]};
        }
        out.push_back(std::move(sc));
    }
    return out;
}

std::vector<Scenario> load_scenarios_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    return scenarios_from_json(ss.str());
}

Dataset generate_dataset(const HudaModel& truth, std::span<const double> x0,
                         std::pair<double, double> tspan, double sample_hz, int scenario_id) {
    if (!(sample_hz > 0.0)) throw HudaError("sample_hz must be positive");
    const auto n = static_cast<std::size_t>(std::floor((tspan.second - tspan.first) * sample_hz)) + 1;
    std::vector<double> times(n);
    for (std::size_t k = 0; k < n; ++k) times[k] = tspan.first + static_cast<double>(k) / sample_hz;
    return generate_dataset(truth, x0, tspan, std::move(times), scenario_id);
}

Dataset generate_dataset(const HudaModel& truth, std::span<const double> x0,
                         std::pair<double, double> tspan, std::vector<double> times, int scenario_id) {
    Dataset data;
    data.scenario_id = scenario_id;
    data.tspan = tspan;
    data.x0.assign(x0.begin(), x0.end());
    data.times = std::move(times);

    SolverOpts opts;
    opts.rel_tol = 1e-9;
    opts.abs_tol = 1e-11;
    opts.dense_sampling = data.times;

    struct GridSink final : SampleSink<double> {
        Dataset* out;
        void on_grid(const double& t, std::span<const double> xc, std::span<const double> xd) override {
            (void)t;
            std::vector<double> row(xc.begin(), xc.end());
            row.insert(row.end(), xd.begin(), xd.end());
            out->states.push_back(std::move(row));
        }
    } sink;
    sink.out = &data;

    const std::vector<double> xd0 = truth.xd0();
    const std::vector<double> p = truth.p0();
    std::vector<double> xc0(x0.begin(), x0.begin() + static_cast<std::ptrdiff_t>(truth.dims().n_xc));
    integrate_sink<double>(truth, xc0, xd0, p, tspan, opts, sink);
    if (data.states.size() != data.times.size())
        throw HudaError("dataset sampling mismatch: " + std::to_string(data.states.size()) + " rows for " +
                        std::to_string(data.times.size()) + " grid points");
    return data;
}

Dataset generate_dataset(const Scenario& sc, double sample_hz) {
    const auto truth = build_ground_truth();
    return generate_dataset(*truth, sc.x0, sc.tspan, sample_hz, sc.id);
}

std::vector<double> rnn_sample_times(std::pair<double, double> tspan) {
    std::vector<double> times{tspan.first};
    for (double t = tspan.first + 0.5 * kRnnPeriod; t <= tspan.second - 0.499 * kRnnPeriod; t += kRnnPeriod)
        times.push_back(t);
    return times;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    const std::size_t n = data.states.empty() ? 0 : data.states.front().size();
    std::fprintf(f, "t,minor");
    for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",x%zu", i);
    std::fprintf(f, "\n");
    for (std::size_t k = 0; k < data.times.size(); ++k) {
        std::fprintf(f, "%.17g,0", data.times[k]);
        for (double v : data.states[k]) std::fprintf(f, ",%.17g", v);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

Dataset read_dataset_csv(const std::string& path) {
    const CsvTable table = read_trajectory_csv(path);
    Dataset data;
    data.times = table.t;
    data.states = table.x;
    if (!data.times.empty()) {
        data.tspan = {data.times.front(), data.times.back()};
        data.x0 = data.states.front();
    }
    return data;
}

namespace {

FfnnSpec variant_ffnn_spec() {
    return FfnnSpec{{LayerSpec{4, 24, Activation::Tanh}, LayerSpec{24, 4, Activation::Linear}}};
}

/// Hidden width of the recurrent variants: the ball-state estimate plus a
/// latent block that gives the one-step map room to represent the bounce.
constexpr std::size_t kRnnHidden = 8;

FfnnSpec rnn_ffnn_spec() {
    return FfnnSpec{{LayerSpec{kRnnHidden, 24, Activation::Tanh}, LayerSpec{24, kRnnHidden, Activation::Linear}}};
}

/// Near-identity initialization for the recurrent update: the first four
/// hidden units carry (1/alpha) tanh(alpha h) ~ h, the rest start as small
/// noise. The 0.1 s flow map the network has to learn is itself close to
/// the identity, so training starts near the right operating point.
std::vector<double> init_ffnn_identity(const FfnnSpec& spec, std::uint64_t seed) {
    constexpr double kAlpha = 0.05;
    constexpr double kNoise = 0.01;
    Rng rng(seed);
    std::vector<double> p;
    p.reserve(spec.n_params());
    const LayerSpec& l1 = spec.layers.at(0);
    for (std::size_t r = 0; r < l1.out; ++r)
        for (std::size_t c = 0; c < l1.in; ++c)
            p.push_back((r == c ? kAlpha : 0.0) + rng.uniform_sym(kNoise) * kAlpha);
    for (std::size_t r = 0; r < l1.out; ++r) p.push_back(0.0);
    const LayerSpec& l2 = spec.layers.at(1);
    for (std::size_t r = 0; r < l2.out; ++r)
        for (std::size_t c = 0; c < l2.in; ++c)
            p.push_back((r == c ? 1.0 / kAlpha : 0.0) + rng.uniform_sym(kNoise));
    for (std::size_t r = 0; r < l2.out; ++r) p.push_back(0.0);
    return p;
}

/// Neural ODE over the ball state, optionally with the wall events.
class NeuralOdeModel : public ModelBase<NeuralOdeModel> {
public:
    NeuralOdeModel(std::uint64_t seed, bool wall_events, BallConsts consts)
        : spec_(variant_ffnn_spec()), ball_(consts, false) {
        dims_ = Dims{4, 0, 0, 0, wall_events ? std::size_t(4) : std::size_t(0), spec_.n_params()};
        p0_ = init_ffnn(spec_, seed);
        events_ = wall_events;
    }

    const Dims& dims() const override { return dims_; }
    std::vector<double> p0() const override { return p0_; }
    std::vector<double> xc0() const override { return {0.0, 0.0, 0.0, 0.0}; }
    std::string name() const override { return events_ ? "neural_ode_event" : "neural_ode"; }

    template <class T>
    void fc_impl(std::span<const T> xc, std::span<const T>, std::span<const T>, std::span<const T> p, const T&,
                 std::span<T> dxc) const {
        ffnn_forward<T>(spec_, p, xc, dxc);
    }
    template <class T>
    void g_impl(std::span<const T>, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                std::span<T>) const {}
    template <class T>
    void c_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T> u, std::span<const T>,
                const T& t, std::span<T> z) const {
        if (events_) ball_.c_impl<T>(xc, xd, u, {}, t, z);
    }
    template <class T>
    void a_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T> u, std::span<const T>,
                const T& t, const EventQ& q, std::span<T> xc_post, std::span<T>) const {
        ball_.a_impl<T>(xc, xd, u, {}, t, q, xc_post, {});
    }

private:
    FfnnSpec spec_;
    BouncingBallModel ball_;
    Dims dims_;
    std::vector<double> p0_;
    bool events_ = false;
};

/// RNN: hidden state in x_d[0..3], the index of the next sample event in
/// x_d[4] (so the 10 Hz schedule stays exact under accumulation). The hidden
/// state advances by one FFNN inference per time event; with wall events
/// enabled the ball affect additionally acts on the hidden state.
class RnnModel : public ModelBase<RnnModel> {
public:
    RnnModel(std::uint64_t seed, bool wall_events, BallConsts consts)
        : spec_(rnn_ffnn_spec()), ball_(consts, false) {
        dims_ = Dims{0, kRnnHidden + 1, 0, 4, wall_events ? std::size_t(5) : std::size_t(1), spec_.n_params()};
        p0_ = init_ffnn_identity(spec_, seed);
        events_ = wall_events;
    }

    const Dims& dims() const override { return dims_; }
    std::vector<double> p0() const override { return p0_; }
    std::vector<double> xc0() const override { return {}; }
    std::vector<double> xd0() const override {
        std::vector<double> xd(kRnnHidden + 1, 0.0);
        xd[kRnnHidden] = 1.0;
        return xd;
    }
    std::string name() const override { return events_ ? "rnn_event" : "rnn"; }

    template <class T>
    void fc_impl(std::span<const T>, std::span<const T>, std::span<const T>, std::span<const T>, const T&,
                 std::span<T>) const {}
    template <class T>
    void g_impl(std::span<const T>, std::span<const T> xd, std::span<const T>, std::span<const T>, const T&,
                std::span<T> y) const {
        for (std::size_t i = 0; i < 4; ++i) y[i] = xd[i];
    }
    template <class T>
    void c_impl(std::span<const T>, std::span<const T> xd, std::span<const T> u, std::span<const T>,
                const T& t, std::span<T> z) const {
        if (events_) {
            ball_.c_impl<T>(xd.first(4), {}, u, {}, t, z.first(4));
            z[4] = T(kRnnPeriod) * xd[kRnnHidden] - t;
        } else {
            z[0] = T(kRnnPeriod) * xd[kRnnHidden] - t;
        }
    }
    template <class T>
    void a_impl(std::span<const T>, std::span<const T> xd, std::span<const T> u, std::span<const T> p,
                const T& t, const EventQ& q, std::span<T>, std::span<T> xd_post) const {
        for (std::size_t i = 0; i < kRnnHidden + 1; ++i) xd_post[i] = xd[i];
        const std::size_t time_ind = events_ ? 4 : 0;
        if (q.test(time_ind)) {
            ffnn_forward<T>(spec_, p, xd.first(kRnnHidden), xd_post.first(kRnnHidden));
            xd_post[kRnnHidden] = xd[kRnnHidden] + T(1.0);
        }
        if (events_) {
            EventQ wall(4);
            bool any = false;
            for (std::size_t i = 0; i < 4; ++i)
                if (q.test(i)) {
                    wall.set(i);
                    any = true;
                }
            if (any) {
                std::vector<T> tmp(xd_post.begin(), xd_post.begin() + 4);
                ball_.a_impl<T>(std::span<const T>(tmp), {}, u, {}, t, wall, xd_post.first(4), {});
            }
        }
    }

private:
    FfnnSpec spec_;
    BouncingBallModel ball_;
    Dims dims_;
    std::vector<double> p0_;
    bool events_ = false;
};

} // namespace

VariantKind parse_variant(const std::string& name) {
    if (name == "continuous") return VariantKind::Continuous;
    if (name == "discrete") return VariantKind::Discrete;
    if (name == "continuous+event") return VariantKind::ContinuousEvent;
    if (name == "discrete+event") return VariantKind::DiscreteEvent;
    throw UnknownKind("unknown variant '" + name +
                      "' (expected continuous, discrete, continuous+event, discrete+event)");
}

std::string variant_name(VariantKind kind) {
    switch (kind) {
    case VariantKind::Continuous: return "continuous";
    case VariantKind::Discrete: return "discrete";
    case VariantKind::ContinuousEvent: return "continuous+event";
    default: return "discrete+event";
    }
}

ModelPtr build_variant(VariantKind kind, std::uint64_t seed, BallConsts consts) {
    switch (kind) {
    case VariantKind::Continuous: return std::make_shared<NeuralOdeModel>(seed, false, consts);
    case VariantKind::ContinuousEvent: return std::make_shared<NeuralOdeModel>(seed, true, consts);
    case VariantKind::Discrete: return std::make_shared<RnnModel>(seed, false, consts);
    default: return std::make_shared<RnnModel>(seed, true, consts);
    }
}

std::pair<std::vector<double>, std::vector<double>> variant_initial_state(VariantKind kind,
                                                                          std::span<const double> ball_x0) {
    std::vector<double> x0(ball_x0.begin(), ball_x0.end());
    if (kind == VariantKind::Continuous || kind == VariantKind::ContinuousEvent) return {x0, {}};
    x0.resize(kRnnHidden, 0.0); // latent block starts at rest
    x0.push_back(1.0);          // first scheduled sample event
    return {{}, x0};
}

} // namespace huda
