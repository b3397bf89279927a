#include "huda/solve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

namespace huda {

namespace {

// Dormand-Prince 5(4) tableau with FSAL and the 4th-order continuous
// extension coefficients.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kE[7] = {71.0 / 57600, 0.0,        -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
constexpr double kD[7] = {-12715105075.0 / 11282082432.0,
                          0.0,
                          87487479700.0 / 32700410799.0,
                          -10690763975.0 / 1880347072.0,
                          701980252875.0 / 199316789632.0,
                          -1453857185.0 / 822651844.0,
                          69997945.0 / 29380423.0};

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

void force_value(double& t, double v) { t = v; }
void force_value(Dual& t, double v) { t.set_value(v); }

/// Integration engine for one scalar type. Control flow (step acceptance,
/// event sign tests, bisection) reads values only.
template <class T>
class Engine {
public:
    Engine(const HudaModel& model, std::span<const T> xc0, std::span<const T> xd0, std::span<const T> p,
           std::pair<double, double> tspan, const SolverOpts& opts, SampleSink<T>& sink)
        : model_(model), opts_(opts), sink_(sink), p_(p), t_begin_(tspan.first), t_final_(tspan.second) {
        const Dims& d = model_.dims();
        nx_ = d.n_xc;
        nz_ = d.n_z;
        if (xc0.size() != d.n_xc || xd0.size() != d.n_xd)
            throw DimensionMismatch("initial state does not match model dims");
        if (p_.size() != d.n_p) throw DimensionMismatch("parameter vector does not match model dims");
        if (!(t_final_ > t_begin_)) throw HudaError("tspan must satisfy tf > t0");
        xc_.assign(xc0.begin(), xc0.end());
        xd_.assign(xd0.begin(), xd0.end());
        u_.assign(d.n_u, T(0.0));
        for (auto& ki : k_) ki.assign(nx_, T(0.0));
        y_stage_.assign(nx_, T(0.0));
        y_new_.assign(nx_, T(0.0));
        scratch_.assign(nx_, T(0.0));
        z_new_.assign(nz_, 0.0);
        z_work_.assign(nz_, T(0.0));
        s_ref_.assign(nz_, 0);
        groups_ = model_.event_groups();
        max_step_ = opts_.max_step > 0.0 ? opts_.max_step : 0.05 * (t_final_ - t_begin_);
        t_ = T(t_begin_);
    }

    void run() {
        sink_.on_sample(SuperDenseTime{t_begin_, 0}, xc_, xd_);
        while (grid_idx_ < opts_.dense_sampling.size() && opts_.dense_sampling[grid_idx_] < t_begin_)
            ++grid_idx_;
        if (grid_idx_ < opts_.dense_sampling.size() && opts_.dense_sampling[grid_idx_] == t_begin_) {
            sink_.on_grid(T(t_begin_), xc_, xd_);
            ++grid_idx_;
        }
        std::vector<double> z0(nz_, 0.0);
        eval_c(t_, xc_, xd_, z0);
        for (std::size_t i = 0; i < nz_; ++i)
            s_ref_[i] = std::abs(z0[i]) > opts_.event_zero_band ? sign_of(z0[i]) : 0;

        h_ = initial_step();
        const double t_eps = 1e-14 * std::max(1.0, std::abs(t_final_));
        while (t_final_ - value_of(t_) > t_eps) {
            step_once();
        }
    }

private:
    void eval_input(const T& t) {
        if (!u_.empty()) model_.input(t, std::span<T>(u_));
    }

    void eval_c(const T& t, std::span<const T> xc, std::span<const T> xd, std::span<double> z_out) {
        if (nz_ == 0) return;
        eval_input(t);
        model_.c(xc, xd, u_, p_, t, z_work_);
        for (std::size_t i = 0; i < nz_; ++i) z_out[i] = value_of(z_work_[i]);
    }

    void eval_f(const T& t, std::span<const T> xc, std::span<T> out) {
        eval_input(t);
        model_.fc(xc, xd_, u_, p_, t, out);
    }

    double rms_scaled(std::span<const T> v, std::span<const T> ref) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double sc = opts_.abs_tol + opts_.rel_tol * std::abs(value_of(ref[i]));
            const double q = value_of(v[i]) / sc;
            acc += q * q;
        }
        return std::sqrt(acc / std::max<std::size_t>(1, v.size()));
    }

    double initial_step() {
        const double remaining = t_final_ - value_of(t_);
        if (nx_ == 0) return std::min(max_step_, remaining);
        eval_f(t_, xc_, k_[0]);
        have_k1_ = true;
        double d0 = rms_scaled(xc_, xc_);
        double d1 = rms_scaled(k_[0], xc_);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
        h0 = std::min(h0, remaining);
        for (std::size_t i = 0; i < nx_; ++i) y_stage_[i] = xc_[i] + T(h0) * k_[0][i];
        eval_f(t_ + T(h0), y_stage_, scratch_);
        for (std::size_t i = 0; i < nx_; ++i) scratch_[i] = scratch_[i] - k_[0][i];
        const double d2 = rms_scaled(scratch_, xc_) / h0;
        const double dm = std::max(d1, d2);
        double h1 = dm > 1e-15 ? std::pow(0.01 / dm, 0.2) : std::max(1e-6, h0 * 1e-3);
        return std::min({100.0 * h0, h1, max_step_, remaining});
    }

    void step_once() {
        const double remaining = t_final_ - value_of(t_);
        double h = std::min({h_, max_step_, remaining});
        bool last = false;
        if (h >= remaining * (1.0 - 1e-12)) {
            h = remaining;
            last = true;
        }

        double err = 0.0;
        while (true) {
            if (h < 1e-14 * std::max(1.0, std::abs(value_of(t_))))
                throw StepSizeUnderflow("step size underflow at t = " + std::to_string(value_of(t_)));
            err = attempt(h);
            if (std::isfinite(err) && err <= 1.0) break;
            const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
            h *= fac;
            last = false;
        }

        T t1 = t_ + T(h);
        if (last) force_value(t1, t_final_);

        build_segment(h);

        bool handled_event = false;
        if (nz_ > 0) {
            eval_c(t1, y_new_, xd_, z_new_);
            std::vector<std::size_t> crossing;
            for (std::size_t i = 0; i < nz_; ++i) {
                if (s_ref_[i] == 0) continue;
                const int s1 = sign_of(z_new_[i]);
                if (s1 == -s_ref_[i] || (s1 == 0 && s_ref_[i] != 0)) crossing.push_back(i);
            }
            if (!crossing.empty()) {
                handled_event = true;
                handle_event(t1, h, crossing);
            }
        }

        if (!handled_event) {
            seg_.span = h;
            emit_grid_upto(value_of(t1));
            if (sink_.wants_segments()) sink_.on_segment(seg_);
            minor_ = 0;
            sink_.on_sample(SuperDenseTime{value_of(t1), 0}, y_new_, xd_);
            xc_.swap(y_new_);
            t_ = t1;
            k_[0].swap(k_[6]); // FSAL
            have_k1_ = true;
            if (nz_ > 0)
                for (std::size_t i = 0; i < nz_; ++i)
                    if (std::abs(z_new_[i]) > opts_.event_zero_band) s_ref_[i] = sign_of(z_new_[i]);
            const double fac = err > 0.0 ? std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2))) : 5.0;
            h_ = h * fac;
        }
    }

    /// One trial step of size h; returns the scaled error norm.
    double attempt(double h) {
        if (!have_k1_) {
            eval_f(t_, xc_, k_[0]);
            have_k1_ = true;
        }
        for (int s = 1; s < 6; ++s) {
            for (std::size_t i = 0; i < nx_; ++i) {
                T acc = k_[0][i] * T(kA[s][0]);
                for (int j = 1; j < s; ++j) acc += k_[j][i] * T(kA[s][j]);
                y_stage_[i] = xc_[i] + T(h) * acc;
            }
            eval_f(t_ + T(kC[s] * h), y_stage_, k_[s]);
        }
        for (std::size_t i = 0; i < nx_; ++i) {
            T acc = k_[0][i] * T(kA[6][0]);
            for (int j = 1; j < 6; ++j) acc += k_[j][i] * T(kA[6][j]);
            y_new_[i] = xc_[i] + T(h) * acc;
        }
        T t1 = t_ + T(h);
        eval_f(t1, y_new_, k_[6]);

        double acc = 0.0;
        for (std::size_t i = 0; i < nx_; ++i) {
            double e = kE[0] * value_of(k_[0][i]);
            for (int j = 1; j < 7; ++j) e += kE[j] * value_of(k_[j][i]);
            e *= h;
            const double sc =
                opts_.abs_tol + opts_.rel_tol * std::max(std::abs(value_of(xc_[i])), std::abs(value_of(y_new_[i])));
            const double q = e / sc;
            acc += q * q;
        }
        return nx_ ? std::sqrt(acc / static_cast<double>(nx_)) : 0.0;
    }

    void build_segment(double h) {
        seg_.t0 = t_;
        seg_.h = h;
        seg_.span = h;
        seg_.minor = minor_;
        for (auto& r : seg_.rcont) r.assign(nx_, T(0.0));
        seg_.xd = xd_;
        for (std::size_t i = 0; i < nx_; ++i) {
            const T ydiff = y_new_[i] - xc_[i];
            const T bspl = T(h) * k_[0][i] - ydiff;
            seg_.rcont[0][i] = xc_[i];
            seg_.rcont[1][i] = ydiff;
            seg_.rcont[2][i] = bspl;
            seg_.rcont[3][i] = ydiff - T(h) * k_[6][i] - bspl;
            T dsum = T(kD[0]) * k_[0][i];
            for (int j = 2; j < 7; ++j) dsum += T(kD[j]) * k_[j][i];
            seg_.rcont[4][i] = T(h) * dsum;
        }
    }

    double z_at(std::size_t ind, double t_val) {
        T t(t_val);
        seg_.eval_xc(t, std::span<T>(scratch_));
        eval_input(t);
        model_.c(scratch_, xd_, u_, p_, t, z_work_);
        return value_of(z_work_[ind]);
    }

    /// Bisection on the interpolant for indicator `ind` between t_lo (sign
    /// s_lo) and t_hi; returns the first time at/after the crossing.
    double bisect(std::size_t ind, double t_lo, double t_hi, int s_lo) {
        for (int it = 0; it < 200 && (t_hi - t_lo) > opts_.event_time_tol; ++it) {
            const double tm = 0.5 * (t_lo + t_hi);
            const int sm = sign_of(z_at(ind, tm));
            if (sm == s_lo)
                t_lo = tm;
            else
                t_hi = tm;
        }
        return t_hi;
    }

    void handle_event(const T& t1, double h, const std::vector<std::size_t>& crossing) {
        const double t0v = value_of(t_);
        const double t1v = value_of(t1);

        double t_star = t1v;
        std::size_t primary = crossing.front();
        std::vector<double> t_cross(crossing.size());
        for (std::size_t k = 0; k < crossing.size(); ++k) {
            t_cross[k] = bisect(crossing[k], t0v, t1v, s_ref_[crossing[k]]);
            if (t_cross[k] < t_star) {
                t_star = t_cross[k];
                primary = crossing[k];
            }
        }
        std::vector<std::size_t> flagged;
        for (std::size_t k = 0; k < crossing.size(); ++k)
            if (t_cross[k] - t_star <= opts_.event_time_tol) flagged.push_back(crossing[k]);

        // Dual Newton polish: the root of the interpolant is solved in dual
        // arithmetic so the event time carries tangents.
        T t_event(t_star);
        {
            const double delta = std::max(1e-6 * h, 1e-12);
            const double zp = z_at(primary, std::min(t_star + delta, t1v));
            const double zm = z_at(primary, std::max(t_star - delta, t0v));
            const double zdot = (zp - zm) / (std::min(t_star + delta, t1v) - std::max(t_star - delta, t0v));
            if (std::abs(zdot) > 1e-12) {
                seg_.eval_xc(t_event, std::span<T>(scratch_));
                eval_input(t_event);
                model_.c(scratch_, xd_, u_, p_, t_event, z_work_);
                T polished = t_event - z_work_[primary] / T(zdot);
                if (value_of(polished) >= t0v && value_of(polished) <= t1v) {
                    t_event = polished;
                } else if constexpr (std::is_same_v<T, Dual>) {
                    for (std::size_t s = 0; s < polished.width(); ++s)
                        t_event.set_tangent(s, polished.tangent(s));
                }
            }
        }

        seg_.span = value_of(t_event) - t0v;
        emit_grid_upto(value_of(t_event));
        if (sink_.wants_segments()) sink_.on_segment(seg_);

        std::vector<T> xc_pre(nx_);
        seg_.eval_xc(t_event, std::span<T>(xc_pre));
        sink_.on_sample(SuperDenseTime{value_of(t_event), minor_}, xc_pre, xd_);

        process_instant(t_event, std::move(xc_pre), flagged);

        t_ = t_event;
        have_k1_ = false;
        if (t_final_ - value_of(t_) > 1e-14 * std::max(1.0, std::abs(t_final_))) h_ = initial_step();
    }

    void process_instant(const T& t_event, std::vector<T> xc_pre, std::vector<std::size_t> pending) {
        std::vector<T> xc_cur = std::move(xc_pre);
        std::vector<T> xd_cur = xd_;
        std::vector<T> xc_post(nx_), xd_post(xd_.size());
        std::vector<double> z_post(nz_);
        int count = 0;
        while (!pending.empty()) {
            if (++count > opts_.max_events_per_instant)
                throw EventCascadeLimit("more than " + std::to_string(opts_.max_events_per_instant) +
                                        " events at t = " + std::to_string(value_of(t_event)));
            // All indicators of the first matching group fire together; the
            // rest of the pending set re-fires at the next minor instant.
            int group_idx = 0;
            EventQ q(nz_);
            for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
                bool hit = false;
                for (std::size_t ind : pending)
                    if (ind >= groups_[gi].begin && ind < groups_[gi].end) hit = true;
                if (hit) {
                    group_idx = static_cast<int>(gi);
                    for (std::size_t ind : pending)
                        if (ind >= groups_[gi].begin && ind < groups_[gi].end) q.set(ind);
                    break;
                }
            }

            eval_input(t_event);
            model_.a(xc_cur, xd_cur, u_, p_, t_event, q, xc_post, xd_post);
            const std::uint32_t pre_minor = minor_;
            ++minor_;
            sink_.on_event(SuperDenseTime{value_of(t_event), pre_minor}, group_idx, q, xc_cur, xd_cur, xc_post,
                           xd_post);
            sink_.on_sample(SuperDenseTime{value_of(t_event), minor_}, xc_post, xd_post);

            xc_cur = xc_post;
            xd_cur = xd_post;
            eval_c(t_event, xc_cur, xd_cur, z_post);
            for (std::size_t i = 0; i < nz_; ++i)
                if (q.test(i)) s_ref_[i] = std::abs(z_post[i]) > opts_.event_zero_band ? sign_of(z_post[i]) : 0;

            std::vector<std::size_t> next;
            for (std::size_t i = 0; i < nz_; ++i) {
                if (q.test(i) || s_ref_[i] == 0) continue;
                const int s1 = sign_of(z_post[i]);
                if (s1 == -s_ref_[i] || s1 == 0) next.push_back(i);
            }
            pending = std::move(next);
        }
        for (std::size_t i = 0; i < nz_; ++i)
            if (std::abs(z_post[i]) > opts_.event_zero_band) s_ref_[i] = sign_of(z_post[i]);
        xc_ = std::move(xc_cur);
        xd_ = std::move(xd_cur);
    }

    void emit_grid_upto(double bound) {
        const auto& grid = opts_.dense_sampling;
        while (grid_idx_ < grid.size() && grid[grid_idx_] <= bound) {
            const T tg(grid[grid_idx_]);
            seg_.eval_xc(tg, std::span<T>(scratch_));
            sink_.on_grid(tg, scratch_, xd_);
            ++grid_idx_;
        }
    }

    const HudaModel& model_;
    const SolverOpts& opts_;
    SampleSink<T>& sink_;
    std::span<const T> p_;
    double t_begin_, t_final_;
    double max_step_ = 0.0;

    std::size_t nx_ = 0, nz_ = 0;
    T t_{};
    std::vector<T> xc_, xd_, u_;
    std::uint32_t minor_ = 0;
    double h_ = 0.0;
    bool have_k1_ = false;

    std::array<std::vector<T>, 7> k_;
    std::vector<T> y_stage_, y_new_, scratch_, z_work_;
    DenseSeg<T> seg_;
    std::vector<double> z_new_;
    std::vector<std::int8_t> s_ref_;
    std::vector<EventGroup> groups_;
    std::size_t grid_idx_ = 0;
};

} // namespace

template <class T>
void integrate_sink(const HudaModel& model, std::span<const T> xc0, std::span<const T> xd0,
                    std::span<const T> p, std::pair<double, double> tspan, const SolverOpts& opts,
                    SampleSink<T>& sink) {
    Engine<T> engine(model, xc0, xd0, p, tspan, opts, sink);
    engine.run();
}

template void integrate_sink<double>(const HudaModel&, std::span<const double>, std::span<const double>,
                                     std::span<const double>, std::pair<double, double>, const SolverOpts&,
                                     SampleSink<double>&);
template void integrate_sink<Dual>(const HudaModel&, std::span<const Dual>, std::span<const Dual>,
                                   std::span<const Dual>, std::pair<double, double>, const SolverOpts&,
                                   SampleSink<Dual>&);

namespace {

/// Builds a Trajectory from engine callbacks.
class TrajectoryRecorder final : public SampleSink<double> {
public:
    TrajectoryRecorder(Trajectory& traj, const SolverOpts& opts) : traj_(traj), opts_(opts) {}

    void on_sample(const SuperDenseTime& when, std::span<const double> xc, std::span<const double> xd) override {
        if (!opts_.record_nodes && !opts_.dense_sampling.empty()) {
            // grid mode: hold plain nodes; flush the held node only when it
            // turns out to be the pre-event half of an event pair
            if (when.minor == 0) {
                held_ = Sample{when, {xc.begin(), xc.end()}, {xd.begin(), xd.end()}};
                return;
            }
            if (held_ && held_->when.t == when.t) {
                traj_.samples.push_back(std::move(*held_));
                held_.reset();
            }
        }
        push(when, xc, xd);
    }
    void on_grid(const double& t, std::span<const double> xc, std::span<const double> xd) override {
        if (!opts_.dense_sampling.empty() && !opts_.record_nodes) push(SuperDenseTime{t, 0}, xc, xd);
    }
    void on_event(const SuperDenseTime& when, int group, const EventQ& q, std::span<const double> xc_pre,
                  std::span<const double> xd_pre, std::span<const double> xc_post,
                  std::span<const double> xd_post) override {
        EventRecord rec;
        rec.when = when;
        rec.group = group;
        rec.q = q;
        rec.x_pre.assign(xc_pre.begin(), xc_pre.end());
        rec.x_pre.insert(rec.x_pre.end(), xd_pre.begin(), xd_pre.end());
        rec.x_post.assign(xc_post.begin(), xc_post.end());
        rec.x_post.insert(rec.x_post.end(), xd_post.begin(), xd_post.end());
        traj_.events.push_back(std::move(rec));
    }
    bool wants_segments() const override { return true; }
    void on_segment(const DenseSeg<double>& seg) override { traj_.segments.push_back(seg); }

private:
    void push(const SuperDenseTime& when, std::span<const double> xc, std::span<const double> xd) {
        Sample s;
        s.when = when;
        s.xc.assign(xc.begin(), xc.end());
        s.xd.assign(xd.begin(), xd.end());
        traj_.samples.push_back(std::move(s));
    }

    Trajectory& traj_;
    const SolverOpts& opts_;
    std::optional<Sample> held_;
};

} // namespace

Trajectory integrate(const HudaModel& model, std::span<const double> xc0, std::span<const double> xd0,
                     std::span<const double> p, std::pair<double, double> tspan, const SolverOpts& opts) {
    Trajectory traj;
    traj.t_begin = tspan.first;
    traj.t_end = tspan.second;
    TrajectoryRecorder rec(traj, opts);
    integrate_sink<double>(model, xc0, xd0, p, tspan, opts, rec);
    return traj;
}

Trajectory integrate(const HudaModel& model, std::pair<double, double> tspan, const SolverOpts& opts) {
    const auto xc0 = model.xc0();
    const auto xd0 = model.xd0();
    const auto p = model.p0();
    return integrate(model, xc0, xd0, p, tspan, opts);
}

std::pair<std::vector<double>, std::vector<double>> Trajectory::eval(double t) const {
    if (segments.empty()) {
        if (samples.empty()) throw HudaError("empty trajectory");
        const Sample* best = &samples.front();
        for (const auto& s : samples)
            if (s.when.t <= t) best = &s;
        return {best->xc, best->xd};
    }
    // First segment starting at or after t, then step back one: ties at event
    // instants resolve to the earlier (pre-event) extension.
    std::size_t lo = 0, hi = segments.size();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (segments[mid].t0 < t)
            lo = mid + 1;
        else
            hi = mid;
    }
    const std::size_t idx = lo > 0 ? lo - 1 : 0;
    const DenseSegment& seg = segments[idx];
    std::vector<double> xc(seg.rcont[0].size());
    const double tc = std::clamp(t, seg.t0, seg.t0 + seg.span);
    seg.eval_xc(tc, std::span<double>(xc));
    return {std::move(xc), seg.xd};
}

std::pair<double, EventQ> locate_event(const DenseSegment& seg, const HudaModel& model,
                                       std::span<const double> p, double t_lo, double t_hi,
                                       double event_time_tol) {
    const Dims& d = model.dims();
    std::vector<double> u(d.n_u, 0.0);
    std::vector<double> xc(d.n_xc, 0.0);
    std::vector<double> z(d.n_z, 0.0);
    auto z_at = [&](double t) {
        seg.eval_xc(t, std::span<double>(xc));
        if (!u.empty()) model.input(t, std::span<double>(u));
        model.c(xc, seg.xd, u, p, t, z);
        return z;
    };
    const std::vector<double> zlo = z_at(t_lo);
    const std::vector<double> zhi = z_at(t_hi);
    std::vector<std::size_t> crossing;
    for (std::size_t i = 0; i < d.n_z; ++i) {
        const int s0 = sign_of(zlo[i]);
        const int s1 = sign_of(zhi[i]);
        if (s0 != 0 && (s1 == -s0 || s1 == 0)) crossing.push_back(i);
    }
    if (crossing.empty()) throw NoCrossing("no event indicator changes sign across the bracket");

    double t_star = t_hi;
    std::vector<double> t_cross(crossing.size());
    for (std::size_t k = 0; k < crossing.size(); ++k) {
        double lo = t_lo, hi = t_hi;
        const int s0 = sign_of(zlo[crossing[k]]);
        for (int it = 0; it < 200 && (hi - lo) > event_time_tol; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (sign_of(z_at(mid)[crossing[k]]) == s0)
                lo = mid;
            else
                hi = mid;
        }
        t_cross[k] = hi;
        t_star = std::min(t_star, hi);
    }
    EventQ q(d.n_z);
    for (std::size_t k = 0; k < crossing.size(); ++k)
        if (t_cross[k] - t_star <= event_time_tol) q.set(crossing[k]);
    return {t_star, q};
}

namespace {

void write_row(std::FILE* f, double t, std::uint32_t minor, std::span<const double> x) {
    std::fprintf(f, "%.17g,%u", t, minor);
    for (double v : x) std::fprintf(f, ",%.17g", v);
    std::fprintf(f, "\n");
}

} // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    const std::size_t n = traj.samples.empty() ? 0 : traj.samples.front().xc.size() + traj.samples.front().xd.size();
    std::fprintf(f, "t,minor");
    for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",x%zu", i);
    std::fprintf(f, "\n");
    std::vector<double> x;
    for (const auto& s : traj.samples) {
        x.assign(s.xc.begin(), s.xc.end());
        x.insert(x.end(), s.xd.begin(), s.xd.end());
        write_row(f, s.when.t, s.when.minor, x);
    }
    std::fclose(f);
}

void write_events_csv(const Trajectory& traj, const std::string& path, std::size_t n_groups) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    const std::size_t n = traj.events.empty() ? 0 : traj.events.front().x_pre.size();
    std::fprintf(f, "t,minor,source,q");
    for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",pre%zu", i);
    for (std::size_t i = 1; i <= n; ++i) std::fprintf(f, ",post%zu", i);
    std::fprintf(f, "\n");
    for (const auto& e : traj.events) {
        std::string qs;
        for (auto b : e.q.q) qs += b ? '1' : '0';
        const char src = n_groups > 1 ? static_cast<char>('a' + e.group) : '-';
        std::fprintf(f, "%.17g,%u,%c,%s", e.when.t, e.when.minor, src, qs.c_str());
        for (double v : e.x_pre) std::fprintf(f, ",%.17g", v);
        for (double v : e.x_post) std::fprintf(f, ",%.17g", v);
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

CsvTable read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty CSV '" + path + "'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2) throw IoError("malformed CSV row in '" + path + "'");
        table.t.push_back(row[0]);
        table.minor.push_back(static_cast<std::uint32_t>(row[1]));
        table.x.emplace_back(row.begin() + 2, row.end());
    }
    return table;
}

} // namespace huda
