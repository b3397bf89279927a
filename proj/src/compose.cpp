#include "huda/compose.hpp"

#include <cmath>

#include "huda/detail/linsolve.hpp"

namespace huda {

namespace {

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

using ValueFn = std::function<std::vector<double>(std::span<const double>)>;
using JacFn = std::function<std::vector<double>(std::span<const double>)>; // m x n row-major

/// Damped Newton restricted to the sensitive entries of the guess
/// (columns of the Jacobian that are not identically zero at the guess).
/// Returns the solution values; fills `sensitive` and the Jacobian at the
/// solution for tangent propagation.
std::vector<double> newton_restricted(const ValueFn& r_fn, const JacFn& jac_fn, std::span<const double> guess,
                                      std::size_t m, double tol, int max_iter, std::vector<std::size_t>& sensitive,
                                      std::vector<double>& jac_at_solution) {
    const std::size_t n = guess.size();
    std::vector<double> v(guess.begin(), guess.end());
    std::vector<double> r = r_fn(v);
    if (r.size() != m) throw DimensionMismatch("residual length mismatch");
    double rn = inf_norm(r);

    std::vector<double> jac = jac_fn(v);
    sensitive.clear();
    for (std::size_t c = 0; c < n; ++c) {
        bool nz = false;
        for (std::size_t i = 0; i < m; ++i) nz |= jac[i * n + c] != 0.0;
        if (nz) sensitive.push_back(c);
    }
    const std::size_t k = sensitive.size();
    if (rn <= tol) {
        jac_at_solution = std::move(jac);
        return v;
    }
    if (k == 0) throw NoSolution("residual has no sensitive entries but is nonzero", rn);

    std::vector<double> js(m * k), rhs(m), delta;
    for (int iter = 0; iter < max_iter && rn > tol; ++iter) {
        if (iter > 0) jac = jac_fn(v);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t c = 0; c < k; ++c) js[i * k + c] = jac[i * n + sensitive[c]];
        for (std::size_t i = 0; i < m; ++i) rhs[i] = -r[i];
        bool solved;
        if (m == k) {
            std::vector<double> a = js;
            delta = rhs;
            solved = detail::lu_solve(a, delta, k, 1e-14);
        } else {
            solved = detail::normal_solve(js, m, k, rhs, delta);
        }
        if (!solved) throw NoConvergence("singular Jacobian in event-state solve", rn);

        double lambda = 1.0;
        while (true) {
            std::vector<double> v_try = v;
            for (std::size_t c = 0; c < k; ++c) v_try[sensitive[c]] += lambda * delta[c];
            std::vector<double> r_try = r_fn(v_try);
            const double rn_try = inf_norm(r_try);
            if (rn_try <= tol || rn_try < rn * (1.0 - 1e-4 * lambda)) {
                v = std::move(v_try);
                r = std::move(r_try);
                rn = rn_try;
                break;
            }
            lambda *= 0.5;
            if (lambda < 1e-6) throw NoConvergence("damping exhausted in event-state solve", rn);
        }
    }
    if (rn > tol) throw NoConvergence("event-state solve did not reach tolerance", rn);
    jac_at_solution = jac_fn(v);
    return v;
}

/// Central finite-difference Jacobian, step 1e-7 (1 + |x|). Structural
/// zeros come out as exact 0.0.
std::vector<double> fd_jacobian(const ValueFn& r_fn, std::span<const double> v, std::size_t m) {
    const std::size_t n = v.size();
    std::vector<double> jac(m * n, 0.0);
    std::vector<double> vp(v.begin(), v.end()), vm(v.begin(), v.end());
    for (std::size_t j = 0; j < n; ++j) {
        const double h = 1e-7 * (1.0 + std::abs(v[j]));
        vp[j] = v[j] + h;
        vm[j] = v[j] - h;
        const std::vector<double> rp = r_fn(vp);
        const std::vector<double> rm = r_fn(vm);
        for (std::size_t i = 0; i < m; ++i) jac[i * n + j] = (rp[i] - rm[i]) / (2.0 * h);
        vp[j] = v[j];
        vm[j] = v[j];
    }
    return jac;
}

using DualFn = std::function<std::vector<Dual>(std::span<const Dual>)>;

/// Forward-mode Jacobian via seed chunks.
std::vector<double> dual_jacobian(const DualFn& probe, std::span<const double> v, std::size_t m) {
    const std::size_t n = v.size();
    std::vector<double> jac(m * n, 0.0);
    for (std::size_t start = 0; start < n; start += kMaxTangents) {
        const std::size_t width = std::min(kMaxTangents, n - start);
        std::vector<Dual> vd(n);
        for (std::size_t j = 0; j < n; ++j) vd[j] = Dual(v[j]);
        for (std::size_t j = 0; j < width; ++j) vd[start + j] = Dual(v[start + j], j, width);
        const std::vector<Dual> r = probe(vd);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < width; ++j) jac[i * n + start + j] = r[i].tangent(j);
    }
    return jac;
}

} // namespace

CombinedPtr combine(ModelPtr model_a, ModelPtr model_b, ConnectionSet conn) {
    if (!model_a || !model_b) throw HudaError("combine requires two models");
    auto cm = std::shared_ptr<CombinedModel>(new CombinedModel());
    cm->a_ = std::move(model_a);
    cm->b_ = std::move(model_b);
    cm->conn_ = std::move(conn);

    auto make_side = [](const ModelPtr& model, ConnRow row, ConnCol col) {
        CombinedModel::Side s;
        s.model = model;
        s.row = row;
        s.col = col;
        const Dims& d = model->dims();
        s.profile = d.n_xc > 0 ? WiringProfile::StateDerivative : WiringProfile::Output;
        s.n_ups = s.profile == WiringProfile::StateDerivative ? d.n_xc : d.n_u;
        s.n_gam = s.profile == WiringProfile::StateDerivative ? d.n_xc : d.n_y;
        s.n_xd = d.n_xd;
        s.n_z = d.n_z;
        return s;
    };
    cm->side_a_ = make_side(cm->a_, ConnRow::a, ConnCol::a);
    cm->side_b_ = make_side(cm->b_, ConnRow::b, ConnCol::b);
    cm->side_a_.xd_off = 0;
    cm->side_b_.xd_off = cm->side_a_.n_xd;
    cm->side_a_.z_off = 0;
    cm->side_b_.z_off = cm->side_a_.n_z;

    const ConnDims& cd = cm->conn_.dims;
    auto expect = [](std::size_t got, std::size_t want, const char* what) {
        if (got != want)
            throw DimensionMismatch(std::string("connection ") + what + ": expected " + std::to_string(want) +
                                    ", got " + std::to_string(got));
    };
    expect(cd.u_a, cm->side_a_.n_ups, "|upsilon_a|");
    expect(cd.g_a, cm->side_a_.n_gam, "|gamma_a|");
    expect(cd.u_b, cm->side_b_.n_ups, "|upsilon_b|");
    expect(cd.g_b, cm->side_b_.n_gam, "|gamma_b|");
    expect(cd.u_z, cd.g_z, "|upsilon_z| vs |gamma_z| (state wiring)");

    // Refuse loopy wirings: worst-case submodel incidence, occupancy from masks.
    const BoolMat d_a(cd.g_a, cd.u_a, true);
    const BoolMat d_b(cd.g_b, cd.u_b, true);
    const BltResult blt = blt_sort(assemble_incidence(d_a, d_b, cm->conn_.occupancy(), cd));
    if (!blt.ok()) throw LoopyTopology("connection admits algebraic loops: " + blt.loops.describe());
    cm->order_ = *blt.order;
    for (const auto& [eq, var] : cm->order_.steps) {
        if (eq == kCa) {
            cm->a_first_ = true;
            break;
        }
        if (eq == kCb) {
            cm->a_first_ = false;
            break;
        }
    }

    const std::vector<double> pa = cm->a_->p0();
    const std::vector<double> pb = cm->b_->p0();
    auto [flat, layout] = flatten_params(cm->conn_, pa, pb);
    cm->p0_ = std::move(flat);
    cm->layout_ = std::move(layout);

    cm->dims_ = Dims{cd.u_z, cm->side_a_.n_xd + cm->side_b_.n_xd, 0, cm->a_->dims().n_y + cm->b_->dims().n_y,
                     cm->side_a_.n_z + cm->side_b_.n_z, cm->p0_.size()};

    if (cm->side_a_.profile == WiringProfile::StateDerivative && cd.u_z == cm->a_->dims().n_xc)
        cm->xc0_ = cm->a_->xc0();
    else
        cm->xc0_.assign(cd.u_z, 0.0);
    cm->xd0_ = cm->a_->xd0();
    const auto xd0b = cm->b_->xd0();
    cm->xd0_.insert(cm->xd0_.end(), xd0b.begin(), xd0b.end());
    return cm;
}

std::vector<EventGroup> CombinedModel::event_groups() const {
    std::vector<EventGroup> gs;
    if (side_a_.n_z > 0) gs.push_back(EventGroup{side_a_.z_off, side_a_.z_off + side_a_.n_z});
    if (side_b_.n_z > 0) gs.push_back(EventGroup{side_b_.z_off, side_b_.z_off + side_b_.n_z});
    if (gs.empty()) gs.push_back(EventGroup{0, 0});
    return gs;
}

std::string CombinedModel::name() const { return "cm(" + a_->name() + "+" + b_->name() + ")"; }

ConnectionSet CombinedModel::connection_with(std::span<const double> params) const {
    return unflatten_connection(conn_, layout_, params);
}

template <class T>
void CombinedModel::eval_submodel(const Side& s, std::span<const T> ups, std::span<const T> xd,
                                  std::span<const T> p, const T& t, std::span<T> gam) const {
    std::span<const T> p_sub =
        s.row == ConnRow::a ? p.subspan(layout_.offset_a, layout_.n_a) : p.subspan(layout_.offset_b, layout_.n_b);
    std::span<const T> xd_sub = xd.subspan(s.xd_off, s.n_xd);
    if (s.profile == WiringProfile::StateDerivative) {
        std::vector<T> u_own(s.model->dims().n_u, T(0.0));
        if (!u_own.empty()) s.model->input(t, std::span<T>(u_own));
        s.model->fc(ups, xd_sub, u_own, p_sub, t, gam);
    } else {
        s.model->g(std::span<const T>{}, xd_sub, ups, p_sub, t, gam);
    }
}

template <class T>
void CombinedModel::blt_locals(std::span<const T> xc, std::span<const T> xd, std::span<const T> p, const T& t,
                               std::vector<T>& ups_a, std::vector<T>& ups_b, std::vector<T>& gam_a,
                               std::vector<T>& gam_b, bool need_second) const {
    const Side& first = side(true);
    const Side& second = side(false);
    std::vector<T>& ups_f = first.row == ConnRow::a ? ups_a : ups_b;
    std::vector<T>& ups_s = first.row == ConnRow::a ? ups_b : ups_a;
    std::vector<T>& gam_f = first.row == ConnRow::a ? gam_a : gam_b;
    std::vector<T>& gam_s = first.row == ConnRow::a ? gam_b : gam_a;

    ups_f.assign(first.n_ups, T(0.0));
    apply_connection_row<T>(conn_, first.row, {}, {}, xc, &layout_, p, ups_f);
    gam_f.assign(first.n_gam, T(0.0));
    eval_submodel<T>(first, ups_f, xd, p, t, gam_f);

    ups_s.assign(second.n_ups, T(0.0));
    std::span<const T> col_a = first.col == ConnCol::a ? std::span<const T>(gam_f) : std::span<const T>{};
    std::span<const T> col_b = first.col == ConnCol::b ? std::span<const T>(gam_f) : std::span<const T>{};
    apply_connection_row<T>(conn_, second.row, col_a, col_b, xc, &layout_, p, ups_s);
    if (need_second) {
        gam_s.assign(second.n_gam, T(0.0));
        eval_submodel<T>(second, ups_s, xd, p, t, gam_s);
    }
}

template <class T>
void CombinedModel::fc_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T>,
                            std::span<const T> p, const T& t, std::span<T> dxc) const {
    std::vector<T> ups_a, ups_b, gam_a, gam_b;
    blt_locals<T>(xc, xd, p, t, ups_a, ups_b, gam_a, gam_b, true);
    apply_connection_row<T>(conn_, ConnRow::z, gam_a, gam_b, xc, &layout_, p, dxc);
}

template <class T>
void CombinedModel::g_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T>,
                           std::span<const T> p, const T& t, std::span<T> y) const {
    if (y.empty()) return;
    std::vector<T> ups_a, ups_b, gam_a, gam_b;
    blt_locals<T>(xc, xd, p, t, ups_a, ups_b, gam_a, gam_b, true);
    auto emit = [&](const Side& s, std::span<const T> ups, std::size_t off) {
        const std::size_t ny = s.model->dims().n_y;
        if (ny == 0) return;
        std::span<const T> p_sub = s.row == ConnRow::a ? p.subspan(layout_.offset_a, layout_.n_a)
                                                       : p.subspan(layout_.offset_b, layout_.n_b);
        std::span<const T> xd_sub = xd.subspan(s.xd_off, s.n_xd);
        if (s.profile == WiringProfile::StateDerivative) {
            std::vector<T> u_own(s.model->dims().n_u, T(0.0));
            if (!u_own.empty()) s.model->input(t, std::span<T>(u_own));
            s.model->g(ups, xd_sub, u_own, p_sub, t, y.subspan(off, ny));
        } else {
            s.model->g(std::span<const T>{}, xd_sub, ups, p_sub, t, y.subspan(off, ny));
        }
    };
    emit(side_a_, ups_a, 0);
    emit(side_b_, ups_b, a_->dims().n_y);
}

template <class T>
void CombinedModel::c_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T>,
                           std::span<const T> p, const T& t, std::span<T> z) const {
    if (z.empty()) return;
    std::vector<T> ups_a, ups_b, gam_a, gam_b;
    blt_locals<T>(xc, xd, p, t, ups_a, ups_b, gam_a, gam_b, false);
    auto emit = [&](const Side& s, std::span<const T> ups) {
        if (s.n_z == 0) return;
        std::span<const T> p_sub = s.row == ConnRow::a ? p.subspan(layout_.offset_a, layout_.n_a)
                                                       : p.subspan(layout_.offset_b, layout_.n_b);
        std::span<const T> xd_sub = xd.subspan(s.xd_off, s.n_xd);
        if (s.profile == WiringProfile::StateDerivative) {
            std::vector<T> u_own(s.model->dims().n_u, T(0.0));
            if (!u_own.empty()) s.model->input(t, std::span<T>(u_own));
            s.model->c(ups, xd_sub, u_own, p_sub, t, z.subspan(s.z_off, s.n_z));
        } else {
            s.model->c(std::span<const T>{}, xd_sub, ups, p_sub, t, z.subspan(s.z_off, s.n_z));
        }
    };
    emit(side_a_, ups_a);
    emit(side_b_, ups_b);
}

template <class T>
std::vector<T> CombinedModel::propagate_local_state(const Side& src, std::span<const T> target,
                                                    std::span<const T> guess, std::span<const T> xd,
                                                    std::span<const T> p, const T& t) const {
    const Side& first = side(true);
    const bool src_first = src.row == first.row;
    const std::size_t n = dims_.n_xc;

    // Event in the first-evaluated submodel with a square input feed: direct
    // linear solve in the active arithmetic.
    if (src_first && src.n_ups == n) {
        std::vector<T> a(n * n), rhs(n);
        for (std::size_t i = 0; i < n; ++i) {
            rhs[i] = target[i] - bias_entry<T>(conn_, src.row, i, &layout_, p);
            for (std::size_t j = 0; j < n; ++j)
                a[i * n + j] = block_entry<T>(conn_, src.row, ConnCol::z, i, j, &layout_, p);
        }
        std::vector<T> a2 = a, rhs2 = rhs;
        if (detail::lu_solve(a2, rhs2, n)) return rhs2;
    }

    // Value context for the Newton phases.
    std::vector<double> p_vals(p.size()), xd_vals(xd.size()), target_vals(target.size()),
        guess_vals(guess.size());
    for (std::size_t i = 0; i < p.size(); ++i) p_vals[i] = value_of(p[i]);
    for (std::size_t i = 0; i < xd.size(); ++i) xd_vals[i] = value_of(xd[i]);
    for (std::size_t i = 0; i < target.size(); ++i) target_vals[i] = value_of(target[i]);
    for (std::size_t i = 0; i < guess.size(); ++i) guess_vals[i] = value_of(guess[i]);
    const double t_val = value_of(t);
    const std::size_t m = src.n_ups;

    // r(v) = ups_src(v) - target, through the first submodel when the source
    // is evaluated second.
    auto residual = [&](const auto& v, const auto& p_in, const auto& xd_in, const auto& t_in,
                        const auto& target_in) {
        using S = std::decay_t<decltype(v[0])>;
        std::span<const S> vspan(v);
        std::span<const S> pspan(p_in);
        std::span<const S> xdspan(xd_in);
        std::vector<S> ups(m, S(0.0));
        if (src_first) {
            apply_connection_row<S>(conn_, src.row, {}, {}, vspan, &layout_, pspan, ups);
        } else {
            std::vector<S> ups_f(first.n_ups, S(0.0));
            apply_connection_row<S>(conn_, first.row, {}, {}, vspan, &layout_, pspan, ups_f);
            std::vector<S> gam_f(first.n_gam, S(0.0));
            eval_submodel<S>(first, ups_f, xdspan, pspan, t_in, gam_f);
            std::span<const S> col_a = first.col == ConnCol::a ? std::span<const S>(gam_f) : std::span<const S>{};
            std::span<const S> col_b = first.col == ConnCol::b ? std::span<const S>(gam_f) : std::span<const S>{};
            apply_connection_row<S>(conn_, src.row, col_a, col_b, vspan, &layout_, pspan, ups);
        }
        std::vector<S> r(m);
        for (std::size_t i = 0; i < m; ++i) r[i] = ups[i] - target_in[i];
        return r;
    };

    ValueFn r_vals = [&](std::span<const double> v) {
        std::vector<double> vv(v.begin(), v.end());
        return residual(vv, p_vals, xd_vals, t_val, target_vals);
    };
    std::vector<Dual> p_dual(p_vals.begin(), p_vals.end());
    std::vector<Dual> xd_dual(xd_vals.begin(), xd_vals.end());
    std::vector<Dual> target_dual(target_vals.begin(), target_vals.end());
    DualFn probe = [&](std::span<const Dual> v) {
        std::vector<Dual> vv(v.begin(), v.end());
        return residual(vv, p_dual, xd_dual, Dual(t_val), target_dual);
    };
    JacFn jac = [&](std::span<const double> v) { return dual_jacobian(probe, v, m); };

    const double tol = 1e-10 * (1.0 + inf_norm(target_vals));
    std::vector<std::size_t> sensitive;
    std::vector<double> jac_solution;
    const std::vector<double> solution =
        newton_restricted(r_vals, jac, guess_vals, m, tol, 50, sensitive, jac_solution);

    std::vector<T> out(guess.begin(), guess.end());
    for (std::size_t c : sensitive) out[c] = T(solution[c]);

    if constexpr (std::is_same_v<T, Dual>) {
        // Tangents of the sensitive entries via the implicit function
        // theorem: J dv = -dr/dtheta at fixed v.
        std::vector<Dual> v_dual(n);
        for (std::size_t j = 0; j < n; ++j) v_dual[j] = Dual(solution[j]);
        for (std::size_t j = 0; j < n; ++j) {
            bool sens = false;
            for (std::size_t c : sensitive) sens |= c == j;
            if (!sens) v_dual[j] = out[j]; // carries the guess tangents
        }
        std::vector<Dual> p_in(p.begin(), p.end());
        std::vector<Dual> xd_in(xd.begin(), xd.end());
        std::vector<Dual> tg_in(target.begin(), target.end());
        const std::vector<Dual> r_dual = residual(v_dual, p_in, xd_in, t, tg_in);

        std::size_t width = 0;
        for (const Dual& r : r_dual) width = std::max(width, r.width());
        if (width > 0 && !sensitive.empty()) {
            const std::size_t k = sensitive.size();
            std::vector<double> js(m * k), rhs(m), delta;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t c = 0; c < k; ++c) js[i * k + c] = jac_solution[i * n + sensitive[c]];
            for (std::size_t s = 0; s < width; ++s) {
                for (std::size_t i = 0; i < m; ++i) rhs[i] = -r_dual[i].tangent(s);
                bool solved;
                if (m == k) {
                    std::vector<double> a2 = js;
                    delta = rhs;
                    solved = detail::lu_solve(a2, delta, k, 1e-14);
                } else {
                    solved = detail::normal_solve(js, m, k, rhs, delta);
                }
                if (!solved) throw NoConvergence("singular Jacobian in event tangent solve", inf_norm(rhs));
                for (std::size_t c = 0; c < k; ++c) out[sensitive[c]].set_tangent(s, delta[c]);
            }
        }
    }
    return out;
}

template <class T>
void CombinedModel::a_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T>,
                           std::span<const T> p, const T& t, const EventQ& q, std::span<T> xc_post,
                           std::span<T> xd_post) const {
    bool in_a = false, in_b = false;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!q.test(i)) continue;
        (i < side_b_.z_off ? in_a : in_b) = true;
    }
    if (in_a && in_b)
        throw HudaError("combined affect requires the event to originate in exactly one submodel");
    if (!in_a && !in_b) throw NoEventFlagged("combined affect called with all-zero q");
    const Side& src = in_a ? side_a_ : side_b_;

    std::vector<T> ups_a, ups_b, gam_a, gam_b;
    blt_locals<T>(xc, xd, p, t, ups_a, ups_b, gam_a, gam_b, false);
    const std::vector<T>& ups_src = in_a ? ups_a : ups_b;

    EventQ q_local(src.n_z);
    for (std::size_t i = 0; i < src.n_z; ++i)
        if (q.test(src.z_off + i)) q_local.set(i);

    std::span<const T> p_sub =
        in_a ? std::span<const T>(p).subspan(layout_.offset_a, layout_.n_a)
             : std::span<const T>(p).subspan(layout_.offset_b, layout_.n_b);
    std::span<const T> xd_sub = xd.subspan(src.xd_off, src.n_xd);

    const std::size_t n_xc_src = src.model->dims().n_xc;
    std::vector<T> xc_src_post(n_xc_src);
    std::vector<T> xd_src_post(src.n_xd);
    if (src.profile == WiringProfile::StateDerivative) {
        std::vector<T> u_own(src.model->dims().n_u, T(0.0));
        if (!u_own.empty()) src.model->input(t, std::span<T>(u_own));
        src.model->a(ups_src, xd_sub, u_own, p_sub, t, q_local, xc_src_post, xd_src_post);
    } else {
        src.model->a(std::span<const T>{}, xd_sub, ups_src, p_sub, t, q_local, xc_src_post, xd_src_post);
    }

    // Discrete states update in place; only the source slice changes.
    for (std::size_t i = 0; i < xd.size(); ++i) xd_post[i] = xd[i];
    for (std::size_t i = 0; i < src.n_xd; ++i) xd_post[src.xd_off + i] = xd_src_post[i];

    // The new local continuous state propagates back to a global state; a
    // bitwise-unchanged local state leaves the global state untouched.
    bool changed = false;
    if (src.profile == WiringProfile::StateDerivative)
        for (std::size_t i = 0; i < n_xc_src; ++i) changed |= !(xc_src_post[i] == ups_src[i]);
    if (!changed) {
        for (std::size_t i = 0; i < xc.size(); ++i) xc_post[i] = xc[i];
        return;
    }
    const std::vector<T> global = propagate_local_state<T>(src, xc_src_post, xc, xd, p, t);
    for (std::size_t i = 0; i < xc.size(); ++i) xc_post[i] = global[i];
}

template void CombinedModel::fc_impl<double>(std::span<const double>, std::span<const double>,
                                             std::span<const double>, std::span<const double>, const double&,
                                             std::span<double>) const;
template void CombinedModel::fc_impl<Dual>(std::span<const Dual>, std::span<const Dual>, std::span<const Dual>,
                                           std::span<const Dual>, const Dual&, std::span<Dual>) const;
template void CombinedModel::g_impl<double>(std::span<const double>, std::span<const double>,
                                            std::span<const double>, std::span<const double>, const double&,
                                            std::span<double>) const;
template void CombinedModel::g_impl<Dual>(std::span<const Dual>, std::span<const Dual>, std::span<const Dual>,
                                          std::span<const Dual>, const Dual&, std::span<Dual>) const;
template void CombinedModel::c_impl<double>(std::span<const double>, std::span<const double>,
                                            std::span<const double>, std::span<const double>, const double&,
                                            std::span<double>) const;
template void CombinedModel::c_impl<Dual>(std::span<const Dual>, std::span<const Dual>, std::span<const Dual>,
                                          std::span<const Dual>, const Dual&, std::span<Dual>) const;
template void CombinedModel::a_impl<double>(std::span<const double>, std::span<const double>,
                                            std::span<const double>, std::span<const double>, const double&,
                                            const EventQ&, std::span<double>, std::span<double>) const;
template void CombinedModel::a_impl<Dual>(std::span<const Dual>, std::span<const Dual>, std::span<const Dual>,
                                          std::span<const Dual>, const Dual&, const EventQ&, std::span<Dual>,
                                          std::span<Dual>) const;

std::pair<std::vector<double>, std::vector<double>> combined_affect(const CombinedModel& cm,
                                                                    std::span<const double> x_pre, double t,
                                                                    const EventQ& q) {
    const Dims& d = cm.dims();
    if (x_pre.size() != d.n_x()) throw DimensionMismatch("combined_affect state length mismatch");
    const auto p = cm.p0();
    return eval_a(cm, x_pre.first(d.n_xc), x_pre.subspan(d.n_xc), {}, p, t, q);
}

std::vector<double> local_to_global_a(const ConnectionSet& conn, std::span<const double> target,
                                      std::span<const double> guess) {
    const std::size_t n = conn.dims.u_z;
    const std::size_t m = conn.dims.u_a;
    if (target.size() != m) throw DimensionMismatch("target must have |upsilon_a| entries");
    std::vector<double> g(guess.begin(), guess.end());
    if (g.empty()) g.assign(n, 0.0);

    const ConnBlock& w = conn.block(ConnRow::a, ConnCol::z);
    const ConnBlock& bias = conn.bias(ConnRow::a);
    if (m == n) {
        std::vector<double> a(w.w), rhs(m);
        for (std::size_t i = 0; i < m; ++i) rhs[i] = target[i] - bias.w[i];
        if (detail::lu_solve(a, rhs, n)) return rhs;
    }
    ValueFn r_fn = [&](std::span<const double> v) {
        std::vector<double> r(m);
        for (std::size_t i = 0; i < m; ++i) {
            double acc = bias.w[i] - target[i];
            for (std::size_t j = 0; j < n; ++j) acc += w.at(i, j) * v[j];
            r[i] = acc;
        }
        return r;
    };
    JacFn jac = [&](std::span<const double>) {
        std::vector<double> j(m * n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t c = 0; c < n; ++c) j[i * n + c] = w.at(i, c);
        return j;
    };
    const double tol = 1e-10 * (1.0 + inf_norm(target));
    std::vector<std::size_t> sensitive;
    std::vector<double> jac_solution;
    try {
        return newton_restricted(r_fn, jac, g, m, tol, 50, sensitive, jac_solution);
    } catch (const NoConvergence& e) {
        throw NoSolution("local-to-global residual not reducible below tolerance", e.residual);
    }
}

std::vector<double> local_to_global_b(const ConnectionSet& conn,
                                      const std::function<std::vector<double>(std::span<const double>)>& s_a,
                                      std::span<const double> target, std::span<const double> guess) {
    const std::size_t n = conn.dims.u_z;
    const std::size_t m = conn.dims.u_b;
    if (target.size() != m) throw DimensionMismatch("target must have |upsilon_b| entries");
    if (guess.size() != n) throw DimensionMismatch("guess must have |upsilon_z| entries");

    ValueFn r_fn = [&](std::span<const double> v) {
        const std::vector<double> ups_a = apply_ca(conn, {}, {}, v);
        std::vector<double> gam_a;
        if (conn.block(ConnRow::b, ConnCol::a).mask != BlockMask::Zero) gam_a = s_a(ups_a);
        std::vector<double> r = apply_cb(conn, gam_a, {}, v);
        for (std::size_t i = 0; i < m; ++i) r[i] -= target[i];
        return r;
    };
    JacFn jac = [&](std::span<const double> v) { return fd_jacobian(r_fn, v, m); };
    const double tol = 1e-10 * (1.0 + inf_norm(target));
    std::vector<std::size_t> sensitive;
    std::vector<double> jac_solution;
    return newton_restricted(r_fn, jac, guess, m, tol, 50, sensitive, jac_solution);
}

} // namespace huda
