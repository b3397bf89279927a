#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "huda/dual.hpp"
#include "huda/errors.hpp"

namespace huda {

/// Signature sizes of a model: continuous/discrete states, inputs, outputs,
/// event indicators and parameters.
struct Dims {
    std::size_t n_xc = 0;
    std::size_t n_xd = 0;
    std::size_t n_u = 0;
    std::size_t n_y = 0;
    std::size_t n_z = 0;
    std::size_t n_p = 0;

    std::size_t n_x() const { return n_xc + n_xd; }
    bool operator==(const Dims&) const = default;
};

/// Multi-hot vector identifying which event indicators crossed zero.
struct EventQ {
    std::vector<std::uint8_t> q;

    EventQ() = default;
    explicit EventQ(std::size_t n) : q(n, 0) {}

    std::size_t size() const { return q.size(); }
    bool any() const {
        for (auto v : q)
            if (v) return true;
        return false;
    }
    void set(std::size_t i) { q[i] = 1; }
    bool test(std::size_t i) const { return q[i] != 0; }
};

/// Time point augmented with an event counter so instantaneous state updates
/// at one physical instant have a well-defined order.
struct SuperDenseTime {
    double t = 0.0;
    std::uint32_t minor = 0;

    friend std::partial_ordering operator<=>(const SuperDenseTime& a, const SuperDenseTime& b) {
        if (auto c = a.t <=> b.t; c != 0) return c;
        return std::partial_ordering(a.minor <=> b.minor);
    }
    friend bool operator==(const SuperDenseTime&, const SuperDenseTime&) = default;
};

/// Half-open index range [begin, end) of event indicators that may fire
/// within one super-dense instant.
struct EventGroup {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// The five-part model interface: continuous dynamics f_c, output g, event
/// condition c, event affect a, plus an optional input function u(t).
///
/// Every map is pure and offered in both plain (double) and forward-mode
/// (Dual) arithmetic; the two paths run the same code. Models are immutable
/// after construction and safe to share across threads.
class HudaModel {
public:
    virtual ~HudaModel() = default;

    virtual const Dims& dims() const = 0;

    virtual void fc(std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
                    std::span<const double> p, double t, std::span<double> dxc) const = 0;
    virtual void fc(std::span<const Dual> xc, std::span<const Dual> xd, std::span<const Dual> u,
                    std::span<const Dual> p, const Dual& t, std::span<Dual> dxc) const = 0;

    virtual void g(std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
                   std::span<const double> p, double t, std::span<double> y) const = 0;
    virtual void g(std::span<const Dual> xc, std::span<const Dual> xd, std::span<const Dual> u,
                   std::span<const Dual> p, const Dual& t, std::span<Dual> y) const = 0;

    virtual void c(std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
                   std::span<const double> p, double t, std::span<double> z) const = 0;
    virtual void c(std::span<const Dual> xc, std::span<const Dual> xd, std::span<const Dual> u,
                   std::span<const Dual> p, const Dual& t, std::span<Dual> z) const = 0;

    virtual void a(std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
                   std::span<const double> p, double t, const EventQ& q, std::span<double> xc_post,
                   std::span<double> xd_post) const = 0;
    virtual void a(std::span<const Dual> xc, std::span<const Dual> xd, std::span<const Dual> u,
                   std::span<const Dual> p, const Dual& t, const EventQ& q, std::span<Dual> xc_post,
                   std::span<Dual> xd_post) const = 0;

    /// Input u(t). The default writes nothing (n_u = 0).
    virtual void input(double /*t*/, std::span<double> /*u*/) const {}
    virtual void input(const Dual& /*t*/, std::span<Dual> /*u*/) const {}

    /// Indicator groups that may fire within the same super-dense instant.
    /// Combined models partition indicators by source submodel.
    virtual std::vector<EventGroup> event_groups() const { return {EventGroup{0, dims().n_z}}; }

    virtual std::vector<double> p0() const = 0;
    virtual std::vector<double> xc0() const = 0;
    virtual std::vector<double> xd0() const { return std::vector<double>(dims().n_xd, 0.0); }

    virtual std::string name() const { return "model"; }
};

using ModelPtr = std::shared_ptr<const HudaModel>;

/// CRTP helper: a concrete model implements the templated *_impl maps once
/// and gets both double and Dual overrides generated.
template <class Derived>
class ModelBase : public HudaModel {
public:
    void fc(std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
            std::span<const double> p, double t, std::span<double> dxc) const final {
        self().template fc_impl<double>(xc, xd, u, p, t, dxc);
    }
    void fc(std::span<const Dual> xc, std::span<const Dual> xd, std::span<const Dual> u,
            std::span<const Dual> p, const Dual& t, std::span<Dual> dxc) const final {
        self().template fc_impl<Dual>(xc, xd, u, p, t, dxc);
    }
    void g(std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
           std::span<const double> p, double t, std::span<double> y) const final {
        self().template g_impl<double>(xc, xd, u, p, t, y);
    }
    void g(std::span<const Dual> xc, std::span<const Dual> xd, std::span<const Dual> u,
           std::span<const Dual> p, const Dual& t, std::span<Dual> y) const final {
        self().template g_impl<Dual>(xc, xd, u, p, t, y);
    }
    void c(std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
           std::span<const double> p, double t, std::span<double> z) const final {
        self().template c_impl<double>(xc, xd, u, p, t, z);
    }
    void c(std::span<const Dual> xc, std::span<const Dual> xd, std::span<const Dual> u,
           std::span<const Dual> p, const Dual& t, std::span<Dual> z) const final {
        self().template c_impl<Dual>(xc, xd, u, p, t, z);
    }
    void a(std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
           std::span<const double> p, double t, const EventQ& q, std::span<double> xc_post,
           std::span<double> xd_post) const final {
        self().template a_impl<double>(xc, xd, u, p, t, q, xc_post, xd_post);
    }
    void a(std::span<const Dual> xc, std::span<const Dual> xd, std::span<const Dual> u,
           std::span<const Dual> p, const Dual& t, const EventQ& q, std::span<Dual> xc_post,
           std::span<Dual> xd_post) const final {
        self().template a_impl<Dual>(xc, xd, u, p, t, q, xc_post, xd_post);
    }

private:
    const Derived& self() const { return static_cast<const Derived&>(*this); }
};

/// Checked evaluation front ends (dimension validation, fresh result vectors).
std::vector<double> eval_fc(const HudaModel& m, std::span<const double> xc, std::span<const double> xd,
                            std::span<const double> u, std::span<const double> p, double t);
std::vector<double> eval_g(const HudaModel& m, std::span<const double> xc, std::span<const double> xd,
                           std::span<const double> u, std::span<const double> p, double t);
std::vector<double> eval_c(const HudaModel& m, std::span<const double> xc, std::span<const double> xd,
                           std::span<const double> u, std::span<const double> p, double t);

/// Applies the event affect; x is the full pre-event state (x_c ++ x_d).
/// Throws NoEventFlagged when q is all-zero.
std::pair<std::vector<double>, std::vector<double>>
eval_a(const HudaModel& m, std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
       std::span<const double> p, double t, const EventQ& q);

} // namespace huda
