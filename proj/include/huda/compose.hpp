#pragma once

#include <functional>
#include <memory>

#include "huda/connect.hpp"
#include "huda/model.hpp"
#include "huda/structure.hpp"

namespace huda {

/// How a submodel is wired into the combination: StateDerivative treats the
/// continuous state as the submodel input and f_c as its output (the
/// experiment convention); Output wires u -> g for pure algebraic models.
/// Selected per submodel: models with continuous states use
/// StateDerivative, stateless models use Output.
enum class WiringProfile { StateDerivative, Output };

class CombinedModel;
using CombinedPtr = std::shared_ptr<const CombinedModel>;

/// Combines two models through the connection equations into a new
/// HudaModel (closure). Refuses wirings whose occupancy admits algebraic
/// loops (LoopyTopology, carrying the loop components).
CombinedPtr combine(ModelPtr model_a, ModelPtr model_b, ConnectionSet conn);

/// The combination: a HudaModel whose continuous state is the global vector
/// upsilon_z, evaluating submodels in BLT order and routing events back
/// through the connection equations.
class CombinedModel : public ModelBase<CombinedModel> {
public:
    const Dims& dims() const override { return dims_; }
    std::vector<double> p0() const override { return p0_; }
    std::vector<double> xc0() const override { return xc0_; }
    std::vector<double> xd0() const override { return xd0_; }
    std::vector<EventGroup> event_groups() const override;
    std::string name() const override;

    const ConnectionSet& connection() const { return conn_; }
    const ParamLayout& layout() const { return layout_; }
    const BltOrder& order() const { return order_; }
    const HudaModel& submodel_a() const { return *a_; }
    const HudaModel& submodel_b() const { return *b_; }
    bool a_first() const { return a_first_; }

    /// Connection set with trainable entries patched from a flat parameter
    /// vector (for checkpoints and matrix dumps).
    ConnectionSet connection_with(std::span<const double> params) const;

    template <class T>
    void fc_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T> u, std::span<const T> p,
                 const T& t, std::span<T> dxc) const;
    template <class T>
    void g_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T> u, std::span<const T> p,
                const T& t, std::span<T> y) const;
    template <class T>
    void c_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T> u, std::span<const T> p,
                const T& t, std::span<T> z) const;
    template <class T>
    void a_impl(std::span<const T> xc, std::span<const T> xd, std::span<const T> u, std::span<const T> p,
                const T& t, const EventQ& q, std::span<T> xc_post, std::span<T> xd_post) const;

private:
    friend CombinedPtr combine(ModelPtr, ModelPtr, ConnectionSet);
    CombinedModel() = default;

    struct Side {
        ModelPtr model;
        WiringProfile profile = WiringProfile::StateDerivative;
        ConnRow row = ConnRow::a;  ///< connection row feeding this submodel
        ConnCol col = ConnCol::a;  ///< connection column carrying its output
        std::size_t n_ups = 0, n_gam = 0;
        std::size_t xd_off = 0, n_xd = 0;
        std::size_t z_off = 0, n_z = 0;
    };

    const Side& side(bool first) const { return first == a_first_ ? side_a_ : side_b_; }

    template <class T>
    void eval_submodel(const Side& s, std::span<const T> ups, std::span<const T> xd, std::span<const T> p,
                       const T& t, std::span<T> gam) const;

    template <class T>
    void blt_locals(std::span<const T> xc, std::span<const T> xd, std::span<const T> p, const T& t,
                    std::vector<T>& ups_a, std::vector<T>& ups_b, std::vector<T>& gam_a,
                    std::vector<T>& gam_b, bool need_second) const;

    template <class T>
    std::vector<T> propagate_local_state(const Side& src, std::span<const T> target, std::span<const T> guess,
                                         std::span<const T> xd, std::span<const T> p, const T& t) const;

    ModelPtr a_, b_;
    ConnectionSet conn_;
    ParamLayout layout_;
    BltOrder order_;
    bool a_first_ = true;
    Side side_a_, side_b_;
    Dims dims_;
    std::vector<double> p0_, xc0_, xd0_;
};

/// Applies the combined affect to a full pre-event state (x_c ++ x_d).
std::pair<std::vector<double>, std::vector<double>> combined_affect(const CombinedModel& cm,
                                                                    std::span<const double> x_pre, double t,
                                                                    const EventQ& q);

/// Solves W_az upsilon_z + b_a = target for the global state after an event
/// in the first-evaluated submodel. Invertible W_az uses the direct linear
/// solve; otherwise a least-squares step over the sensitive entries of the
/// guess. Entries with identically zero residual gradient stay bitwise at
/// the guess.
std::vector<double> local_to_global_a(const ConnectionSet& conn, std::span<const double> target,
                                      std::span<const double> guess = {});

/// Solves W_ba s_a(W_az upsilon_z + b_a) + W_bz upsilon_z + b_b = target by
/// damped Newton over the sensitive entries, starting from the pre-event
/// global state. The Jacobian uses central finite differences
/// (h = 1e-7 (1+|x|)) since s_a is an opaque callable here.
std::vector<double> local_to_global_b(const ConnectionSet& conn,
                                      const std::function<std::vector<double>(std::span<const double>)>& s_a,
                                      std::span<const double> target, std::span<const double> guess);

} // namespace huda
