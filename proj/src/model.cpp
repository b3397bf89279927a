#include "huda/model.hpp"

#include <string>

namespace huda {

namespace {

void check(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(want) + ", got " +
                                std::to_string(got));
}

void check_args(const HudaModel& m, std::span<const double> xc, std::span<const double> xd,
                std::span<const double> u, std::span<const double> p) {
    const Dims& d = m.dims();
    check(xc.size(), d.n_xc, "x_c length");
    check(xd.size(), d.n_xd, "x_d length");
    check(u.size(), d.n_u, "u length");
    check(p.size(), d.n_p, "p length");
}

} // namespace

std::vector<double> eval_fc(const HudaModel& m, std::span<const double> xc, std::span<const double> xd,
                            std::span<const double> u, std::span<const double> p, double t) {
    check_args(m, xc, xd, u, p);
    std::vector<double> dxc(m.dims().n_xc, 0.0);
    m.fc(xc, xd, u, p, t, dxc);
    return dxc;
}

std::vector<double> eval_g(const HudaModel& m, std::span<const double> xc, std::span<const double> xd,
                           std::span<const double> u, std::span<const double> p, double t) {
    check_args(m, xc, xd, u, p);
    std::vector<double> y(m.dims().n_y, 0.0);
    m.g(xc, xd, u, p, t, y);
    return y;
}

std::vector<double> eval_c(const HudaModel& m, std::span<const double> xc, std::span<const double> xd,
                           std::span<const double> u, std::span<const double> p, double t) {
    check_args(m, xc, xd, u, p);
    std::vector<double> z(m.dims().n_z, 0.0);
    m.c(xc, xd, u, p, t, z);
    return z;
}

std::pair<std::vector<double>, std::vector<double>>
eval_a(const HudaModel& m, std::span<const double> xc, std::span<const double> xd, std::span<const double> u,
       std::span<const double> p, double t, const EventQ& q) {
    check_args(m, xc, xd, u, p);
    check(q.size(), m.dims().n_z, "q length");
    if (!q.any()) throw NoEventFlagged("event affect called with all-zero q");
    std::vector<double> xc_post(m.dims().n_xc, 0.0);
    std::vector<double> xd_post(m.dims().n_xd, 0.0);
    m.a(xc, xd, u, p, t, q, xc_post, xd_post);
    return {std::move(xc_post), std::move(xd_post)};
}

} // namespace huda
