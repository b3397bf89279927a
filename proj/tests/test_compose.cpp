#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "huda/bench.hpp"
#include "huda/compose.hpp"
#include "huda/ffnn.hpp"
#include "huda/rng.hpp"

using namespace huda;

namespace {

ConnDims experiment_dims() { return ConnDims{4, 4, 4, 4, 2, 4}; }

ConnectionSet identity_wiring() {
    auto conn = zero_connections(parse_topology("P"), experiment_dims());
    for (ConnRow r : {ConnRow::a}) {
        ConnBlock& az = conn.block(r, ConnCol::z);
        az.mask = BlockMask::Frozen;
        for (int i = 0; i < 4; ++i) az.at(i, i) = 1.0;
    }
    ConnBlock& za = conn.block(ConnRow::z, ConnCol::a);
    za.mask = BlockMask::Frozen;
    for (int i = 0; i < 4; ++i) za.at(i, i) = 1.0;
    return conn;
}

std::vector<double> matvec(const ConnBlock& blk, std::span<const double> x) {
    std::vector<double> out(blk.rows, 0.0);
    for (std::size_t i = 0; i < blk.rows; ++i)
        for (std::size_t j = 0; j < blk.cols; ++j) out[i] += blk.at(i, j) * x[j];
    return out;
}

} // namespace

TEST_CASE("combined derivative follows the connection equations") {
    const auto fpm = build_fpm();
    const auto mlm = std::make_shared<FfnnModel>(mlm_ffnn_spec(), 3);
    const auto conn = init_connections(parse_topology("P"), experiment_dims(), 0.05, 7);
    const auto cm = combine(fpm, mlm, conn);

    CHECK(cm->dims().n_xc == 4);
    CHECK(cm->dims().n_z == 4);
    CHECK(cm->dims().n_p == 16 * 3 + 8 + 58);

    const std::vector<double> x{0.3, -1.2, 0.5, 2.0};
    const auto p = cm->p0();
    const auto dx = eval_fc(*cm, x, {}, {}, p, 0.0);

    const auto ups_a = matvec(conn.block(ConnRow::a, ConnCol::z), x);
    const auto gam_a = eval_fc(*fpm, ups_a, {}, {}, {}, 0.0);
    const auto ups_b = matvec(conn.block(ConnRow::b, ConnCol::z), x);
    const auto gam_b = ffnn_forward(mlm->spec(), mlm->p0(), ups_b);
    auto expected = matvec(conn.block(ConnRow::z, ConnCol::a), gam_a);
    const auto zb = matvec(conn.block(ConnRow::z, ConnCol::b), gam_b);
    for (int i = 0; i < 4; ++i) expected[i] += zb[i];
    for (int i = 0; i < 4; ++i) CHECK(dx[i] == doctest::Approx(expected[i]).epsilon(1e-14));
}

TEST_CASE("loopy wirings are refused") {
    const auto fpm = build_fpm();
    const auto mlm = std::make_shared<FfnnModel>(FfnnSpec{{LayerSpec{4, 4, Activation::Tanh}}}, 3);
    ConnDims dims{4, 4, 4, 4, 4, 4};
    auto conn = zero_connections(parse_topology("PS"), dims);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            conn.blocks[r][c].mask = BlockMask::Trainable;
            conn.blocks[r][c].at(0, 0) = 1.0;
        }
    CHECK_THROWS_AS(combine(fpm, mlm, conn), LoopyTopology);
}

TEST_CASE("identity wiring reproduces the standalone model") {
    const auto fpm = build_fpm();
    const auto mlm = std::make_shared<FfnnModel>(mlm_ffnn_spec(), 5);
    const auto cm = combine(fpm, mlm, identity_wiring());

    const Scenario sc = scenario(1);
    const auto traj_cm = integrate(*cm, sc.x0, {}, cm->p0(), sc.tspan, {});
    const auto traj_a = integrate(*fpm, sc.x0, {}, {}, sc.tspan, {});

    REQUIRE(traj_a.events.size() >= 2);
    REQUIRE(traj_cm.events.size() == traj_a.events.size());
    for (std::size_t i = 0; i < traj_a.events.size(); ++i) {
        CHECK(std::abs(traj_cm.events[i].when.t - traj_a.events[i].when.t) <= 1e-8);
        for (int k = 0; k < 4; ++k)
            CHECK(std::abs(traj_cm.events[i].x_post[k] - traj_a.events[i].x_post[k]) <= 1e-8);
    }
    const auto& fa = traj_a.final_sample();
    const auto& fc = traj_cm.final_sample();
    for (int k = 0; k < 4; ++k) CHECK(std::abs(fc.xc[k] - fa.xc[k]) <= 1e-8);
}

TEST_CASE("a constant-zero partner with severed output is neutral") {
    const auto fpm = build_fpm();
    const auto mlm = std::make_shared<FfnnModel>(mlm_ffnn_spec(), 5);
    auto conn = identity_wiring();
    ConnBlock& bz = conn.block(ConnRow::b, ConnCol::z);
    bz.mask = BlockMask::Frozen;
    for (int i = 0; i < 4; ++i) bz.at(i, i) = 1.0; // feed the partner, ignore its output (W_zb = 0)
    const auto cm = combine(fpm, mlm, conn);

    const Scenario sc = scenario(2);
    const auto traj_cm = integrate(*cm, sc.x0, {}, cm->p0(), sc.tspan, {});
    const auto traj_a = integrate(*fpm, sc.x0, {}, {}, sc.tspan, {});
    const auto& fa = traj_a.final_sample();
    const auto& fc = traj_cm.final_sample();
    for (int k = 0; k < 4; ++k) CHECK(std::abs(fc.xc[k] - fa.xc[k]) <= 1e-8);
}

TEST_CASE("combination closes over itself") {
    const auto fpm = build_fpm();
    const auto mlm = std::make_shared<FfnnModel>(mlm_ffnn_spec(), 5);
    const auto conn1 = init_connections(parse_topology("P"), experiment_dims(), 0.02, 7);
    const auto cm1 = combine(fpm, mlm, conn1);

    const auto mlm2 = std::make_shared<FfnnModel>(mlm_ffnn_spec(), 9);
    const auto conn2 = init_connections(parse_topology("P"), experiment_dims(), 0.02, 8);
    const auto cm2 = combine(std::static_pointer_cast<const HudaModel>(cm1), mlm2, conn2);

    CHECK(cm2->dims().n_xc == 4);
    CHECK(cm2->dims().n_p == cm1->dims().n_p + 56 + 58);

    // manual inlining of the nested evaluation
    const std::vector<double> x{0.2, 0.4, -0.1, 1.5};
    const auto p2 = cm2->p0();
    const auto dx = eval_fc(*cm2, x, {}, {}, p2, 0.0);

    const auto ups_a = matvec(conn2.block(ConnRow::a, ConnCol::z), x);
    const auto gam_a = eval_fc(*cm1, ups_a, {}, {}, cm1->p0(), 0.0);
    const auto ups_b = matvec(conn2.block(ConnRow::b, ConnCol::z), x);
    const auto gam_b = ffnn_forward(mlm2->spec(), mlm2->p0(), ups_b);
    auto expected = matvec(conn2.block(ConnRow::z, ConnCol::a), gam_a);
    const auto zb = matvec(conn2.block(ConnRow::z, ConnCol::b), gam_b);
    for (int i = 0; i < 4; ++i) expected[i] += zb[i];
    for (int i = 0; i < 4; ++i) CHECK(dx[i] == doctest::Approx(expected[i]).epsilon(1e-13));

    // and the nested model still simulates through events
    const auto traj = integrate(*cm2, std::vector<double>{0.0, 0.0, 0.0, 0.0}, {}, p2, {0.0, 0.6}, {});
    CHECK(!traj.events.empty());
}

TEST_CASE("local state maps back to the global state") {
    SUBCASE("identity feed") {
        auto conn = identity_wiring();
        const auto uz = local_to_global_a(conn, std::vector<double>{1, 2, 3, 4});
        CHECK(uz == std::vector<double>{1, 2, 3, 4});
    }
    SUBCASE("scaled feed has the analytic inverse") {
        auto conn = identity_wiring();
        ConnBlock& az = conn.block(ConnRow::a, ConnCol::z);
        for (int i = 0; i < 4; ++i) az.at(i, i) = 2.0;
        const auto uz = local_to_global_a(conn, std::vector<double>{2, 4, 6, 8});
        for (int i = 0; i < 4; ++i) CHECK(uz[i] == doctest::Approx(i + 1.0).epsilon(1e-12));
    }
    SUBCASE("upper triangular back-substitution") {
        ConnDims dims{2, 2, 2, 2, 2, 2};
        auto conn = zero_connections(parse_topology("P"), dims);
        ConnBlock& az = conn.block(ConnRow::a, ConnCol::z);
        az.mask = BlockMask::Frozen;
        az.at(0, 0) = 1.0;
        az.at(0, 1) = 1.0;
        az.at(1, 1) = 1.0;
        const auto uz = local_to_global_a(conn, std::vector<double>{3, 1});
        CHECK(uz[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(uz[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("direct feed when the serial link is absent") {
        ConnDims dims{2, 2, 2, 2, 2, 2};
        auto conn = zero_connections(parse_topology("P"), dims);
        ConnBlock& bz = conn.block(ConnRow::b, ConnCol::z);
        bz.mask = BlockMask::Frozen;
        bz.at(0, 0) = 1.0;
        bz.at(1, 1) = 1.0;
        auto s_a = [](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); };
        const auto uz = local_to_global_b(conn, s_a, std::vector<double>{5, -3}, std::vector<double>{0, 0});
        CHECK(uz[0] == doctest::Approx(5.0).epsilon(1e-10));
        CHECK(uz[1] == doctest::Approx(-3.0).epsilon(1e-10));
    }
    SUBCASE("identity submodel behind identity feeds solves in one step") {
        ConnDims dims{2, 2, 2, 2, 2, 2};
        auto conn = zero_connections(parse_topology("PS"), dims);
        for (auto [r, c] : {std::pair{ConnRow::a, ConnCol::z}, {ConnRow::b, ConnCol::a}}) {
            ConnBlock& blk = conn.block(r, c);
            blk.mask = BlockMask::Frozen;
            blk.at(0, 0) = 1.0;
            blk.at(1, 1) = 1.0;
        }
        auto s_a = [](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); };
        const auto uz = local_to_global_b(conn, s_a, std::vector<double>{1.5, 2.5}, std::vector<double>{1, 2});
        CHECK(uz[0] == doctest::Approx(1.5).epsilon(1e-10));
        CHECK(uz[1] == doctest::Approx(2.5).epsilon(1e-10));
    }
    SUBCASE("cube root through the first submodel") {
        ConnDims dims{1, 1, 1, 1, 1, 1};
        auto conn = zero_connections(parse_topology("PS"), dims);
        conn.block(ConnRow::a, ConnCol::z).mask = BlockMask::Frozen;
        conn.block(ConnRow::a, ConnCol::z).at(0, 0) = 1.0;
        conn.block(ConnRow::b, ConnCol::a).mask = BlockMask::Frozen;
        conn.block(ConnRow::b, ConnCol::a).at(0, 0) = 1.0;
        auto cube = [](std::span<const double> x) { return std::vector<double>{x[0] * x[0] * x[0]}; };
        const auto uz = local_to_global_b(conn, cube, std::vector<double>{8.0}, std::vector<double>{1.0});
        CHECK(std::abs(uz[0] * uz[0] * uz[0] - 8.0) <= 1e-10 * 9.0);
        CHECK(uz[0] == doctest::Approx(2.0).epsilon(1e-10));
    }
    SUBCASE("insensitive entries stay bitwise at the guess") {
        ConnDims dims{1, 1, 1, 1, 1, 2};
        auto conn = zero_connections(parse_topology("PS"), dims);
        ConnBlock& az = conn.block(ConnRow::a, ConnCol::z);
        az.mask = BlockMask::Frozen;
        az.at(0, 0) = 1.0; // second global entry never enters the residual
        conn.block(ConnRow::b, ConnCol::a).mask = BlockMask::Frozen;
        conn.block(ConnRow::b, ConnCol::a).at(0, 0) = 1.0;
        auto cube = [](std::span<const double> x) { return std::vector<double>{x[0] * x[0] * x[0]}; };
        const std::vector<double> guess{1.0, 0.123456789123456789};
        const auto uz = local_to_global_b(conn, cube, std::vector<double>{8.0}, guess);
        CHECK(uz[0] == doctest::Approx(2.0).epsilon(1e-10));
        CHECK(uz[1] == guess[1]);
    }
    SUBCASE("unreachable targets report the residual") {
        ConnDims dims{1, 1, 1, 1, 1, 1};
        auto conn = zero_connections(parse_topology("PS"), dims);
        conn.block(ConnRow::b, ConnCol::a).mask = BlockMask::Frozen;
        conn.block(ConnRow::b, ConnCol::a).at(0, 0) = 1.0;
        auto saturating = [](std::span<const double> x) { return std::vector<double>{std::tanh(x[0])}; };
        CHECK_THROWS(local_to_global_b(conn, saturating, std::vector<double>{8.0}, std::vector<double>{0.5}));
    }
}

TEST_CASE("combined affect routes by source") {
    SUBCASE("event in the physics submodel equals the plain bounce") {
        const auto fpm = build_fpm();
        const auto mlm = std::make_shared<FfnnModel>(mlm_ffnn_spec(), 5);
        const auto cm = combine(fpm, mlm, identity_wiring());
        const std::vector<double> x_pre{0.9, 3.0, 0.2, -1.0};
        EventQ q(4);
        q.set(1);
        const auto [xc_post, xd_post] = combined_affect(*cm, x_pre, 0.3, q);
        const auto [ref, ref_xd] = eval_a(*fpm, x_pre, {}, {}, {}, 0.3, q);
        for (int i = 0; i < 4; ++i) CHECK(xc_post[i] == doctest::Approx(ref[i]).epsilon(1e-14));
    }
    SUBCASE("discrete-only partner event leaves the continuous state bitwise") {
        const auto fpm = build_fpm();
        const auto rnn = build_variant(VariantKind::Discrete, 11);
        ConnDims dims{4, 0, 4, 4, 4, 4};
        auto conn = zero_connections(parse_topology("P"), dims);
        ConnBlock& az = conn.block(ConnRow::a, ConnCol::z);
        ConnBlock& za = conn.block(ConnRow::z, ConnCol::a);
        az.mask = BlockMask::Frozen;
        za.mask = BlockMask::Frozen;
        for (int i = 0; i < 4; ++i) az.at(i, i) = 1.0;
        for (int i = 0; i < 4; ++i) za.at(i, i) = 1.0;
        const auto cm = combine(fpm, std::static_pointer_cast<const HudaModel>(rnn), conn);
        CHECK(cm->dims().n_z == 5);
        CHECK(cm->dims().n_xd == rnn->dims().n_xd);

        const std::vector<double> xc{0.25, 0.5, -0.25, 0.5};
        std::vector<double> xd(rnn->dims().n_xd, 0.0);
        xd[0] = 0.3;
        xd[1] = -0.4;
        xd[2] = 0.5;
        xd[3] = 0.6;
        xd.back() = 1.0;
        EventQ q(5);
        q.set(4); // the RNN 10 Hz time event
        const auto p = cm->p0();
        const auto [xc_post, xd_post] = eval_a(*cm, xc, xd, {}, p, 0.1, q);
        CHECK(xc_post == xc);
        // the update matches the standalone RNN affect
        EventQ q_local(1);
        q_local.set(0);
        const auto [ref_xc, ref_xd] = eval_a(*rnn, {}, xd, {}, rnn->p0(), 0.1, q_local);
        CHECK(xd_post == ref_xd);
        CHECK(xd_post.back() == 2.0);
    }
    SUBCASE("cross-submodel q is rejected") {
        const auto fpm = build_fpm();
        const auto rnn = build_variant(VariantKind::Discrete, 11);
        ConnDims dims{4, 0, 4, 4, 4, 4};
        auto conn = zero_connections(parse_topology("P"), dims);
        conn.block(ConnRow::a, ConnCol::z).mask = BlockMask::Frozen;
        conn.block(ConnRow::z, ConnCol::a).mask = BlockMask::Frozen;
        for (int i = 0; i < 4; ++i) conn.block(ConnRow::a, ConnCol::z).at(i, i) = 1.0;
        for (int i = 0; i < 4; ++i) conn.block(ConnRow::z, ConnCol::a).at(i, i) = 1.0;
        const auto cm = combine(fpm, std::static_pointer_cast<const HudaModel>(rnn), conn);
        EventQ q(5);
        q.set(0);
        q.set(4);
        std::vector<double> x(cm->dims().n_x(), 0.0);
        x[0] = 0.9;
        x[1] = 1.0;
        x.back() = 1.0;
        CHECK_THROWS(combined_affect(*cm, x, 0.1, q));
    }
}

TEST_CASE("combined models integrate with routed events") {
    const auto fpm = build_fpm();
    const auto rnn = build_variant(VariantKind::Discrete, 11);
    ConnDims dims{4, 0, 4, 4, 4, 4};
    auto conn = zero_connections(parse_topology("P"), dims);
    conn.block(ConnRow::a, ConnCol::z).mask = BlockMask::Frozen;
    conn.block(ConnRow::z, ConnCol::a).mask = BlockMask::Frozen;
    for (int i = 0; i < 4; ++i) conn.block(ConnRow::a, ConnCol::z).at(i, i) = 1.0;
    for (int i = 0; i < 4; ++i) conn.block(ConnRow::z, ConnCol::a).at(i, i) = 1.0;
    const auto cm = combine(fpm, std::static_pointer_cast<const HudaModel>(rnn), conn);

    const std::vector<double> xc0{0.0, 0.3, 0.0, 0.0};
    std::vector<double> xd0(cm->dims().n_xd, 0.0);
    xd0.back() = 1.0;
    const auto traj = integrate(*cm, xc0, xd0, cm->p0(), {0.0, 0.55}, {});

    std::size_t rnn_events = 0, ball_events = 0;
    for (const auto& ev : traj.events) {
        if (ev.group == 1) {
            ++rnn_events;
            // only the partner's discrete state changes
            for (int i = 0; i < 4; ++i) CHECK(ev.x_post[i] == ev.x_pre[i]);
        } else {
            ++ball_events;
        }
    }
    CHECK(rnn_events == 5); // 10 Hz over (0, 0.55]
    CHECK(ball_events == 1); // the drop reaches the floor at ~0.43 s
}
