#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "huda/connect.hpp"
#include "huda/ffnn.hpp"
#include "huda/rng.hpp"

using namespace huda;

namespace {

ConnDims experiment_dims() { return ConnDims{4, 4, 4, 4, 2, 4}; }

bool occ_equals(const Occupancy& occ, bool az, bool ba, bool bz, bool za, bool zb, bool zz) {
    return occ(ConnRow::a, ConnCol::z) == az && occ(ConnRow::b, ConnCol::a) == ba &&
           occ(ConnRow::b, ConnCol::z) == bz && occ(ConnRow::z, ConnCol::a) == za &&
           occ(ConnRow::z, ConnCol::b) == zb && occ(ConnRow::z, ConnCol::z) == zz &&
           !occ(ConnRow::a, ConnCol::a) && !occ(ConnRow::b, ConnCol::b) && !occ(ConnRow::a, ConnCol::b);
}

} // namespace

TEST_CASE("topology parsing round trip") {
    CHECK(parse_topology("PSD") == TopologyTag{true, true, true, 'a'});
    CHECK(parse_topology("PSDb") == TopologyTag{true, true, true, 'b'});
    CHECK(parse_topology("P") == TopologyTag{true, false, false, 'a'});
    CHECK(parse_topology("SD") == TopologyTag{false, true, true, 'a'});
    CHECK(topology_name(parse_topology("PSb")) == "PSb");
    CHECK_THROWS(parse_topology("XD"));
    CHECK_THROWS(parse_topology(""));
    CHECK_THROWS(parse_topology("Pb")); // case suffix without S
}

TEST_CASE("occupancy table") {
    CHECK(occ_equals(mask_for_topology(parse_topology("PSD")), true, true, true, true, true, true));
    CHECK(occ_equals(mask_for_topology(parse_topology("PS")), true, true, true, true, true, false));
    CHECK(occ_equals(mask_for_topology(parse_topology("PD")), true, false, true, true, true, true));
    CHECK(occ_equals(mask_for_topology(parse_topology("P")), true, false, true, true, true, false));
    CHECK(occ_equals(mask_for_topology(parse_topology("SD")), true, true, false, false, true, true));
    CHECK(occ_equals(mask_for_topology(parse_topology("S")), true, true, false, false, true, false));
    CHECK(occ_equals(mask_for_topology(parse_topology("D")), false, false, false, false, false, true));

    SUBCASE("case b swaps the serial link") {
        const Occupancy occ = mask_for_topology(parse_topology("PSb"));
        CHECK(occ(ConnRow::a, ConnCol::b));
        CHECK(!occ(ConnRow::b, ConnCol::a));
        CHECK(occ(ConnRow::b, ConnCol::z));
        CHECK(occ(ConnRow::a, ConnCol::z));
    }
}

TEST_CASE("initialization follows the occupancy and identity rules") {
    const ConnDims dims = experiment_dims();
    SUBCASE("PSD blocks") {
        const auto conn = init_connections(parse_topology("PSD"), dims, 0.0, 11);
        for (auto [r, c] : {std::pair{ConnRow::a, ConnCol::z}, {ConnRow::b, ConnCol::a}, {ConnRow::z, ConnCol::a}}) {
            const ConnBlock& blk = conn.block(r, c);
            CHECK(blk.mask == BlockMask::Trainable);
            for (std::size_t i = 0; i < blk.rows; ++i)
                for (std::size_t j = 0; j < blk.cols; ++j) CHECK(blk.at(i, j) == (i == j ? 1.0 : 0.0));
        }
        for (auto [r, c] : {std::pair{ConnRow::b, ConnCol::z}, {ConnRow::z, ConnCol::b}, {ConnRow::z, ConnCol::z}}) {
            const ConnBlock& blk = conn.block(r, c);
            CHECK(blk.mask == BlockMask::Trainable);
            for (double w : blk.w) CHECK(w == 0.0);
        }
    }
    SUBCASE("P keeps the serial and feed-through blocks as static zeros") {
        const auto conn = init_connections(parse_topology("P"), dims, 0.05, 11);
        CHECK(conn.block(ConnRow::b, ConnCol::a).mask == BlockMask::Zero);
        CHECK(conn.block(ConnRow::z, ConnCol::z).mask == BlockMask::Zero);
        for (double w : conn.block(ConnRow::b, ConnCol::a).w) CHECK(w == 0.0);
        CHECK(conn.block(ConnRow::a, ConnCol::z).mask == BlockMask::Trainable);
    }
    SUBCASE("pure serial routes the network output through W_zb identity") {
        const auto conn = init_connections(parse_topology("S"), dims, 0.0, 11);
        const ConnBlock& zb = conn.block(ConnRow::z, ConnCol::b);
        CHECK(zb.mask == BlockMask::Trainable);
        CHECK(zb.at(0, 0) == 1.0);
        CHECK(zb.at(1, 1) == 1.0);
        CHECK(zb.at(2, 0) == 0.0);
        CHECK(conn.block(ConnRow::z, ConnCol::a).mask == BlockMask::Zero);
    }
    SUBCASE("noise is bounded, deterministic and seed-dependent") {
        const auto c1 = init_connections(parse_topology("PSD"), dims, 0.05, 42);
        const auto c2 = init_connections(parse_topology("PSD"), dims, 0.05, 42);
        const auto c3 = init_connections(parse_topology("PSD"), dims, 0.05, 43);
        CHECK(c1.block(ConnRow::a, ConnCol::z).w == c2.block(ConnRow::a, ConnCol::z).w);
        CHECK(c1.block(ConnRow::a, ConnCol::z).w != c3.block(ConnRow::a, ConnCol::z).w);
        const ConnBlock& az = c1.block(ConnRow::a, ConnCol::z);
        for (std::size_t i = 0; i < az.rows; ++i)
            for (std::size_t j = 0; j < az.cols; ++j)
                CHECK(std::abs(az.at(i, j) - (i == j ? 1.0 : 0.0)) <= 0.05);
    }
    SUBCASE("biases are exact zeros") {
        const auto conn = init_connections(parse_topology("PSD"), dims, 0.05, 1);
        for (int r = 0; r < 3; ++r) {
            CHECK(conn.biases[r].mask == BlockMask::Zero);
            for (double w : conn.biases[r].w) CHECK(w == 0.0);
        }
    }
}

TEST_CASE("connection row evaluation") {
    ConnDims dims{4, 2, 4, 2, 2, 4};
    SUBCASE("identity passthrough") {
        auto conn = zero_connections(parse_topology("P"), dims);
        ConnBlock& az = conn.block(ConnRow::a, ConnCol::z);
        az.mask = BlockMask::Frozen;
        for (int i = 0; i < 4; ++i) az.at(i, i) = 1.0;
        const auto ua = apply_ca(conn, {}, {}, std::vector<double>{1, 2, 3, 4});
        CHECK(ua == std::vector<double>{1, 2, 3, 4});
    }
    SUBCASE("bias only") {
        auto conn = zero_connections(parse_topology("P"), dims);
        conn.bias(ConnRow::a).mask = BlockMask::Frozen;
        conn.bias(ConnRow::a).w = {0.5, 0.0, 0.0, 0.0};
        const auto ua = apply_ca(conn, {}, {}, std::vector<double>{9, 9, 9, 9});
        CHECK(ua == std::vector<double>{0.5, 0.0, 0.0, 0.0});
    }
    SUBCASE("hand-evaluated c_b") {
        ConnDims d2{2, 2, 2, 2, 2, 2};
        auto conn = zero_connections(parse_topology("PS"), d2);
        ConnBlock& ba = conn.block(ConnRow::b, ConnCol::a);
        ba.mask = BlockMask::Frozen;
        ba.at(0, 0) = 1.0;
        ba.at(1, 1) = 2.0;
        ConnBlock& bz = conn.block(ConnRow::b, ConnCol::z);
        bz.mask = BlockMask::Frozen;
        bz.at(0, 0) = 1.0;
        bz.at(1, 1) = 1.0;
        conn.bias(ConnRow::b).mask = BlockMask::Frozen;
        conn.bias(ConnRow::b).w = {0.5, 0.0};
        const auto ub = apply_cb(conn, std::vector<double>{1, 2}, {}, std::vector<double>{3, 4});
        CHECK(ub == std::vector<double>{4.5, 8.0});
    }
    SUBCASE("linearity for zero bias") {
        const auto conn = init_connections(parse_topology("PSD"), experiment_dims(), 0.05, 5);
        Rng rng(9);
        std::vector<double> ga(4), gb(2), uz(4), ga2(4), gb2(2), uz2(4);
        for (auto* v : {&ga, &uz, &ga2, &uz2})
            for (auto& x : *v) x = rng.uniform_sym(2.0);
        for (auto* v : {&gb, &gb2})
            for (auto& x : *v) x = rng.uniform_sym(2.0);
        const double al = 0.7, be = -1.3;
        for (ConnRow row : {ConnRow::a, ConnRow::b, ConnRow::z}) {
            std::vector<double> lhs(4), mix_a(4), mix_b(4);
            std::vector<double> ga_mix(4), gb_mix(2), uz_mix(4);
            for (int i = 0; i < 4; ++i) ga_mix[i] = al * ga[i] + be * ga2[i];
            for (int i = 0; i < 2; ++i) gb_mix[i] = al * gb[i] + be * gb2[i];
            for (int i = 0; i < 4; ++i) uz_mix[i] = al * uz[i] + be * uz2[i];
            apply_connection_row<double>(conn, row, ga_mix, gb_mix, uz_mix, nullptr, {}, lhs);
            apply_connection_row<double>(conn, row, ga, gb, uz, nullptr, {}, mix_a);
            apply_connection_row<double>(conn, row, ga2, gb2, uz2, nullptr, {}, mix_b);
            for (int i = 0; i < 4; ++i)
                CHECK(lhs[i] == doctest::Approx(al * mix_a[i] + be * mix_b[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("concatenation wiring") {
    SUBCASE("2 + 2") {
        const auto conn = concat_wiring(2, 2);
        const auto gz = apply_cz(conn, std::vector<double>{1, 2}, std::vector<double>{3, 4}, {});
        CHECK(gz == std::vector<double>{1, 2, 3, 4});
    }
    SUBCASE("degenerate second input") {
        const auto conn = concat_wiring(3, 0);
        const auto gz = apply_cz(conn, std::vector<double>{5, 6, 7}, {}, {});
        CHECK(gz == std::vector<double>{5, 6, 7});
    }
    SUBCASE("1 + 3") {
        const auto conn = concat_wiring(1, 3);
        const auto gz = apply_cz(conn, std::vector<double>{9}, std::vector<double>{1, 1, 1}, {});
        CHECK(gz == std::vector<double>{9, 1, 1, 1});
    }
}

TEST_CASE("parameter flattening") {
    SUBCASE("topology D exposes only the feed-through block") {
        const auto conn = init_connections(parse_topology("D"), experiment_dims(), 0.01, 2);
        const auto [flat, layout] = flatten_params(conn, {}, {});
        CHECK(flat.size() == 16);
        CHECK(layout.n_conn == 16);
    }
    SUBCASE("frozen and zero entries are excluded") {
        auto conn = init_connections(parse_topology("P"), experiment_dims(), 0.01, 2);
        conn.block(ConnRow::a, ConnCol::z).mask = BlockMask::Frozen;
        FfnnModel mlm(mlm_ffnn_spec(), 1);
        const auto [flat, layout] = flatten_params(conn, {}, mlm.p0());
        CHECK(layout.n_conn == 16 + 16 + 8); // W_bz, W_za, W_zb
        CHECK(flat.size() == layout.n_conn + 58);
        CHECK(layout.n_b == 58);
    }
    SUBCASE("round trip is bitwise") {
        const auto conn = init_connections(parse_topology("PSD"), experiment_dims(), 0.05, 17);
        const auto [flat, layout] = flatten_params(conn, {}, {});
        auto flat2 = flat;
        for (auto& v : flat2) v *= 1.75;
        const ConnectionSet patched = unflatten_connection(conn, layout, flat2);
        const auto [flat3, layout3] = flatten_params(patched, {}, {});
        CHECK(flat3 == flat2);
        for (int r = 0; r < 3; ++r)
            CHECK(patched.biases[r].w == conn.biases[r].w);
    }
}

TEST_CASE("gate property: one trainable scalar scales one channel") {
    ConnDims dims{0, 0, 2, 0, 2, 0};
    auto conn = zero_connections(parse_topology("P"), dims);
    ConnBlock& zb = conn.block(ConnRow::z, ConnCol::b);
    zb.mask = BlockMask::Trainable;
    zb.at(0, 0) = 0.5;
    const auto [flat, layout] = flatten_params(conn, {}, {});
    REQUIRE(flat.size() == 4);

    const std::vector<double> gb{2.0, 3.0};
    for (double gain : {0.5, 1.0, -2.0, 7.25}) {
        std::vector<double> params = flat;
        params[0] = gain;
        std::vector<double> out(2, 0.0);
        apply_connection_row<double>(conn, ConnRow::z, {}, gb, {}, &layout,
                                     std::span<const double>(params), out);
        CHECK(out[0] == gain * 2.0);
        CHECK(out[1] == 0.0);
    }
}

TEST_CASE("connection JSON round trip is exact") {
    const auto conn = init_connections(parse_topology("PSDb"), experiment_dims(), 0.05, 91);
    const std::string text = connection_to_json(conn);
    const ConnectionSet back = connection_from_json(text);
    CHECK(back.topology == conn.topology);
    CHECK(back.seed == conn.seed);
    CHECK(back.dims == conn.dims);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            CHECK(back.blocks[r][c].w == conn.blocks[r][c].w);
            CHECK(back.blocks[r][c].mask == conn.blocks[r][c].mask);
        }
        CHECK(back.biases[r].w == conn.biases[r].w);
    }
}
