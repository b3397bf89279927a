#include "huda/connect.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "huda/rng.hpp"

namespace huda {

namespace {

const char* kBlockNames[3][3] = {{"W_aa", "W_ab", "W_az"}, {"W_ba", "W_bb", "W_bz"}, {"W_za", "W_zb", "W_zz"}};
const char* kBiasNames[3] = {"b_a", "b_b", "b_z"};

ConnBlock make_block(std::size_t rows, std::size_t cols, BlockMask mask) {
    ConnBlock b;
    b.rows = rows;
    b.cols = cols;
    b.mask = mask;
    b.w.assign(rows * cols, 0.0);
    return b;
}

void fill_identity(ConnBlock& b) {
    for (std::size_t i = 0; i < std::min(b.rows, b.cols); ++i) b.at(i, i) = 1.0;
}

void add_noise(ConnBlock& b, double scale, Rng& rng) {
    for (auto& w : b.w) w += rng.uniform_sym(scale);
}

} // namespace

const char* block_name(ConnRow r, ConnCol c) { return kBlockNames[static_cast<int>(r)][static_cast<int>(c)]; }
const char* bias_name(ConnRow r) { return kBiasNames[static_cast<int>(r)]; }

TopologyTag parse_topology(const std::string& s) {
    TopologyTag tag;
    std::size_t i = 0;
    if (i < s.size() && s[i] == 'P') {
        tag.parallel = true;
        ++i;
    }
    if (i < s.size() && s[i] == 'S') {
        tag.sequential = true;
        ++i;
    }
    if (i < s.size() && s[i] == 'D') {
        tag.dft = true;
        ++i;
    }
    if (i < s.size() && (s[i] == 'a' || s[i] == 'b')) {
        if (!tag.sequential)
            throw HudaError("case suffix '" + std::string(1, s[i]) + "' requires the sequential pattern");
        tag.seq_case = s[i];
        ++i;
    }
    if (i != s.size() || s.empty())
        throw HudaError("invalid topology string '" + s + "' (expected subset of P,S,D in that order, optional case a/b)");
    return tag;
}

std::string topology_name(const TopologyTag& tag) {
    std::string s;
    if (tag.parallel) s += 'P';
    if (tag.sequential) s += 'S';
    if (tag.dft) s += 'D';
    if (tag.sequential) s += tag.seq_case;
    return s.empty() ? "(none)" : s;
}

Occupancy mask_for_topology(const TopologyTag& tag) {
    Occupancy occ;
    const bool p = tag.parallel, s = tag.sequential, d = tag.dft;
    // Serial link: s_a -> s_b for case a, s_b -> s_a for case b.
    const ConnRow serial_row = tag.seq_case == 'b' ? ConnRow::a : ConnRow::b;
    const ConnCol serial_col = tag.seq_case == 'b' ? ConnCol::b : ConnCol::a;
    const ConnRow first_row = tag.seq_case == 'b' ? ConnRow::b : ConnRow::a;
    const ConnRow second_row = serial_row;
    const ConnCol first_col = tag.seq_case == 'b' ? ConnCol::b : ConnCol::a;
    const ConnCol second_col = tag.seq_case == 'b' ? ConnCol::a : ConnCol::b;

    if (p || s) occ.set(first_row, ConnCol::z, true); // input feeds the first submodel
    if (s) occ.set(serial_row, serial_col, true);
    if (p) {
        occ.set(second_row, ConnCol::z, true);
        occ.set(ConnRow::z, first_col, true);
    }
    if (p || s) occ.set(ConnRow::z, second_col, true); // second submodel always reaches the output
    if (d) occ.set(ConnRow::z, ConnCol::z, true);
    return occ;
}

Occupancy generic_occupancy() {
    Occupancy occ;
    for (auto& row : occ.on) row.fill(true);
    return occ;
}

Occupancy ConnectionSet::occupancy() const {
    Occupancy occ;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) occ.on[r][c] = blocks[r][c].mask != BlockMask::Zero;
    return occ;
}

ConnectionSet zero_connections(const TopologyTag& tag, const ConnDims& dims) {
    ConnectionSet conn;
    conn.dims = dims;
    conn.topology = tag;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c)
            conn.blocks[r][c] =
                make_block(dims.rows(static_cast<ConnRow>(r)), dims.cols(static_cast<ConnCol>(c)), BlockMask::Zero);
        conn.biases[r] = make_block(dims.rows(static_cast<ConnRow>(r)), 1, BlockMask::Zero);
    }
    return conn;
}

ConnectionSet init_connections(const TopologyTag& tag, const ConnDims& dims, double noise_scale,
                               std::uint64_t seed) {
    if (noise_scale < 0.0) throw DimensionMismatch("noise_scale must be >= 0");
    ConnectionSet conn = zero_connections(tag, dims);
    conn.seed = seed;
    const Occupancy occ = mask_for_topology(tag);
    Rng root(seed);

    // Identity-initialized blocks: the input feed of the first submodel, the
    // serial link, and the output path (W_z,first under P, W_z,second for
    // pure-serial topologies). Everything else occupied starts at noisy zero.
    const bool case_b = tag.sequential && tag.seq_case == 'b';
    const ConnRow first_row = case_b ? ConnRow::b : ConnRow::a;
    const ConnCol first_col = case_b ? ConnCol::b : ConnCol::a;
    const ConnCol second_col = case_b ? ConnCol::a : ConnCol::b;

    for (int ri = 0; ri < 3; ++ri) {
        for (int ci = 0; ci < 3; ++ci) {
            const auto r = static_cast<ConnRow>(ri);
            const auto c = static_cast<ConnCol>(ci);
            if (!occ(r, c)) continue;
            ConnBlock& blk = conn.block(r, c);
            blk.mask = BlockMask::Trainable;
            bool identity = false;
            if (c == ConnCol::z && r == first_row) identity = true;                       // input -> first submodel
            if (c != ConnCol::z && (r == ConnRow::a || r == ConnRow::b)) identity = true; // serial link
            if (r == ConnRow::z && c == first_col && tag.parallel) identity = true;       // first -> output
            if (r == ConnRow::z && c == second_col && !tag.parallel) identity = true;     // pure-serial output
            if (identity) fill_identity(blk);
            Rng blockRng = root.fork(static_cast<std::uint64_t>(ri * 3 + ci + 1));
            add_noise(blk, noise_scale, blockRng);
        }
    }
    return conn;
}

ConnectionSet concat_wiring(std::size_t g_a, std::size_t g_b) {
    ConnDims dims;
    dims.g_a = g_a;
    dims.g_b = g_b;
    dims.g_z = g_a + g_b;
    ConnectionSet conn = zero_connections(TopologyTag{true, false, false, 'a'}, dims);
    ConnBlock& za = conn.block(ConnRow::z, ConnCol::a);
    ConnBlock& zb = conn.block(ConnRow::z, ConnCol::b);
    za.mask = BlockMask::Frozen;
    zb.mask = BlockMask::Frozen;
    for (std::size_t i = 0; i < g_a; ++i) za.at(i, i) = 1.0;
    for (std::size_t i = 0; i < g_b; ++i) zb.at(g_a + i, i) = 1.0;
    return conn;
}

template <class T>
T block_entry(const ConnectionSet& conn, ConnRow r, ConnCol c, std::size_t i, std::size_t j,
              const ParamLayout* layout, std::span<const T> params) {
    const ConnBlock& blk = conn.block(r, c);
    if (blk.mask == BlockMask::Trainable && layout && !params.empty()) {
        for (const auto& s : layout->conn_slices) {
            if (s.row == static_cast<int>(r) && s.col == static_cast<int>(c))
                return params[s.offset + i * blk.cols + j];
        }
    }
    return T(blk.at(i, j));
}

template double block_entry<double>(const ConnectionSet&, ConnRow, ConnCol, std::size_t, std::size_t,
                                    const ParamLayout*, std::span<const double>);
template Dual block_entry<Dual>(const ConnectionSet&, ConnRow, ConnCol, std::size_t, std::size_t,
                                const ParamLayout*, std::span<const Dual>);

template <class T>
T bias_entry(const ConnectionSet& conn, ConnRow r, std::size_t i, const ParamLayout* layout,
             std::span<const T> params) {
    const ConnBlock& blk = conn.bias(r);
    if (blk.mask == BlockMask::Trainable && layout && !params.empty()) {
        for (const auto& s : layout->conn_slices)
            if (s.row == static_cast<int>(r) && s.col == -1) return params[s.offset + i];
    }
    return T(blk.w[i]);
}

template double bias_entry<double>(const ConnectionSet&, ConnRow, std::size_t, const ParamLayout*,
                                   std::span<const double>);
template Dual bias_entry<Dual>(const ConnectionSet&, ConnRow, std::size_t, const ParamLayout*,
                               std::span<const Dual>);

namespace {

template <class T>
void accumulate_block(const ConnBlock& blk, const ParamLayout::BlockSlice* slice, std::span<const T> params,
                      std::span<const T> x, std::span<T> out) {
    if (blk.mask == BlockMask::Zero) return;
    if (x.size() != blk.cols || out.size() != blk.rows)
        throw DimensionMismatch("connection block operand size mismatch");
    if (blk.mask == BlockMask::Trainable && slice && !params.empty()) {
        std::span<const T> w = params.subspan(slice->offset, slice->count);
        for (std::size_t i = 0; i < blk.rows; ++i)
            for (std::size_t j = 0; j < blk.cols; ++j) out[i] += w[i * blk.cols + j] * x[j];
    } else {
        for (std::size_t i = 0; i < blk.rows; ++i)
            for (std::size_t j = 0; j < blk.cols; ++j) out[i] += T(blk.at(i, j)) * x[j];
    }
}

const ParamLayout::BlockSlice* find_slice(const ParamLayout* layout, int row, int col) {
    if (!layout) return nullptr;
    for (const auto& s : layout->conn_slices)
        if (s.row == row && s.col == col) return &s;
    return nullptr;
}

} // namespace

template <class T>
void apply_connection_row(const ConnectionSet& conn, ConnRow r, std::span<const T> g_a,
                          std::span<const T> g_b, std::span<const T> u_z, const ParamLayout* layout,
                          std::span<const T> params, std::span<T> out) {
    const int ri = static_cast<int>(r);
    if (out.size() != conn.dims.rows(r)) throw DimensionMismatch("connection row output size mismatch");
    const ConnBlock& bias = conn.bias(r);
    const ParamLayout::BlockSlice* bslice = find_slice(layout, ri, -1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (bias.mask == BlockMask::Trainable && bslice && !params.empty())
            out[i] = params[bslice->offset + i];
        else
            out[i] = T(bias.w[i]);
    }
    const std::span<const T> cols[3] = {g_a, g_b, u_z};
    for (int ci = 0; ci < 3; ++ci) {
        const ConnBlock& blk = conn.blocks[ri][ci];
        if (blk.mask == BlockMask::Zero) continue;
        accumulate_block(blk, find_slice(layout, ri, ci), params, cols[ci], out);
    }
}

template void apply_connection_row<double>(const ConnectionSet&, ConnRow, std::span<const double>,
                                           std::span<const double>, std::span<const double>, const ParamLayout*,
                                           std::span<const double>, std::span<double>);
template void apply_connection_row<Dual>(const ConnectionSet&, ConnRow, std::span<const Dual>,
                                         std::span<const Dual>, std::span<const Dual>, const ParamLayout*,
                                         std::span<const Dual>, std::span<Dual>);

namespace {

std::vector<double> apply_row_checked(const ConnectionSet& conn, ConnRow r, std::span<const double> g_a,
                                      std::span<const double> g_b, std::span<const double> u_z) {
    auto need = [&](ConnCol c, std::size_t got) {
        const bool used = conn.block(r, c).mask != BlockMask::Zero;
        if (used && got != conn.dims.cols(c))
            throw DimensionMismatch(std::string("connection input ") + (c == ConnCol::a ? "gamma_a" : c == ConnCol::b ? "gamma_b" : "upsilon_z") +
                                    " has wrong length");
    };
    need(ConnCol::a, g_a.size());
    need(ConnCol::b, g_b.size());
    need(ConnCol::z, u_z.size());
    std::vector<double> out(conn.dims.rows(r), 0.0);
    apply_connection_row<double>(conn, r, g_a, g_b, u_z, nullptr, {}, out);
    return out;
}

} // namespace

std::vector<double> apply_ca(const ConnectionSet& conn, std::span<const double> g_a,
                             std::span<const double> g_b, std::span<const double> u_z) {
    return apply_row_checked(conn, ConnRow::a, g_a, g_b, u_z);
}
std::vector<double> apply_cb(const ConnectionSet& conn, std::span<const double> g_a,
                             std::span<const double> g_b, std::span<const double> u_z) {
    return apply_row_checked(conn, ConnRow::b, g_a, g_b, u_z);
}
std::vector<double> apply_cz(const ConnectionSet& conn, std::span<const double> g_a,
                             std::span<const double> g_b, std::span<const double> u_z) {
    return apply_row_checked(conn, ConnRow::z, g_a, g_b, u_z);
}

std::pair<std::vector<double>, ParamLayout> flatten_params(const ConnectionSet& conn,
                                                           std::span<const double> p_a,
                                                           std::span<const double> p_b) {
    std::vector<double> flat;
    ParamLayout layout;
    auto push_block = [&](const ConnBlock& blk, int row, int col) {
        if (blk.mask != BlockMask::Trainable) return;
        ParamLayout::BlockSlice s;
        s.row = row;
        s.col = col;
        s.offset = flat.size();
        s.count = blk.w.size();
        layout.conn_slices.push_back(s);
        flat.insert(flat.end(), blk.w.begin(), blk.w.end());
    };
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) push_block(conn.blocks[r][c], r, c);
    for (int r = 0; r < 3; ++r) push_block(conn.biases[r], r, -1);
    layout.n_conn = flat.size();
    layout.offset_a = flat.size();
    layout.n_a = p_a.size();
    flat.insert(flat.end(), p_a.begin(), p_a.end());
    layout.offset_b = flat.size();
    layout.n_b = p_b.size();
    flat.insert(flat.end(), p_b.begin(), p_b.end());
    layout.total = flat.size();
    return {std::move(flat), std::move(layout)};
}

ConnectionSet unflatten_connection(const ConnectionSet& base, const ParamLayout& layout,
                                   std::span<const double> flat) {
    if (flat.size() != layout.total) throw DimensionMismatch("flat vector does not match layout");
    ConnectionSet conn = base;
    for (const auto& s : layout.conn_slices) {
        ConnBlock& blk = s.col < 0 ? conn.biases[s.row] : conn.blocks[s.row][s.col];
        if (blk.w.size() != s.count) throw DimensionMismatch("layout block size mismatch");
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(s.offset), s.count, blk.w.begin());
    }
    return conn;
}

namespace {

nlohmann::json block_to_json(const ConnBlock& b) {
    nlohmann::json j;
    j["rows"] = b.rows;
    j["cols"] = b.cols;
    j["mask"] = b.mask == BlockMask::Zero ? "zero" : (b.mask == BlockMask::Frozen ? "frozen" : "trainable");
    j["data"] = b.w;
    return j;
}

ConnBlock block_from_json(const nlohmann::json& j) {
    ConnBlock b;
    b.rows = j.at("rows").get<std::size_t>();
    b.cols = j.at("cols").get<std::size_t>();
    const std::string m = j.at("mask").get<std::string>();
    b.mask = m == "zero" ? BlockMask::Zero : (m == "frozen" ? BlockMask::Frozen : BlockMask::Trainable);
    b.w = j.at("data").get<std::vector<double>>();
    if (b.w.size() != b.rows * b.cols) throw IoError("connection block data length mismatch");
    return b;
}

} // namespace

std::string connection_to_json(const ConnectionSet& conn) {
    nlohmann::json j;
    j["topology"] = topology_name(conn.topology);
    j["seed"] = conn.seed;
    j["dims"] = {{"u_a", conn.dims.u_a}, {"u_b", conn.dims.u_b}, {"g_z", conn.dims.g_z},
                 {"g_a", conn.dims.g_a}, {"g_b", conn.dims.g_b}, {"u_z", conn.dims.u_z}};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c)
            j["blocks"][kBlockNames[r][c]] = block_to_json(conn.blocks[r][c]);
        j["blocks"][kBiasNames[r]] = block_to_json(conn.biases[r]);
    }
    return j.dump(2);
}

ConnectionSet connection_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ConnectionSet conn;
    const std::string topo = j.at("topology").get<std::string>();
    conn.topology = topo == "(none)" ? TopologyTag{} : parse_topology(topo);
    conn.seed = j.at("seed").get<std::uint64_t>();
    const auto& d = j.at("dims");
    conn.dims = ConnDims{d.at("u_a").get<std::size_t>(), d.at("u_b").get<std::size_t>(),
                         d.at("g_z").get<std::size_t>(), d.at("g_a").get<std::size_t>(),
                         d.at("g_b").get<std::size_t>(), d.at("u_z").get<std::size_t>()};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c)
            conn.blocks[r][c] = block_from_json(j.at("blocks").at(kBlockNames[r][c]));
        conn.biases[r] = block_from_json(j.at("blocks").at(kBiasNames[r]));
    }
    return conn;
}

void save_connection_json(const ConnectionSet& conn, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << connection_to_json(conn) << "\n";
}

ConnectionSet load_connection_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    return connection_from_json(ss.str());
}

} // namespace huda
