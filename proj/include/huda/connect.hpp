#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "huda/dual.hpp"
#include "huda/errors.hpp"

namespace huda {

/// Row/column identifiers of the connection block matrix. Rows are the
/// targets (upsilon_a, upsilon_b, gamma_z), columns the sources
/// (gamma_a, gamma_b, upsilon_z).
enum class ConnRow : int { a = 0, b = 1, z = 2 };
enum class ConnCol : int { a = 0, b = 1, z = 2 };

struct BlockId {
    ConnRow row;
    ConnCol col;
};

enum class BlockMask : std::uint8_t { Zero, Frozen, Trainable };

/// Which of the {P, S, D} patterns a topology carries; `seq_case` selects
/// which submodel evaluates first when the sequential pattern is present
/// (meaningless otherwise and canonicalized to 'a').
struct TopologyTag {
    bool parallel = false;
    bool sequential = false;
    bool dft = false;
    char seq_case = 'a';

    bool operator==(const TopologyTag&) const = default;
};

/// Parses e.g. "PSD", "PSDb", "P", "SDa", "S". Throws HudaError on bad input.
TopologyTag parse_topology(const std::string& s);
std::string topology_name(const TopologyTag& tag);

/// Sizes of the connection interface vectors.
struct ConnDims {
    std::size_t u_a = 0; ///< |upsilon_a|
    std::size_t u_b = 0; ///< |upsilon_b|
    std::size_t g_z = 0; ///< |gamma_z|
    std::size_t g_a = 0; ///< |gamma_a|
    std::size_t g_b = 0; ///< |gamma_b|
    std::size_t u_z = 0; ///< |upsilon_z|

    std::size_t rows(ConnRow r) const {
        switch (r) {
        case ConnRow::a: return u_a;
        case ConnRow::b: return u_b;
        default: return g_z;
        }
    }
    std::size_t cols(ConnCol c) const {
        switch (c) {
        case ConnCol::a: return g_a;
        case ConnCol::b: return g_b;
        default: return u_z;
        }
    }
    bool operator==(const ConnDims&) const = default;
};

/// Per-block occupancy: which of the nine W blocks may be nonzero.
struct Occupancy {
    std::array<std::array<bool, 3>, 3> on{}; // [row][col]

    bool operator()(ConnRow r, ConnCol c) const { return on[static_cast<int>(r)][static_cast<int>(c)]; }
    void set(ConnRow r, ConnCol c, bool v) { on[static_cast<int>(r)][static_cast<int>(c)] = v; }
};

/// Occupancy of the given topology (W_aa and W_bb always zero; for case b
/// the roles of W_ba and W_ab swap).
Occupancy mask_for_topology(const TopologyTag& tag);

/// All nine blocks occupied (the generic wiring, which has algebraic loops).
Occupancy generic_occupancy();

/// One connection block: dense row-major matrix plus its mask.
struct ConnBlock {
    std::size_t rows = 0;
    std::size_t cols = 0;
    BlockMask mask = BlockMask::Zero;
    std::vector<double> w; // row-major, rows*cols entries

    double at(std::size_t r, std::size_t c) const { return w[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return w[r * cols + c]; }
};

/// The three affine connection equations
///   upsilon_a = W_aa g_a + W_ab g_b + W_az u_z + b_a
///   upsilon_b = W_ba g_a + W_bb g_b + W_bz u_z + b_b
///   gamma_z   = W_za g_a + W_zb g_b + W_zz u_z + b_z
/// stored as nine W blocks and three bias blocks with per-block masks.
struct ConnectionSet {
    ConnDims dims;
    TopologyTag topology;
    std::uint64_t seed = 0;
    std::array<std::array<ConnBlock, 3>, 3> blocks; // [row][col]
    std::array<ConnBlock, 3> biases;                // [row], cols == 1

    ConnBlock& block(ConnRow r, ConnCol c) { return blocks[static_cast<int>(r)][static_cast<int>(c)]; }
    const ConnBlock& block(ConnRow r, ConnCol c) const {
        return blocks[static_cast<int>(r)][static_cast<int>(c)];
    }
    ConnBlock& bias(ConnRow r) { return biases[static_cast<int>(r)]; }
    const ConnBlock& bias(ConnRow r) const { return biases[static_cast<int>(r)]; }

    /// Occupancy implied by the masks (mask != Zero).
    Occupancy occupancy() const;
};

/// Builds a ConnectionSet for the topology. Blocks follow the experiment
/// initialization table: identity-role blocks start at rectangular identity
/// plus uniform noise in [-noise_scale, noise_scale], the remaining occupied
/// blocks at pure noise; all are trainable. Unoccupied blocks and all biases
/// are exact static zeros. Deterministic per seed.
ConnectionSet init_connections(const TopologyTag& tag, const ConnDims& dims, double noise_scale,
                               std::uint64_t seed);

/// An all-zero ConnectionSet (every block masked Zero), to be customized.
ConnectionSet zero_connections(const TopologyTag& tag, const ConnDims& dims);

/// Wiring fragment expressing concatenation: W_za = [I; 0], W_zb = [0; I]
/// (frozen), so gamma_z = gamma_a ++ gamma_b. Requires g_z == g_a + g_b.
ConnectionSet concat_wiring(std::size_t g_a, std::size_t g_b);

/// Evaluates one connection row from stored block values.
std::vector<double> apply_ca(const ConnectionSet& conn, std::span<const double> g_a,
                             std::span<const double> g_b, std::span<const double> u_z);
std::vector<double> apply_cb(const ConnectionSet& conn, std::span<const double> g_a,
                             std::span<const double> g_b, std::span<const double> u_z);
std::vector<double> apply_cz(const ConnectionSet& conn, std::span<const double> g_a,
                             std::span<const double> g_b, std::span<const double> u_z);

/// Flat parameter layout of a combined model: trainable connection entries
/// first (canonical block order, row-major), then the submodel parameter
/// vectors.
struct ParamLayout {
    struct BlockSlice {
        int row = 0;
        int col = 0;  // -1 for a bias block
        std::size_t offset = 0;
        std::size_t count = 0;
    };
    std::vector<BlockSlice> conn_slices;
    std::size_t n_conn = 0;
    std::size_t offset_a = 0, n_a = 0;
    std::size_t offset_b = 0, n_b = 0;
    std::size_t total = 0;
};

/// Concatenates trainable connection entries and submodel parameters.
std::pair<std::vector<double>, ParamLayout>
flatten_params(const ConnectionSet& conn, std::span<const double> p_a, std::span<const double> p_b);

/// Inverse of flatten_params for the connection part: returns a copy of
/// `base` with trainable entries replaced from the flat vector.
ConnectionSet unflatten_connection(const ConnectionSet& base, const ParamLayout& layout,
                                   std::span<const double> flat);

/// Evaluates connection row `r` with trainable entries read from `params`
/// (a full flat vector per `layout`); pass an empty span to use stored
/// values. Identical code for plain and dual scalars.
template <class T>
void apply_connection_row(const ConnectionSet& conn, ConnRow r, std::span<const T> g_a,
                          std::span<const T> g_b, std::span<const T> u_z, const ParamLayout* layout,
                          std::span<const T> params, std::span<T> out);

extern template void apply_connection_row<double>(const ConnectionSet&, ConnRow, std::span<const double>,
                                                  std::span<const double>, std::span<const double>,
                                                  const ParamLayout*, std::span<const double>,
                                                  std::span<double>);
extern template void apply_connection_row<Dual>(const ConnectionSet&, ConnRow, std::span<const Dual>,
                                                std::span<const Dual>, std::span<const Dual>,
                                                const ParamLayout*, std::span<const Dual>, std::span<Dual>);

/// Effective entry of a block under a parameter override.
template <class T>
T block_entry(const ConnectionSet& conn, ConnRow r, ConnCol c, std::size_t i, std::size_t j,
              const ParamLayout* layout, std::span<const T> params);

/// Effective bias entry under a parameter override.
template <class T>
T bias_entry(const ConnectionSet& conn, ConnRow r, std::size_t i, const ParamLayout* layout,
             std::span<const T> params);

/// JSON (de)serialization with exact round trip.
std::string connection_to_json(const ConnectionSet& conn);
ConnectionSet connection_from_json(const std::string& text);
void save_connection_json(const ConnectionSet& conn, const std::string& path);
ConnectionSet load_connection_json(const std::string& path);

const char* block_name(ConnRow r, ConnCol c);
const char* bias_name(ConnRow r);

} // namespace huda
