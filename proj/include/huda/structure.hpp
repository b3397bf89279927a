#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "huda/connect.hpp"

namespace huda {

/// Dense boolean matrix.
struct BoolMat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> v;

    BoolMat() = default;
    BoolMat(std::size_t r, std::size_t c, bool fill = false) : rows(r), cols(c), v(r * c, fill ? 1 : 0) {}

    bool at(std::size_t r, std::size_t c) const { return v[r * cols + c] != 0; }
    void set(std::size_t r, std::size_t c, bool x) { v[r * cols + c] = x ? 1 : 0; }
    bool any() const {
        for (auto e : v)
            if (e) return true;
        return false;
    }
};

/// Incidence blocks of a connection matrix: D_ij = (W_ij != 0) for the two
/// unknown columns gamma_a, gamma_b (the upsilon_z column holds a known and
/// is dropped).
struct ConnIncidence {
    std::array<std::array<BoolMat, 2>, 3> d; // [row a,b,z][col a,b]

    const BoolMat& at(ConnRow r, ConnCol c) const { return d[static_cast<int>(r)][static_cast<int>(c)]; }
    BoolMat& at(ConnRow r, ConnCol c) { return d[static_cast<int>(r)][static_cast<int>(c)]; }
};

ConnIncidence binarize(const ConnectionSet& conn);

/// Labels of the five equation blocks and five unknown blocks, in storage
/// order.
enum EqBlock : int { kSa = 0, kSb = 1, kCa = 2, kCb = 3, kCz = 4 };
enum VarBlock : int { kGammaA = 0, kGammaB = 1, kUpsA = 2, kUpsB = 3, kGammaZ = 4 };

const char* eq_label(int eq);
const char* var_label(int var);

/// Which unknown block each equation block is solved for (the marked
/// diagonal): s_a -> gamma_a, s_b -> gamma_b, c_a -> upsilon_a,
/// c_b -> upsilon_b, c_z -> gamma_z.
int assigned_var(int eq);

/// Labeled 5x5 block grid of boolean dependencies between equation blocks
/// (rows) and unknown blocks (columns), including the identity diagonals.
struct IncidenceMatrix {
    std::array<std::size_t, 5> eq_size{};
    std::array<std::size_t, 5> var_size{};
    std::array<std::array<BoolMat, 5>, 5> cell;

    bool block_nonzero(int eq, int var) const { return cell[eq][var].any(); }
};

/// Assembles the combined system incidence from the submodel incidences
/// D_a (gamma_a vs upsilon_a), D_b and the connection blocks.
IncidenceMatrix assemble_incidence(const BoolMat& d_a, const BoolMat& d_b, const ConnectionSet& conn);

/// As above but from an occupancy pattern (full blocks where occupied),
/// with explicit interface sizes.
IncidenceMatrix assemble_incidence(const BoolMat& d_a, const BoolMat& d_b, const Occupancy& occ,
                                   const ConnDims& dims);

/// Strongly connected components of the block dependency digraph in reverse
/// topological order (dependent components first). A component with more
/// than one equation block, or with a self dependency, is an algebraic loop.
std::vector<std::vector<int>> tarjan_scc(const IncidenceMatrix& inc);

struct BltOrder {
    std::vector<std::pair<int, int>> steps; // (equation block, unknown block)
    std::vector<int> eq_sequence() const {
        std::vector<int> s;
        for (auto& p : steps) s.push_back(p.first);
        return s;
    }
};

struct LoopReport {
    std::vector<std::vector<int>> loops; // components that form algebraic loops
    std::string describe() const;
};

/// Either a causal ordering or the loops that prevent one.
struct BltResult {
    std::optional<BltOrder> order;
    LoopReport loops;

    bool ok() const { return order.has_value(); }
};

BltResult blt_sort(const IncidenceMatrix& inc);

/// True iff the occupancy guarantees loop freedom for every pair of
/// submodel incidences: W_aa = W_bb = 0 and at most one of W_ab / W_ba.
bool loop_free(const Occupancy& occ);
bool loop_free(const TopologyTag& tag);

/// Aligned ASCII rendering with row/column labels.
std::string render_ascii(const IncidenceMatrix& inc);

/// Scalar-level bitmap (true = white) for PGM export.
void incidence_bitmap(const IncidenceMatrix& inc, std::size_t& rows, std::size_t& cols,
                      std::vector<std::uint8_t>& pixels);

} // namespace huda
