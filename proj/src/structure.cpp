#include "huda/structure.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace huda {

namespace {
const char* kEqLabels[5] = {"s_a", "s_b", "c_a", "c_b", "c_z"};
const char* kVarLabels[5] = {"g_a", "g_b", "u_a", "u_b", "g_z"};
} // namespace

const char* eq_label(int eq) { return kEqLabels[eq]; }
const char* var_label(int var) { return kVarLabels[var]; }

int assigned_var(int eq) {
    switch (eq) {
    case kSa: return kGammaA;
    case kSb: return kGammaB;
    case kCa: return kUpsA;
    case kCb: return kUpsB;
    default: return kGammaZ;
    }
}

ConnIncidence binarize(const ConnectionSet& conn) {
    ConnIncidence inc;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 2; ++c) {
            const ConnBlock& blk = conn.blocks[r][c];
            BoolMat m(blk.rows, blk.cols);
            for (std::size_t i = 0; i < blk.rows; ++i)
                for (std::size_t j = 0; j < blk.cols; ++j) m.set(i, j, blk.at(i, j) != 0.0);
            inc.d[r][c] = std::move(m);
        }
    }
    return inc;
}

namespace {

BoolMat identity(std::size_t n) {
    BoolMat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, true);
    return m;
}

IncidenceMatrix assemble(const BoolMat& d_a, const BoolMat& d_b,
                         const std::array<std::array<BoolMat, 2>, 3>& conn_inc, const ConnDims& dims) {
    if (d_a.rows != dims.g_a || d_a.cols != dims.u_a)
        throw DimensionMismatch("D_a must relate gamma_a (rows) to upsilon_a (cols)");
    if (d_b.rows != dims.g_b || d_b.cols != dims.u_b)
        throw DimensionMismatch("D_b must relate gamma_b (rows) to upsilon_b (cols)");

    IncidenceMatrix inc;
    inc.eq_size = {dims.g_a, dims.g_b, dims.u_a, dims.u_b, dims.g_z};
    inc.var_size = {dims.g_a, dims.g_b, dims.u_a, dims.u_b, dims.g_z};
    for (int e = 0; e < 5; ++e)
        for (int v = 0; v < 5; ++v) inc.cell[e][v] = BoolMat(inc.eq_size[e], inc.var_size[v]);

    inc.cell[kSa][kGammaA] = identity(dims.g_a);
    inc.cell[kSa][kUpsA] = d_a;
    inc.cell[kSb][kGammaB] = identity(dims.g_b);
    inc.cell[kSb][kUpsB] = d_b;
    inc.cell[kCa][kGammaA] = conn_inc[0][0];
    inc.cell[kCa][kGammaB] = conn_inc[0][1];
    inc.cell[kCa][kUpsA] = identity(dims.u_a);
    inc.cell[kCb][kGammaA] = conn_inc[1][0];
    inc.cell[kCb][kGammaB] = conn_inc[1][1];
    inc.cell[kCb][kUpsB] = identity(dims.u_b);
    inc.cell[kCz][kGammaA] = conn_inc[2][0];
    inc.cell[kCz][kGammaB] = conn_inc[2][1];
    inc.cell[kCz][kGammaZ] = identity(dims.g_z);
    return inc;
}

} // namespace

IncidenceMatrix assemble_incidence(const BoolMat& d_a, const BoolMat& d_b, const ConnectionSet& conn) {
    return assemble(d_a, d_b, binarize(conn).d, conn.dims);
}

IncidenceMatrix assemble_incidence(const BoolMat& d_a, const BoolMat& d_b, const Occupancy& occ,
                                   const ConnDims& dims) {
    std::array<std::array<BoolMat, 2>, 3> conn_inc;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c)
            conn_inc[r][c] = BoolMat(dims.rows(static_cast<ConnRow>(r)), dims.cols(static_cast<ConnCol>(c)),
                                     occ.on[r][c]);
    return assemble(d_a, d_b, conn_inc, dims);
}

namespace {

/// Block-level dependency digraph. Node = equation block (identified with its
/// assigned unknown). Edge u -> e when equation e depends on the unknown
/// assigned to u. Self edges are kept so loops via W_aa-style entries are
/// honest.
struct BlockGraph {
    std::array<std::vector<int>, 5> out;  // out[u]: equations depending on u
    std::array<std::vector<int>, 5> deps; // deps[e]: producer nodes e waits on
    std::array<bool, 5> self{};
};

BlockGraph build_graph(const IncidenceMatrix& inc) {
    BlockGraph g;
    std::array<int, 5> producer{};
    for (int e = 0; e < 5; ++e) producer[assigned_var(e)] = e;
    for (int e = 0; e < 5; ++e) {
        for (int v = 0; v < 5; ++v) {
            if (v == assigned_var(e)) continue;
            if (!inc.block_nonzero(e, v)) continue;
            const int u = producer[v];
            if (u == e) {
                g.self[e] = true;
                continue;
            }
            g.out[u].push_back(e);
            g.deps[e].push_back(u);
        }
    }
    return g;
}

void check_balanced(const IncidenceMatrix& inc) {
    std::size_t eq_total = 0, var_total = 0;
    for (int i = 0; i < 5; ++i) {
        eq_total += inc.eq_size[i];
        var_total += inc.var_size[i];
        if (inc.eq_size[i] != inc.var_size[assigned_var(i)])
            throw UnbalancedSystem(std::string("equation block ") + kEqLabels[i] +
                                   " does not match its assigned unknown block size");
    }
    if (eq_total != var_total) throw UnbalancedSystem("equation/unknown totals differ");
}

} // namespace

std::vector<std::vector<int>> tarjan_scc(const IncidenceMatrix& inc) {
    check_balanced(inc);
    const BlockGraph g = build_graph(inc);

    std::array<int, 5> index{}, low{};
    std::array<bool, 5> on_stack{};
    index.fill(-1);
    std::vector<int> stack;
    std::vector<std::vector<int>> components;
    int counter = 0;

    std::function<void(int)> strongconnect = [&](int v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        for (int w : g.out[v]) {
            if (index[w] < 0) {
                strongconnect(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            std::vector<int> comp;
            int w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                comp.push_back(w);
            } while (w != v);
            std::sort(comp.begin(), comp.end());
            components.push_back(std::move(comp));
        }
    };
    for (int v = 0; v < 5; ++v)
        if (index[v] < 0) strongconnect(v);
    return components;
}

std::string LoopReport::describe() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < loops.size(); ++i) {
        os << (i ? "; " : "") << "{";
        for (std::size_t k = 0; k < loops[i].size(); ++k) os << (k ? ", " : "") << kEqLabels[loops[i][k]];
        os << "}";
    }
    return os.str();
}

BltResult blt_sort(const IncidenceMatrix& inc) {
    BltResult result;
    const auto components = tarjan_scc(inc);
    const BlockGraph g = build_graph(inc);

    for (const auto& comp : components)
        if (comp.size() > 1 || g.self[comp.front()]) result.loops.loops.push_back(comp);
    if (!result.loops.loops.empty()) return result;

    // Kahn's algorithm; schedulable ties broken in fixed label order for
    // deterministic golden orders.
    static constexpr int kPriority[5] = {kCa, kSa, kCb, kSb, kCz};
    std::array<int, 5> remaining{};
    for (int e = 0; e < 5; ++e) remaining[e] = static_cast<int>(g.deps[e].size());
    std::array<bool, 5> done{};
    BltOrder order;
    for (int step = 0; step < 5; ++step) {
        int pick = -1;
        for (int cand : kPriority) {
            if (!done[cand] && remaining[cand] == 0) {
                pick = cand;
                break;
            }
        }
        if (pick < 0) {
            result.loops.loops.push_back({});
            return result; // unreachable once SCC check passed
        }
        done[pick] = true;
        order.steps.emplace_back(pick, assigned_var(pick));
        for (int e : g.out[pick])
            if (!done[e]) --remaining[e];
    }
    result.order = std::move(order);
    return result;
}

bool loop_free(const Occupancy& occ) {
    if (occ(ConnRow::a, ConnCol::a) || occ(ConnRow::b, ConnCol::b)) return false;
    return !(occ(ConnRow::a, ConnCol::b) && occ(ConnRow::b, ConnCol::a));
}

bool loop_free(const TopologyTag& tag) { return loop_free(mask_for_topology(tag)); }

std::string render_ascii(const IncidenceMatrix& inc) {
    std::ostringstream os;
    // column header
    os << "      ";
    for (int v = 0; v < 5; ++v) {
        os << "| " << kVarLabels[v];
        for (std::size_t k = 3; k < inc.var_size[v]; ++k) os << ' ';
        os << ' ';
    }
    os << "|\n";
    for (int e = 0; e < 5; ++e) {
        for (std::size_t r = 0; r < inc.eq_size[e]; ++r) {
            if (r == 0)
                os << ' ' << kEqLabels[e] << "  ";
            else
                os << "      ";
            for (int v = 0; v < 5; ++v) {
                os << "| ";
                for (std::size_t c = 0; c < inc.var_size[v]; ++c)
                    os << (inc.cell[e][v].at(r, c) ? 'X' : '.');
                for (std::size_t k = inc.var_size[v]; k < 3; ++k) os << ' ';
                os << ' ';
            }
            os << "|\n";
        }
    }
    return os.str();
}

void incidence_bitmap(const IncidenceMatrix& inc, std::size_t& rows, std::size_t& cols,
                      std::vector<std::uint8_t>& pixels) {
    rows = 0;
    cols = 0;
    for (int i = 0; i < 5; ++i) {
        rows += inc.eq_size[i];
        cols += inc.var_size[i];
    }
    pixels.assign(rows * cols, 0);
    std::size_t r0 = 0;
    for (int e = 0; e < 5; ++e) {
        std::size_t c0 = 0;
        for (int v = 0; v < 5; ++v) {
            for (std::size_t r = 0; r < inc.eq_size[e]; ++r)
                for (std::size_t c = 0; c < inc.var_size[v]; ++c)
                    if (inc.cell[e][v].at(r, c)) pixels[(r0 + r) * cols + (c0 + c)] = 255;
            c0 += inc.var_size[v];
        }
        r0 += inc.eq_size[e];
    }
}

} // namespace huda
