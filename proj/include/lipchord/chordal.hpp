/*
 * Copyright 2026 The lipchord Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LIPCHORD_CHORDAL_HPP
#define LIPCHORD_CHORDAL_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "lipchord/error.hpp"
#include "lipchord/sdp_build.hpp"

namespace lipchord {

/// Symmetric sparsity pattern on vertices 1..n.
///
/// Only off-diagonal edges are stored, as sorted pairs (i, j) with i < j.
/// Every diagonal entry is implicitly part of the pattern.
class EdgeSet {
public:
    EdgeSet() = default;
    explicit EdgeSet(int n) : n_(n), adj_(static_cast<std::size_t>(n) * n, 0) {}

    int n() const { return n_; }

    void add(int i, int j) {
        check(i);
        check(j);
        if (i == j) return;
        adj_[idx(i, j)] = 1;
        adj_[idx(j, i)] = 1;
    }

    /// Adds the full square block on [lo, hi].
    void add_block(int lo, int hi) {
        for (int j = lo; j <= hi; ++j) {
            for (int i = lo; i < j; ++i) add(i, j);
        }
    }

    bool contains(int i, int j) const {
        if (i < 1 || j < 1 || i > n_ || j > n_) return false;
        return i == j || adj_[idx(i, j)] != 0;
    }

    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (int i = 1; i <= n_; ++i) {
            for (int j = i + 1; j <= n_; ++j) {
                if (adj_[idx(i, j)]) out.emplace_back(i, j);
            }
        }
        return out;
    }

    std::size_t num_edges() const {
        return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), 1)) / 2;
    }

    /// True when every edge of *this is also an edge of `other`.
    bool subset_of(const EdgeSet& other) const {
        if (n_ != other.n_) return false;
        for (std::size_t t = 0; t < adj_.size(); ++t) {
            if (adj_[t] && !other.adj_[t]) return false;
        }
        return true;
    }

    friend bool operator==(const EdgeSet& a, const EdgeSet& b) { return a.n_ == b.n_ && a.adj_ == b.adj_; }

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i - 1) * n_ + (j - 1); }
    void check(int i) const {
        if (i < 1 || i > n_) throw DomainError("EdgeSet: vertex " + std::to_string(i) + " out of range");
    }

    int n_ = 0;
    std::vector<char> adj_;
};

/// Contiguous 1-based index interval [start, end].
struct Interval {
    int start = 1;
    int end = 0;

    int size() const { return end - start + 1; }
    bool contains(const Interval& o) const { return start <= o.start && o.end <= end; }
    friend bool operator==(const Interval&, const Interval&) = default;
    friend auto operator<=>(const Interval&, const Interval&) = default;
};

struct CliqueSet {
    int N = 0;
    std::vector<Interval> cliques;

    int p() const { return static_cast<int>(cliques.size()); }

    /// The single clique [1, N]; solving over it is plain LipSDP.
    static CliqueSet dense(int N) { return CliqueSet{N, {Interval{1, N}}}; }
};

/// Union over k = 1..K-1 of the full blocks S(k-1)+1 .. min(S(k+1)+tau, N).
inline EdgeSet predicted_edge_set(const DimsProfile& dims, int tau) {
    if (tau < 0) throw DomainError("predicted_edge_set: tau must be nonnegative");
    const int N = dims.N();
    EdgeSet E(N);
    for (int k = 1; k <= dims.depth() - 1; ++k) {
        E.add_block(dims.S(k - 1) + 1, std::min(dims.S(k + 1) + tau, N));
    }
    return E;
}

/// Union of the structural supports of z_aff and every basis matrix.
inline EdgeSet oracle_edge_set(const SdpProblem& prob) {
    EdgeSet E(prob.N());
    auto absorb = [&E](const SymSparse& M) {
        for (int c = 0; c < M.outerSize(); ++c) {
            for (SymSparse::InnerIterator it(M, c); it; ++it) E.add(static_cast<int>(it.row()) + 1, c + 1);
        }
    };
    absorb(prob.z_aff);
    for (const auto& Z : prob.basis) absorb(Z);
    return E;
}

/// Closed-form maximal cliques of predicted_edge_set(dims, tau).
///
/// p = min{k : S(k+1) + tau >= N}; C_k = [S(k-1)+1, S(k+1)+tau] for k < p and
/// C_p = [S(p-1)+1, N]. Intervals contained in another are dropped.
inline CliqueSet maximal_cliques(const DimsProfile& dims, int tau) {
    if (tau < 0) throw DomainError("maximal_cliques: tau must be nonnegative");
    const int N = dims.N();
    int p = 1;
    while (dims.S(p + 1) + tau < N) ++p;

    std::vector<Interval> raw;
    for (int k = 1; k < p; ++k) raw.push_back({dims.S(k - 1) + 1, dims.S(k + 1) + tau});
    raw.push_back({dims.S(p - 1) + 1, N});

    CliqueSet out{N, {}};
    for (std::size_t a = 0; a < raw.size(); ++a) {
        bool dominated = false;
        for (std::size_t b = 0; b < raw.size() && !dominated; ++b) {
            if (a == b || !raw[b].contains(raw[a])) continue;
            dominated = raw[a] != raw[b] || b < a;
        }
        if (!dominated) out.cliques.push_back(raw[a]);
    }
    std::sort(out.cliques.begin(), out.cliques.end());
    return out;
}

/// All maximal cliques by Bron-Kerbosch with Tomita pivoting.
///
/// Each clique is sorted ascending and the list is sorted lexicographically.
/// Graphs above `max_vertices` are refused.
inline std::vector<std::vector<int>> bron_kerbosch(const EdgeSet& E, int max_vertices = 256) {
    const int n = E.n();
    if (n > max_vertices) {
        throw DomainError("bron_kerbosch: " + std::to_string(n) + " vertices exceeds the guard of "
                          + std::to_string(max_vertices));
    }
    using Bits = std::vector<std::uint64_t>;
    const std::size_t words = (static_cast<std::size_t>(n) + 63) / 64;
    auto set_bit = [](Bits& b, int v) { b[v / 64] |= std::uint64_t{1} << (v % 64); };
    auto test_bit = [](const Bits& b, int v) { return (b[v / 64] >> (v % 64)) & 1U; };
    auto count = [](const Bits& b) {
        int c = 0;
        for (auto w : b) c += std::popcount(w);
        return c;
    };
    auto intersect = [words](const Bits& a, const Bits& b) {
        Bits out(words);
        for (std::size_t t = 0; t < words; ++t) out[t] = a[t] & b[t];
        return out;
    };
    auto empty = [](const Bits& b) {
        return std::all_of(b.begin(), b.end(), [](std::uint64_t w) { return w == 0; });
    };

    std::vector<Bits> nbr(n, Bits(words));
    for (const auto& [i, j] : E.edges()) {
        set_bit(nbr[i - 1], j - 1);
        set_bit(nbr[j - 1], i - 1);
    }

    std::vector<std::vector<int>> cliques;
    std::vector<int> R;
    std::function<void(Bits, Bits)> expand = [&](Bits P, Bits X) {
        if (empty(P) && empty(X)) {
            std::vector<int> c(R);
            std::sort(c.begin(), c.end());
            cliques.push_back(std::move(c));
            return;
        }
        int pivot = -1;
        int best = -1;
        for (int u = 0; u < n; ++u) {
            if (!test_bit(P, u) && !test_bit(X, u)) continue;
            const int c = count(intersect(P, nbr[u]));
            if (c > best) {
                best = c;
                pivot = u;
            }
        }
        for (int v = 0; v < n; ++v) {
            if (!test_bit(P, v) || test_bit(nbr[pivot], v)) continue;
            R.push_back(v + 1);
            expand(intersect(P, nbr[v]), intersect(X, nbr[v]));
            R.pop_back();
            P[v / 64] &= ~(std::uint64_t{1} << (v % 64));
            set_bit(X, v);
        }
    };
    Bits all(words);
    for (int v = 0; v < n; ++v) set_bit(all, v);
    if (n > 0) expand(all, Bits(words));
    std::sort(cliques.begin(), cliques.end());
    return cliques;
}

struct ChordalityResult {
    bool chordal = false;
    /// Elimination order (1-based vertices); a perfect elimination ordering
    /// when `chordal` holds.
    std::vector<int> elimination_order;
};

/// Maximum cardinality search followed by the perfect-elimination check.
inline ChordalityResult check_chordal(const EdgeSet& E) {
    const int n = E.n();
    std::vector<int> weight(n, 0);
    std::vector<char> numbered(n, 0);
    std::vector<int> visit; // MCS visit order; its reverse is the elimination order
    visit.reserve(n);
    for (int step = 0; step < n; ++step) {
        int v = -1;
        for (int u = 0; u < n; ++u) {
            if (!numbered[u] && (v < 0 || weight[u] > weight[v])) v = u;
        }
        numbered[v] = 1;
        visit.push_back(v);
        for (int u = 0; u < n; ++u) {
            if (!numbered[u] && u != v && E.contains(u + 1, v + 1)) ++weight[u];
        }
    }

    ChordalityResult res;
    res.elimination_order.assign(visit.rbegin(), visit.rend());
    std::vector<int> pos(n);
    for (int t = 0; t < n; ++t) pos[res.elimination_order[t]] = t;

    res.chordal = true;
    for (int t = 0; t < n && res.chordal; ++t) {
        const int v = res.elimination_order[t];
        std::vector<int> later;
        for (int u = 0; u < n; ++u) {
            if (u != v && pos[u] > t && E.contains(u + 1, v + 1)) later.push_back(u);
        }
        if (later.empty()) continue;
        const int parent = *std::min_element(later.begin(), later.end(),
                                             [&](int a, int b) { return pos[a] < pos[b]; });
        for (int u : later) {
            if (u != parent && !E.contains(u + 1, parent + 1)) {
                res.chordal = false;
                break;
            }
        }
    }
    for (auto& v : res.elimination_order) ++v;
    return res;
}

inline void check_interval(const Interval& C, int N) {
    if (C.start < 1 || C.end > N || C.start > C.end) {
        throw DomainError("clique interval [" + std::to_string(C.start) + ", " + std::to_string(C.end)
                          + "] outside 1.." + std::to_string(N));
    }
}

/// E_C^T Xk E_C as an upper-triangle store of size N.
inline SymSparse clique_scatter(const Interval& C, const Eigen::MatrixXd& Xk, int N) {
    check_interval(C, N);
    if (Xk.rows() != C.size() || Xk.cols() != C.size()) {
        throw ShapeError("clique_scatter: block is " + std::to_string(Xk.rows()) + "x"
                         + std::to_string(Xk.cols()) + ", clique has size " + std::to_string(C.size()));
    }
    std::vector<Eigen::Triplet<double>> trips;
    const int off = C.start - 1;
    for (int c = 0; c < C.size(); ++c) {
        for (int r = 0; r <= c; ++r) trips.emplace_back(off + r, off + c, Xk(r, c));
    }
    SymSparse X(N, N);
    X.setFromTriplets(trips.begin(), trips.end());
    return X;
}

/// Principal submatrix E_C X E_C^T of a dense symmetric matrix.
inline Eigen::MatrixXd clique_gather(const Interval& C, const Eigen::MatrixXd& X) {
    check_interval(C, static_cast<int>(X.rows()));
    return X.block(C.start - 1, C.start - 1, C.size(), C.size());
}

// ---------------------------------------------------------------------------
// Pattern export

/// Plain PBM (P1): one pixel per matrix entry, 1 (dark) where the entry is in the pattern.
inline std::string to_pbm(const EdgeSet& E) {
    std::ostringstream out;
    out << "P1\n" << E.n() << ' ' << E.n() << '\n';
    for (int i = 1; i <= E.n(); ++i) {
        for (int j = 1; j <= E.n(); ++j) out << (j > 1 ? " " : "") << (E.contains(i, j) ? '1' : '0');
        out << '\n';
    }
    return out.str();
}

/// CSV listing every (i, j) in the pattern, both triangles and the diagonal, row-major.
inline std::string to_csv(const EdgeSet& E) {
    std::ostringstream out;
    out << "i,j\n";
    for (int i = 1; i <= E.n(); ++i) {
        for (int j = 1; j <= E.n(); ++j) {
            if (E.contains(i, j)) out << i << ',' << j << '\n';
        }
    }
    return out.str();
}

} // namespace lipchord

#endif // LIPCHORD_CHORDAL_HPP
