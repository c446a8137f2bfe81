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

#ifndef LIPCHORD_SDP_BUILD_HPP
#define LIPCHORD_SDP_BUILD_HPP

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "lipchord/error.hpp"
#include "lipchord/network.hpp"

namespace lipchord {

/// Symmetric matrix stored as its upper triangle (row <= col), column-major.
using SymSparse = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Expands an upper-triangle store into the full dense symmetric matrix.
inline Eigen::MatrixXd to_dense(const SymSparse& upper) {
    const Eigen::MatrixXd U(upper);
    Eigen::MatrixXd dense = U + U.transpose();
    dense.diagonal() = U.diagonal();
    return dense;
}

/// Layer-size bookkeeping. Indices in the public API are 1-based.
class DimsProfile {
public:
    explicit DimsProfile(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
        if (sizes_.size() < 3) throw ShapeError("DimsProfile: need at least two affine layers");
        for (int n : sizes_) {
            if (n <= 0) throw ShapeError("DimsProfile: layer sizes must be positive");
        }
        prefix_.assign(depth() + 1, 0);
        for (int k = 1; k <= depth(); ++k) prefix_[k] = prefix_[k - 1] + sizes_[k - 1];
    }

    /// K, the number of affine layers.
    int depth() const { return static_cast<int>(sizes_.size()) - 1; }
    /// n_k for k = 1..K+1, with n_{K+1} = m.
    int n(int k) const { return sizes_.at(k - 1); }
    /// S(k) = n_1 + ... + n_k for k = 0..K.
    int S(int k) const { return prefix_.at(k); }
    int N() const { return prefix_.back(); }
    int N_f() const { return N() - sizes_.front(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }

    /// Block index k_i = min{k : S(k) >= i} of the 1-based coordinate i.
    int block_of(int i) const {
        if (i < 1 || i > N()) throw DomainError("block_of: index out of range");
        const auto it = std::lower_bound(prefix_.begin() + 1, prefix_.end(), i);
        return static_cast<int>(it - prefix_.begin());
    }

private:
    std::vector<int> sizes_;
    std::vector<int> prefix_;
};

/// Banded multiplier pattern {(i, j) : 1 <= i < j <= N_f, j - i <= tau}.
struct TauIndexSet {
    int tau = 0;
    std::vector<std::pair<int, int>> pairs;
};

/// tau is clamped to N_f - 1.
inline TauIndexSet tau_index_set(int n_f, int tau) {
    if (tau < 0) throw DomainError("tau must be nonnegative");
    TauIndexSet set;
    set.tau = std::min(tau, std::max(n_f - 1, 0));
    for (int i = 1; i <= n_f; ++i) {
        for (int j = i + 1; j <= std::min(n_f, i + set.tau); ++j) set.pairs.emplace_back(i, j);
    }
    return set;
}

/// Ordering of the decision vector gamma: N_f diagonal multipliers, then the
/// banded off-diagonal multipliers, then gamma_ell last.
struct GammaLayout {
    int n_f = 0;
    TauIndexSet band;

    int num_alpha() const { return n_f + static_cast<int>(band.pairs.size()); }
    int d() const { return num_alpha() + 1; }
    /// Zero-based position of gamma_ell.
    int ell_index() const { return d() - 1; }
};

inline GammaLayout make_layout(int n_f, int tau) {
    return GammaLayout{n_f, tau_index_set(n_f, tau)};
}

/// T = sum_i g_ii e_i e_i^T + sum_{(i,j) in band} g_ij (e_i - e_j)(e_i - e_j)^T,
/// returned as an upper-triangle store of size N_f.
inline SymSparse build_T(const GammaLayout& layout, const Eigen::VectorXd& gamma_alpha) {
    if (gamma_alpha.size() != layout.num_alpha()) {
        throw ShapeError("build_T: expected " + std::to_string(layout.num_alpha())
                         + " multipliers, got " + std::to_string(gamma_alpha.size()));
    }
    if ((gamma_alpha.array() < 0.0).any()) throw DomainError("build_T: multipliers must be nonnegative");

    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < layout.n_f; ++i) trips.emplace_back(i, i, gamma_alpha[i]);
    for (std::size_t q = 0; q < layout.band.pairs.size(); ++q) {
        const auto [i, j] = layout.band.pairs[q];
        const double g = gamma_alpha[layout.n_f + static_cast<int>(q)];
        trips.emplace_back(i - 1, i - 1, g);
        trips.emplace_back(j - 1, j - 1, g);
        trips.emplace_back(i - 1, j - 1, -g);
    }
    SymSparse T(layout.n_f, layout.n_f);
    T.setFromTriplets(trips.begin(), trips.end());
    return T;
}

/// Affine data of the semidefinite constraint Z(gamma) = z_aff + sum_i gamma_i Z_i <= 0.
struct SdpProblem {
    DimsProfile dims;
    GammaLayout layout;
    SymSparse z_aff;
    std::vector<SymSparse> basis;
    double sector_lo = 0.0;
    double sector_hi = 1.0;
    /// Requested tau before clamping to N_f - 1.
    int tau_requested = 0;
    /// Spectral norms of W_1..W_K and their product.
    std::vector<double> layer_norms;
    double naive_lip = 1.0;
    /// Feasible point with diagonal multipliers only, built layer by layer,
    /// and the diagonal of Z there. Empty when the recursion breaks down.
    Eigen::VectorXd greedy_gamma;
    Eigen::VectorXd greedy_diag;

    int tau() const { return layout.band.tau; }
    int d() const { return layout.d(); }
    int N() const { return dims.N(); }
    bool tau_clamped() const { return tau_requested != tau(); }
};

namespace detail {

/// Sparse vector over 0..N-1 as (index, value) pairs.
using SparseVec = std::vector<std::pair<int, double>>;

/// A^T t for t = e_i (sign = 0) or e_i - e_j, where row i of A is row
/// (i - offset) of W_r placed over the columns of block r.
inline void add_A_row(const Network& net, const DimsProfile& dims, int i, double coeff, SparseVec& out) {
    const int n1 = dims.n(1);
    const int block = dims.block_of(n1 + i); // block holding x_{r+1}; A-row uses W_r
    const int r = block - 1;
    const int row = n1 + i - dims.S(block) + dims.n(block) - 1;
    const Eigen::MatrixXd& W = net.weights[r - 1];
    const int col0 = dims.S(r - 1);
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
        const double w = W(row, c);
        if (w != 0.0) out.emplace_back(col0 + static_cast<int>(c), coeff * w);
    }
}

inline SparseVec combine(SparseVec v) {
    std::sort(v.begin(), v.end());
    SparseVec merged;
    for (const auto& [idx, val] : v) {
        if (!merged.empty() && merged.back().first == idx) merged.back().second += val;
        else merged.emplace_back(idx, val);
    }
    return merged;
}

/// Upper triangle of [a b] Q [a b]^T for Q = [[q11, q12], [q12, q22]].
///
/// The sparsity structure is that of the full multiplier template: every
/// outer-product term contributes its pattern even when its coefficient
/// vanishes (q11 = 0 for sectors with lo = 0), storing explicit zeros.
inline SymSparse sector_form(int N, const SparseVec& a, const SparseVec& b, double q11, double q12, double q22) {
    std::vector<Eigen::Triplet<double>> trips;
    auto outer = [&](const SparseVec& x, const SparseVec& y, double coeff) {
        for (const auto& [p, xp] : x) {
            for (const auto& [q, yq] : y) {
                if (p <= q) trips.emplace_back(p, q, coeff * xp * yq);
            }
        }
    };
    outer(a, a, q11);
    outer(a, b, q12);
    outer(b, a, q12);
    outer(b, b, q22);
    SymSparse Z(N, N);
    Z.setFromTriplets(trips.begin(), trips.end());
    return Z;
}

/// Schur-complement sweep over the layers. With P = -S the complement of the
/// blocks already eliminated (gamma_ell = 1), layer k gets T = (lam diag M)^-1
/// for M = q12^2 W P^-1 W^T and lam = lambda_max of M with unit diagonal, which
/// keeps 2T - T M T >= T. gamma_ell is then the least value making the last
/// block NSD; everything else scales with it.
inline bool greedy_multipliers(const Network& net, double q11, double q12, double q22, Eigen::VectorXd& t_out,
                               double& gamma_ell) {
    const int K = net.depth();
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(net.input_dim(), net.input_dim());
    std::vector<Eigen::VectorXd> T;
    Eigen::Index total = 0;
    for (int k = 0; k + 1 < K; ++k) {
        const Eigen::MatrixXd& W = net.weights[k];
        const Eigen::LLT<Eigen::MatrixXd> llt(P);
        if (llt.info() != Eigen::Success) return false;
        const Eigen::MatrixXd M = q12 * q12 * W * llt.solve(W.transpose());
        const double top = M.diagonal().maxCoeff();
        if (!(top > 0.0) || !std::isfinite(top)) return false;
        const Eigen::VectorXd dg = M.diagonal().cwiseMax(1e-12 * top);
        const Eigen::VectorXd s = dg.cwiseSqrt().cwiseInverse();
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.asDiagonal() * M * s.asDiagonal(),
                                                                Eigen::EigenvaluesOnly);
        const double lam = std::max(1.0, es.eigenvalues().maxCoeff());
        Eigen::VectorXd t = (lam * dg).cwiseInverse();
        const Eigen::MatrixXd TW = t.asDiagonal() * W;
        const Eigen::LLT<Eigen::MatrixXd> l2(P - q11 * W.transpose() * TW);
        if (l2.info() != Eigen::Success) return false;
        P = -q22 * Eigen::MatrixXd(t.asDiagonal()) - q12 * q12 * TW * l2.solve(TW.transpose());
        P = (0.5 * (P + P.transpose())).eval();
        total += t.size();
        T.push_back(std::move(t));
    }
    const Eigen::LLT<Eigen::MatrixXd> lf(P);
    if (lf.info() != Eigen::Success) return false;
    const Eigen::MatrixXd L = lf.matrixL();
    const Eigen::MatrixXd& WK = net.weights[K - 1];
    Eigen::MatrixXd G = L.triangularView<Eigen::Lower>().solve(WK.transpose() * WK);
    G = L.triangularView<Eigen::Lower>().solve(G.transpose()).transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (G + G.transpose()), Eigen::EigenvaluesOnly);
    gamma_ell = es.eigenvalues().maxCoeff();
    if (!(gamma_ell > 0.0) || !std::isfinite(gamma_ell)) return false;
    t_out.resize(total);
    Eigen::Index o = 0;
    for (const auto& t : T) {
        t_out.segment(o, t.size()) = gamma_ell * t;
        o += t.size();
    }
    return t_out.allFinite();
}

} // namespace detail

inline SymSparse assemble_Z(const SdpProblem& prob, const Eigen::VectorXd& gamma);

/// Assembles the LipSDP data for `net` with a tau-banded multiplier T.
inline SdpProblem build_problem(const Network& net, int tau) {
    if (tau < 0) throw DomainError("build_problem: tau must be nonnegative");
    net.validate();

    SdpProblem prob{DimsProfile(net.layer_sizes), make_layout(0, 0), SymSparse(), {}, net.activation.lo,
                    net.activation.hi, tau, {}, 1.0, {}, {}};
    const DimsProfile& dims = prob.dims;
    const int N = dims.N();
    const int n1 = dims.n(1);
    const int K = dims.depth();
    prob.layout = make_layout(dims.N_f(), tau);
    prob.naive_lip = 1.0;
    for (const auto& W : net.weights) {
        prob.layer_norms.push_back(spectral_norm(W));
        prob.naive_lip *= prob.layer_norms.back();
    }

    const double lo = net.activation.lo;
    const double hi = net.activation.hi;
    const double q11 = -2.0 * lo * hi;
    const double q12 = lo + hi;
    const double q22 = -2.0;

    prob.basis.reserve(prob.layout.d());
    for (int i = 1; i <= dims.N_f(); ++i) {
        detail::SparseVec a;
        detail::add_A_row(net, dims, i, 1.0, a);
        const detail::SparseVec b{{n1 + i - 1, 1.0}};
        prob.basis.push_back(detail::sector_form(N, detail::combine(a), b, q11, q12, q22));
    }
    for (const auto& [i, j] : prob.layout.band.pairs) {
        detail::SparseVec a;
        detail::add_A_row(net, dims, i, 1.0, a);
        detail::add_A_row(net, dims, j, -1.0, a);
        const detail::SparseVec b{{n1 + i - 1, 1.0}, {n1 + j - 1, -1.0}};
        prob.basis.push_back(detail::sector_form(N, detail::combine(a), b, q11, q12, q22));
    }
    {
        std::vector<Eigen::Triplet<double>> trips;
        for (int i = 0; i < n1; ++i) trips.emplace_back(i, i, -1.0);
        SymSparse ell(N, N);
        ell.setFromTriplets(trips.begin(), trips.end());
        prob.basis.push_back(std::move(ell));
    }
    {
        const Eigen::MatrixXd& WK = net.weights[K - 1];
        const Eigen::MatrixXd gram = WK.transpose() * WK;
        const int off = dims.S(K - 1);
        std::vector<Eigen::Triplet<double>> trips;
        for (Eigen::Index c = 0; c < gram.cols(); ++c) {
            for (Eigen::Index r = 0; r <= c; ++r) {
                if (gram(r, c) != 0.0) trips.emplace_back(off + r, off + c, gram(r, c));
            }
        }
        prob.z_aff.resize(N, N);
        prob.z_aff.setFromTriplets(trips.begin(), trips.end());
    }
    Eigen::VectorXd t;
    double gamma_ell = 0.0;
    if (detail::greedy_multipliers(net, q11, q12, q22, t, gamma_ell)) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(prob.layout.d());
        g.head(dims.N_f()) = t;
        g[prob.layout.ell_index()] = gamma_ell;
        const SymSparse Z = assemble_Z(prob, g);
        prob.greedy_diag = Eigen::VectorXd(Z.diagonal());
        if (prob.greedy_diag.allFinite()) prob.greedy_gamma = std::move(g);
        else prob.greedy_diag.resize(0);
    }
    return prob;
}

/// z_aff + sum_i gamma_i Z_i (upper-triangle store).
inline SymSparse assemble_Z(const SdpProblem& prob, const Eigen::VectorXd& gamma) {
    if (gamma.size() != prob.d()) {
        throw ShapeError("assemble_Z: gamma has length " + std::to_string(gamma.size()) + ", expected "
                         + std::to_string(prob.d()));
    }
    SymSparse Z = prob.z_aff;
    for (int i = 0; i < prob.d(); ++i) {
        if (gamma[i] != 0.0) Z += gamma[i] * prob.basis[i];
    }
    return Z;
}

} // namespace lipchord

#endif // LIPCHORD_SDP_BUILD_HPP
