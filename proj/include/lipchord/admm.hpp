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

#ifndef LIPCHORD_ADMM_HPP
#define LIPCHORD_ADMM_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "lipchord/chordal.hpp"
#include "lipchord/error.hpp"
#include "lipchord/sdp_build.hpp"

namespace lipchord {

// ---------------------------------------------------------------------------
// vec / mat

/// Column-stacking vectorization.
inline Eigen::VectorXd vec(const Eigen::MatrixXd& M) {
    return Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
}

inline Eigen::MatrixXd mat(const Eigen::VectorXd& v) {
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (n * n != v.size()) {
        throw ShapeError("mat: length " + std::to_string(v.size()) + " is not a perfect square");
    }
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
}

/// Euclidean projection onto the negative semidefinite cone. The input is
/// symmetrized first.
inline Eigen::MatrixXd project_nsd(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw ShapeError("project_nsd: matrix must be square");
    if (M.size() == 0) return M;
    const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("project_nsd: eigendecomposition failed (max |entry| = "
                             + std::to_string(S.cwiseAbs().maxCoeff()) + ")");
    }
    // Eigenvalues ascend; keep the strictly negative prefix.
    const Eigen::VectorXd& lam = eig.eigenvalues();
    Eigen::Index neg = 0;
    while (neg < lam.size() && lam[neg] < 0.0) ++neg;
    if (neg == 0) return Eigen::MatrixXd::Zero(M.rows(), M.cols());
    const auto V = eig.eigenvectors().leftCols(neg);
    Eigen::MatrixXd P = V * lam.head(neg).asDiagonal() * V.transpose();
    return 0.5 * (P + P.transpose());
}

/// project_nsd on the vectorized form.
inline Eigen::VectorXd project_nsd_vec(const Eigen::VectorXd& v) { return vec(project_nsd(mat(v))); }

inline double max_eigenvalue(const Eigen::MatrixXd& M) {
    if (M.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw NumericalError("max_eigenvalue: eigendecomposition failed");
    return eig.eigenvalues()[eig.eigenvalues().size() - 1];
}

// ---------------------------------------------------------------------------
// Vectorized clique geometry

/// Entries of vec(X) covered by some clique block, with the gather maps H_k
/// realized as index lists into the covered subspace.
class VecSpace {
public:
    VecSpace(int N, const CliqueSet& cliques) : N_(N), cliques_(cliques.cliques) {
        if (cliques.N != N) throw ShapeError("VecSpace: clique set is for a different matrix size");
        if (cliques_.empty()) throw DomainError("VecSpace: need at least one clique");
        position_.assign(static_cast<std::size_t>(N) * N, -1);
        std::vector<int> count(static_cast<std::size_t>(N) * N, 0);
        for (const auto& C : cliques_) {
            check_interval(C, N);
            for (int c = C.start - 1; c < C.end; ++c) {
                for (int r = C.start - 1; r < C.end; ++r) ++count[linear(r, c)];
            }
        }
        for (std::size_t t = 0; t < count.size(); ++t) {
            if (count[t] > 0) {
                position_[t] = static_cast<int>(covered_.size());
                covered_.push_back(static_cast<long>(t));
                overlap_.push_back(count[t]);
            }
        }
        offsets_.push_back(0);
        for (const auto& C : cliques_) {
            std::vector<int> map;
            map.reserve(static_cast<std::size_t>(C.size()) * C.size());
            for (int c = C.start - 1; c < C.end; ++c) {
                for (int r = C.start - 1; r < C.end; ++r) map.push_back(position_[linear(r, c)]);
            }
            offsets_.push_back(offsets_.back() + static_cast<long>(map.size()));
            gather_.push_back(std::move(map));
        }
    }

    int N() const { return N_; }
    int p() const { return static_cast<int>(cliques_.size()); }
    const Interval& clique(int k) const { return cliques_[k]; }
    Eigen::Index num_covered() const { return static_cast<Eigen::Index>(covered_.size()); }
    /// Total length of the stacked block vectors (sum of |C_k|^2).
    Eigen::Index block_length() const { return offsets_.back(); }
    Eigen::Index offset(int k) const { return offsets_[k]; }
    Eigen::Index block_size(int k) const { return offsets_[k + 1] - offsets_[k]; }
    const std::vector<int>& gather_map(int k) const { return gather_[k]; }
    /// D = sum_k H_k^T H_k restricted to covered entries.
    Eigen::VectorXd overlap() const {
        Eigen::VectorXd D(num_covered());
        for (Eigen::Index t = 0; t < D.size(); ++t) D[t] = overlap_[t];
        return D;
    }
    /// Covered position of entry (r, c), zero-based; -1 if uncovered.
    int position(int r, int c) const { return position_[linear(r, c)]; }
    /// Column-major linear index of the covered entry at position t.
    long covered_index(Eigen::Index t) const { return covered_[t]; }

    /// sum_k H_k^T x_k for stacked blocks x.
    Eigen::VectorXd scatter(const Eigen::VectorXd& blocks) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(num_covered());
        for (int k = 0; k < p(); ++k) {
            const auto& map = gather_[k];
            const double* src = blocks.data() + offsets_[k];
            for (std::size_t t = 0; t < map.size(); ++t) out[map[t]] += src[t];
        }
        return out;
    }

    /// Stacked H_k y for every clique.
    Eigen::VectorXd gather(const Eigen::VectorXd& y) const {
        Eigen::VectorXd out(block_length());
        for (int k = 0; k < p(); ++k) {
            const auto& map = gather_[k];
            double* dst = out.data() + offsets_[k];
            for (std::size_t t = 0; t < map.size(); ++t) dst[t] = y[map[t]];
        }
        return out;
    }

    /// Restriction of vec(S) to the covered entries. Throws if S has a
    /// nonzero outside the covered pattern.
    Eigen::VectorXd restrict(const SymSparse& upper) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(num_covered());
        for (int c = 0; c < upper.outerSize(); ++c) {
            for (SymSparse::InnerIterator it(upper, c); it; ++it) {
                const int r = static_cast<int>(it.row());
                if (it.value() == 0.0) continue;
                const int a = position(r, c);
                const int b = position(c, r);
                if (a < 0 || b < 0) {
                    throw DomainError("cliques do not cover entry (" + std::to_string(r + 1) + ", "
                                      + std::to_string(c + 1) + ") of the constraint matrix");
                }
                out[a] = it.value();
                out[b] = it.value();
            }
        }
        return out;
    }

    /// Dense N x N matrix from a covered-entry vector.
    Eigen::MatrixXd expand(const Eigen::VectorXd& y) const {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N_, N_);
        for (Eigen::Index t = 0; t < y.size(); ++t) M.data()[covered_[t]] = y[t];
        return M;
    }

private:
    std::size_t linear(int r, int c) const { return static_cast<std::size_t>(c) * N_ + r; }

    int N_;
    std::vector<Interval> cliques_;
    std::vector<int> position_;
    std::vector<long> covered_;
    std::vector<int> overlap_;
    std::vector<std::vector<int>> gather_;
    std::vector<Eigen::Index> offsets_;
};

// ---------------------------------------------------------------------------
// Problem data in solver form

/// minimize c^T gamma  s.t.  gamma >= 0,  z_aff + sum_i gamma_i Z_i = sum_k E_k^T Z_k E_k,  Z_k <= 0.
struct ConicProblem {
    int N = 0;
    SymSparse z_aff;
    std::vector<SymSparse> basis;
    Eigen::VectorXd objective;
    /// Starting point for gamma (and omega); zero when empty.
    Eigen::VectorXd gamma0;
    /// Optional positive diagonal D; the solver works with D Z(gamma) D,
    /// which has the same sparsity and the same semidefiniteness.
    Eigen::VectorXd congruence;
};

/// LipSDP in solver form: objective e_d. Starts from the greedy feasible
/// point and scales by its diagonal when available, otherwise from
/// gamma_ell = naive_lip^2 with layer gains.
inline ConicProblem to_conic(const SdpProblem& prob) {
    ConicProblem c;
    c.N = prob.N();
    c.z_aff = prob.z_aff;
    c.basis = prob.basis;
    c.objective = Eigen::VectorXd::Unit(prob.d(), prob.layout.ell_index());
    c.congruence.resize(prob.N());
    if (prob.greedy_gamma.size() == prob.d() && prob.greedy_diag.size() == prob.N()) {
        c.gamma0 = prob.greedy_gamma;
        for (int k = 1; k <= prob.dims.depth(); ++k) {
            const auto block = prob.greedy_diag.segment(prob.dims.S(k - 1), prob.dims.n(k)).cwiseAbs();
            const double floor = 1e-8 * block.maxCoeff();
            for (int i = 0; i < block.size(); ++i) {
                c.congruence[prob.dims.S(k - 1) + i] = 1.0 / std::sqrt(std::max(block[i], floor));
            }
        }
        if (c.congruence.allFinite() && c.congruence.maxCoeff() > 0.0) {
            c.congruence /= c.congruence.maxCoeff();
            return c;
        }
    }
    c.gamma0 = Eigen::VectorXd::Zero(prob.d());
    c.gamma0[prob.layout.ell_index()] = prob.naive_lip * prob.naive_lip;
    // Block k of x carries the gain of the layers in front of it.
    double gain = 1.0;
    for (int k = 1; k <= prob.dims.depth(); ++k) {
        if (gain <= 0.0 || !std::isfinite(gain)) gain = 1.0;
        c.congruence.segment(prob.dims.S(k - 1), prob.dims.n(k)).setConstant(gain);
        if (k <= static_cast<int>(prob.layer_norms.size())) gain *= prob.layer_norms[k - 1];
    }
    return c;
}

struct SolveOptions {
    double rho0 = 10.0;
    double eps_abs = 1e-8;
    double eps_rel = 1e-6;
    long max_iters = 200000;
    bool adapt_rho = true;
    /// Residual-balancing check period and thresholds.
    int adapt_every = 50;
    double adapt_ratio = 10.0;
    double adapt_factor = 2.0;
    /// Checks without a rho change after which rho is pushed toward the
    /// residual that still misses its tolerance.
    int adapt_hold = 20;
    /// Over-relaxation factor in (0, 2); 1 is plain ADMM.
    double relaxation = 1.6;
    /// Scale each gamma coordinate so its constraint column has unit norm.
    bool equilibrate = true;
    /// Length of each probe run used to re-derive the diagonal congruence
    /// from the diagonal of Z(gamma); `rescale_passes` probes precede the
    /// main run.
    long probe_iters = 1000;
    int rescale_passes = 1;
    /// The solver enforces Z~(gamma) <= -margin * I in its scaled coordinates
    /// and only stops once ||Z~(gamma) + margin I - sum H_k^T z_k||_F is below
    /// margin / (2 max overlap). Redistributing that residual over the blocks
    /// then yields an exact decomposition with strictly negative definite
    /// blocks. Zero turns this off (plain feasibility problems).
    double feasibility_margin = 1e-6;
    /// Eigenvalue tolerance used when checking projected blocks.
    double nsd_tol = 1e-9;
    /// Relative weight of the linear cost put on coordinates with zero
    /// objective, in solver coordinates. 0 disables it.
    double regularization = 0.0;
    /// Wall-clock budget in seconds, checked every `adapt_every` iterations; 0 disables.
    double time_budget_s = 0.0;

    void validate() const {
        if (!(rho0 > 0.0) || !(eps_abs > 0.0) || !(eps_rel > 0.0) || !(nsd_tol > 0.0)) {
            throw DomainError("solver options: rho0 and all tolerances must be positive");
        }
        if (!(feasibility_margin >= 0.0) || !(regularization >= 0.0)) {
            throw DomainError("solver options: feasibility margin and regularization must be nonnegative");
        }
        if (probe_iters < 1 || rescale_passes < 0) throw DomainError("solver options: invalid probe settings");
        if (max_iters < 1 || adapt_every < 1 || adapt_hold < 1) throw DomainError("solver options: iteration counts must be positive");
        if (!(relaxation > 0.0) || !(relaxation < 2.0)) throw DomainError("solver options: relaxation must lie in (0, 2)");
        if (!(adapt_ratio > 1.0) || !(adapt_factor > 1.0)) {
            throw DomainError("solver options: adaptation ratio and factor must exceed 1");
        }
    }
};

/// ADMM iterates. omega/gamma/mu live in the (possibly equilibrated) gamma
/// coordinates; v/z/lambda stack the per-clique vectorized blocks.
struct AdmmState {
    Eigen::VectorXd omega, gamma, mu;
    Eigen::VectorXd v, z, lambda;
    double rho = 1.0;
    long iter = 0;
    /// Consecutive adaptation checks that left rho unchanged.
    int rho_hold = 0;
    double primal_residual = std::numeric_limits<double>::infinity();
    double dual_residual = std::numeric_limits<double>::infinity();
    /// ||J gamma + z_aff - sum H_k^T z_k||_F, margin shift included.
    double feasibility_residual = std::numeric_limits<double>::infinity();
    std::vector<double> primal_history, dual_history;
};

/// Per-phase contract checks of one ADMM step.
struct StepDiagnostics {
    /// ||J omega + z_aff - sum_k H_k^T v_k||_inf after the (omega, v) solve.
    double affine_residual = 0.0;
    /// Scale for affine_residual: 1 + ||z_aff||_inf + ||J||_inf-ish data norm.
    double data_norm = 0.0;
    double min_gamma = 0.0;
    double max_block_eigenvalue = 0.0;
};

/// ADMM for the clique-decomposed problem with an exact (omega, v) solve.
///
/// The (omega, v) step is an equality-constrained least squares problem whose
/// KKT multiplier y satisfies (J J^T + D) y = rhs on the covered entries. D is
/// diagonal, so the d x d matrix I + J^T D^{-1} J is factored once and reused
/// through the Woodbury identity; it does not depend on rho.
class AdmmSolver {
public:
    AdmmSolver(ConicProblem problem, const CliqueSet& cliques, SolveOptions opts = {})
        : prob_(std::move(problem)), space_(prob_.N, cliques), opts_(opts) {
        opts_.validate();
        const int d = static_cast<int>(prob_.basis.size());
        if (prob_.objective.size() != d) throw ShapeError("AdmmSolver: objective length differs from basis count");

        if (prob_.congruence.size() == 0) prob_.congruence = Eigen::VectorXd::Ones(prob_.N);
        if (prob_.congruence.size() != prob_.N || (prob_.congruence.array() <= 0.0).any()) {
            throw DomainError("AdmmSolver: congruence must be a positive vector of length N");
        }
        const auto& D = prob_.congruence;
        auto congruent = [&D](const SymSparse& M) -> SymSparse {
            return D.asDiagonal() * M * D.asDiagonal();
        };

        zaff_ = space_.restrict(congruent(prob_.z_aff));
        affine_scale_ = 1.0;
        if (opts_.equilibrate && zaff_.size() > 0 && zaff_.cwiseAbs().maxCoeff() > 0.0) {
            affine_scale_ = zaff_.cwiseAbs().maxCoeff();
            zaff_ /= affine_scale_;
        }
        zaff_plain_ = zaff_;
        for (int i = 0; i < space_.N(); ++i) zaff_[space_.position(i, i)] += opts_.feasibility_margin;
        max_overlap_ = space_.overlap().maxCoeff();
        std::vector<Eigen::VectorXd> cols;
        cols.reserve(d);
        scale_ = Eigen::VectorXd::Ones(d);
        for (int i = 0; i < d; ++i) {
            cols.push_back(space_.restrict(congruent(prob_.basis[i])));
            const double nrm = cols.back().norm();
            if (opts_.equilibrate && nrm > 0.0) scale_[i] = 1.0 / nrm;
        }
        std::vector<Eigen::Triplet<double>> trips;
        for (int i = 0; i < d; ++i) {
            for (Eigen::Index t = 0; t < cols[i].size(); ++t) {
                if (cols[i][t] != 0.0) trips.emplace_back(static_cast<int>(t), i, cols[i][t] * scale_[i]);
            }
        }
        J_.resize(space_.num_covered(), d);
        J_.setFromTriplets(trips.begin(), trips.end());
        cost_ = prob_.objective.cwiseProduct(scale_);
        if (d > 0 && cost_.cwiseAbs().maxCoeff() > 0.0) cost_ /= cost_.cwiseAbs().maxCoeff();
        if (opts_.regularization > 0.0 && d > 0) {
            // Small cost on otherwise free coordinates keeps the optimal face bounded.
            const double w = opts_.regularization * cost_.cwiseAbs().maxCoeff();
            for (int i = 0; i < d; ++i) {
                if (cost_[i] == 0.0) cost_[i] = w;
            }
        }

        dinv_ = space_.overlap().cwiseInverse();
        Eigen::MatrixXd small = Eigen::MatrixXd::Identity(d, d);
        if (d > 0) {
            const SpMat JtDinv = J_.transpose() * dinv_.asDiagonal();
            small += Eigen::MatrixXd(JtDinv * J_);
        }
        chol_.compute(small);
        if (chol_.info() != Eigen::Success) {
            throw NumericalError("AdmmSolver: reduced system I + J^T D^-1 J is not positive definite");
        }

        data_norm_ = 1.0 + (zaff_.size() ? zaff_.cwiseAbs().maxCoeff() : 0.0);
        reset();
    }

    /// Initial iterate: gamma = omega = gamma0, all other blocks and duals zero.
    void reset() {
        const int d = static_cast<int>(prob_.basis.size());
        st_ = AdmmState{};
        st_.rho = opts_.rho0;
        cert_iter_ = -1;
        st_.gamma = Eigen::VectorXd::Zero(d);
        if (prob_.gamma0.size() == d) st_.gamma = prob_.gamma0.cwiseQuotient(scale_) / affine_scale_;
        st_.omega = st_.gamma;
        st_.mu = Eigen::VectorXd::Zero(d);
        st_.v = Eigen::VectorXd::Zero(space_.block_length());
        st_.z = st_.v;
        st_.lambda = st_.v;
    }

    const AdmmState& state() const { return st_; }
    const VecSpace& space() const { return space_; }
    const SolveOptions& options() const { return opts_; }

    /// gamma in the original (unscaled) coordinates.
    Eigen::VectorXd gamma() const { return affine_scale_ * st_.gamma.cwiseProduct(scale_); }
    Eigen::VectorXd omega() const { return affine_scale_ * st_.omega.cwiseProduct(scale_); }

    /// Block k of z in the original coordinates, a dense |C_k| x |C_k| matrix.
    Eigen::MatrixXd z_block(int k) const { return unscale_block(st_.z, k); }
    std::vector<Eigen::MatrixXd> z_blocks() const {
        std::vector<Eigen::MatrixXd> out;
        for (int k = 0; k < space_.p(); ++k) out.push_back(z_block(k));
        return out;
    }

    /// Blocks whose scatter sum reproduces Z(gamma) exactly: the residual
    /// Z(gamma) - sum H_k^T z_k is split over the cliques by overlap count.
    std::vector<Eigen::MatrixXd> certificate_blocks() const {
        const Eigen::VectorXd resid = J_ * st_.gamma + zaff_plain_ - space_.scatter(st_.z);
        const Eigen::VectorXd share = space_.gather(dinv_.cwiseProduct(resid));
        const Eigen::VectorXd fixed = st_.z + share;
        std::vector<Eigen::MatrixXd> out;
        for (int k = 0; k < space_.p(); ++k) out.push_back(unscale_block(fixed, k));
        return out;
    }

    /// One pass of the four updates. Fills `diag` when non-null (costs an
    /// extra residual evaluation and one eigendecomposition per block).
    void step(StepDiagnostics* diag = nullptr) {
        const double rho = st_.rho;
        const Eigen::VectorXd gamma_prev = st_.gamma;
        const Eigen::VectorXd z_prev = st_.z;

        // (1) exact (omega, v) minimization over the affine set.
        const Eigen::VectorXd mu_c = st_.mu - cost_;
        Eigen::VectorXd rhs = rho * (J_ * st_.gamma + zaff_ - space_.scatter(st_.z)) + J_ * mu_c
                              - space_.scatter(st_.lambda);
        const Eigen::VectorXd y = solve_reduced(rhs);
        st_.omega = st_.gamma + (mu_c - J_.transpose() * y) / rho;
        st_.v = st_.z + (st_.lambda + space_.gather(y)) / rho;
        if (diag) {
            const Eigen::VectorXd r = J_ * st_.omega + zaff_ - space_.scatter(st_.v);
            diag->affine_residual = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
            diag->data_norm = data_norm_;
        }

        // Relaxed copies enter the second block and the dual updates.
        const double a = opts_.relaxation;
        const Eigen::VectorXd omega_hat = a * st_.omega + (1.0 - a) * gamma_prev;
        const Eigen::VectorXd v_hat = a * st_.v + (1.0 - a) * z_prev;

        // (2) gamma = max(0, omega - mu / rho).
        st_.gamma = (omega_hat - st_.mu / rho).cwiseMax(0.0);
        if (diag) diag->min_gamma = st_.gamma.size() ? st_.gamma.minCoeff() : 0.0;

        // (3) z_k = P_nsd(v_k - lambda_k / rho).
        const Eigen::VectorXd target = v_hat - st_.lambda / rho;
        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < space_.p(); ++k) {
            const Eigen::MatrixXd Zk = project_nsd(block(target, k));
            st_.z.segment(space_.offset(k), space_.block_size(k)) = vec(Zk);
            if (diag) worst = std::max(worst, max_eigenvalue(Zk));
        }
        if (diag) diag->max_block_eigenvalue = worst;

        // (4) dual ascent.
        st_.mu += rho * (st_.gamma - omega_hat);
        st_.lambda += rho * (st_.z - v_hat);

        ++st_.iter;
        update_residuals(gamma_prev, z_prev);
    }

    /// Congruence that equilibrates the diagonal of the current Z(gamma):
    /// D_i / sqrt(|Z~_ii|), with tiny diagonals floored.
    Eigen::VectorXd equilibrated_congruence() const {
        const Eigen::VectorXd zv = J_ * st_.gamma + zaff_plain_;
        Eigen::VectorXd diag(space_.N());
        for (int i = 0; i < space_.N(); ++i) diag[i] = std::abs(zv[space_.position(i, i)]);
        const double top = diag.maxCoeff();
        if (!(top > 0.0) || !std::isfinite(top)) return prob_.congruence;
        const double floor = 1e-8 * top;
        Eigen::VectorXd D = prob_.congruence;
        for (int i = 0; i < space_.N(); ++i) D[i] /= std::sqrt(std::max(diag[i], floor));
        D /= D.maxCoeff();
        if (!D.allFinite() || !(D.minCoeff() > 0.0)) return prob_.congruence;
        return D;
    }

    /// Primal/dual stopping thresholds for the current iterate.
    std::pair<double, double> tolerances() const {
        const double dim = static_cast<double>(st_.gamma.size() + st_.z.size());
        const double prim_scale = std::max({st_.omega.norm(), st_.gamma.norm(), max_block_norm(st_.v),
                                            max_block_norm(st_.z)});
        const double dual_scale = std::max(st_.mu.norm(), max_block_norm(st_.lambda));
        return {opts_.eps_abs * std::sqrt(dim) + opts_.eps_rel * prim_scale,
                opts_.eps_abs * std::sqrt(dim) + opts_.eps_rel * dual_scale};
    }

    /// Stops once both residuals meet their tolerances and the certificate
    /// blocks keep a quarter of the margin: either the residual norm bound
    /// guarantees it or an eigenvalue check of the blocks confirms it.
    bool converged() const {
        const auto [tp, td] = tolerances();
        if (!(st_.iter > 0 && st_.primal_residual <= tp && st_.dual_residual <= td)) return false;
        if (opts_.feasibility_margin <= 0.0) return true;
        if (st_.feasibility_residual <= opts_.feasibility_margin / (2.0 * max_overlap_)) return true;
        if (cert_iter_ != st_.iter) {
            cert_iter_ = st_.iter;
            cert_ok_ = certificate_max_eigenvalue() <= -opts_.feasibility_margin / (4.0 * max_overlap_);
        }
        return cert_ok_;
    }

    /// Largest eigenvalue over the certificate blocks in solver coordinates.
    double certificate_max_eigenvalue() const {
        const Eigen::VectorXd resid = J_ * st_.gamma + zaff_plain_ - space_.scatter(st_.z);
        const Eigen::VectorXd fixed = st_.z + space_.gather(dinv_.cwiseProduct(resid));
        double worst = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < space_.p(); ++k) worst = std::max(worst, max_eigenvalue(block(fixed, k)));
        return worst;
    }

    /// Residual balancing on tolerance-normalized residuals. mu and lambda
    /// are unscaled multipliers and are left as is.
    void adapt_rho() {
        const auto [tp, td] = tolerances();
        const double prim = st_.primal_residual / tp;
        const double dual = st_.dual_residual / td;
        const double ratio = opts_.adapt_ratio;
        // Outside the dead band balance the two. After a long hold inside it,
        // push on whichever residual is still above its tolerance.
        const bool stalled = st_.rho_hold >= opts_.adapt_hold;
        const double before = st_.rho;
        if (prim > ratio * dual || (stalled && prim > 1.0 && dual <= 1.0)) {
            st_.rho = std::min(st_.rho * opts_.adapt_factor, kRhoMax);
        } else if (dual > ratio * prim || (stalled && dual > 1.0 && prim <= 1.0)) {
            st_.rho = std::max(st_.rho / opts_.adapt_factor, kRhoMin);
        }
        st_.rho_hold = st_.rho == before ? st_.rho_hold + 1 : 0;
    }

    struct Outcome {
        bool converged = false;
        bool timed_out = false;
        double wall_time_s = 0.0;
    };

    /// Iterates until the stopping rule holds, the iteration cap is reached,
    /// or the time budget is exhausted.
    Outcome run() {
        const auto t0 = std::chrono::steady_clock::now();
        auto elapsed = [&] {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        };
        Outcome out;
        while (st_.iter < opts_.max_iters) {
            step();
            if (converged()) {
                out.converged = true;
                break;
            }
            if (st_.iter % opts_.adapt_every == 0) {
                if (opts_.adapt_rho) adapt_rho();
                if (opts_.time_budget_s > 0.0 && elapsed() > opts_.time_budget_s) {
                    out.timed_out = true;
                    break;
                }
            }
        }
        out.wall_time_s = elapsed();
        return out;
    }

private:
    using SpMat = Eigen::SparseMatrix<double>;
    static constexpr double kRhoMin = 1e-8;
    static constexpr double kRhoMax = 1e8;

    Eigen::MatrixXd block(const Eigen::VectorXd& stacked, int k) const {
        const Eigen::Index n = space_.clique(k).size();
        return Eigen::Map<const Eigen::MatrixXd>(stacked.data() + space_.offset(k), n, n);
    }

    Eigen::MatrixXd unscale_block(const Eigen::VectorXd& stacked, int k) const {
        const auto& C = space_.clique(k);
        const Eigen::VectorXd dinv = prob_.congruence.segment(C.start - 1, C.size()).cwiseInverse();
        const Eigen::MatrixXd B = block(stacked, k);
        return affine_scale_ * dinv.asDiagonal() * (0.5 * (B + B.transpose())) * dinv.asDiagonal();
    }

    double max_block_norm(const Eigen::VectorXd& stacked) const {
        double m = 0.0;
        for (int k = 0; k < space_.p(); ++k) {
            m = std::max(m, stacked.segment(space_.offset(k), space_.block_size(k)).norm());
        }
        return m;
    }

    /// (D + J J^T)^{-1} r = D^{-1} r - D^{-1} J (I + J^T D^{-1} J)^{-1} J^T D^{-1} r.
    Eigen::VectorXd solve_reduced(const Eigen::VectorXd& r) const {
        Eigen::VectorXd y = dinv_.cwiseProduct(r);
        if (J_.cols() == 0) return y;
        const Eigen::VectorXd small = chol_.solve(J_.transpose() * y);
        y -= dinv_.cwiseProduct(J_ * small);
        return y;
    }

    void update_residuals(const Eigen::VectorXd& gamma_prev, const Eigen::VectorXd& z_prev) {
        double prim = (st_.gamma - st_.omega).norm();
        double dual = (st_.gamma - gamma_prev).norm();
        for (int k = 0; k < space_.p(); ++k) {
            const auto off = space_.offset(k);
            const auto len = space_.block_size(k);
            prim = std::max(prim, (st_.z.segment(off, len) - st_.v.segment(off, len)).norm());
            dual = std::max(dual, (st_.z.segment(off, len) - z_prev.segment(off, len)).norm());
        }
        st_.primal_residual = prim;
        st_.dual_residual = st_.rho * dual;
        st_.feasibility_residual = (J_ * st_.gamma + zaff_ - space_.scatter(st_.z)).norm();
        st_.primal_history.push_back(prim);
        st_.dual_history.push_back(st_.dual_residual);
    }

    ConicProblem prob_;
    VecSpace space_;
    SolveOptions opts_;
    SpMat J_;
    Eigen::VectorXd zaff_;
    Eigen::VectorXd scale_;
    Eigen::VectorXd cost_;
    Eigen::VectorXd dinv_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    double data_norm_ = 1.0;
    double affine_scale_ = 1.0;
    double max_overlap_ = 1.0;
    mutable long cert_iter_ = -1;
    mutable bool cert_ok_ = false;
    Eigen::VectorXd zaff_plain_;
    AdmmState st_;
};

// ---------------------------------------------------------------------------
// Reports

struct BoundReport {
    std::string method = "chordal";
    int tau = 0;
    double gamma_ell_star = 0.0;
    double lipschitz_bound = 0.0;
    bool certified = false;
    long iters = 0;
    bool converged = false;
    bool timed_out = false;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double wall_time_s = 0.0;
};

inline nlohmann::json to_json(const BoundReport& r) {
    return {{"method", r.method},
            {"tau", r.tau},
            {"gamma_ell", r.gamma_ell_star},
            {"lipschitz_bound", r.lipschitz_bound},
            {"certified", r.certified},
            {"iters", r.iters},
            {"converged", r.converged},
            {"primal_residual", r.primal_residual},
            {"dual_residual", r.dual_residual},
            {"wall_time_s", r.wall_time_s}};
}

struct SolveResult {
    BoundReport report;
    Eigen::VectorXd gamma;
    std::vector<Eigen::MatrixXd> z_blocks;
};

/// True when `cliques` is the single interval [1, N].
inline bool is_dense_clique_set(const CliqueSet& cliques) {
    return cliques.p() == 1 && cliques.cliques.front() == Interval{1, cliques.N};
}

/// Solves the clique-decomposed LipSDP. With cliques = {[1, N]} this is the
/// undecomposed problem.
inline SolveResult solve_detailed(const SdpProblem& prob, const CliqueSet& cliques, const SolveOptions& opts = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    ConicProblem conic = to_conic(prob);
    long probe_total = 0;
    for (int pass = 0; pass < opts.rescale_passes; ++pass) {
        SolveOptions probe_opts = opts;
        probe_opts.max_iters = opts.probe_iters;
        AdmmSolver probe(conic, cliques, probe_opts);
        const auto probe_outcome = probe.run();
        probe_total += probe.state().iter;
        if (probe_outcome.timed_out) break;
        conic.congruence = probe.equilibrated_congruence();
    }
    SolveOptions main_opts = opts;
    main_opts.max_iters = std::max<long>(1, opts.max_iters - probe_total);
    if (opts.time_budget_s > 0.0) {
        const double used = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        main_opts.time_budget_s = std::max(1e-9, opts.time_budget_s - used);
    }
    AdmmSolver solver(std::move(conic), cliques, main_opts);
    auto outcome = solver.run();
    outcome.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    SolveResult res;
    res.gamma = solver.gamma();
    res.z_blocks = solver.certificate_blocks();
    auto& r = res.report;
    r.method = is_dense_clique_set(cliques) ? "dense" : "chordal";
    r.tau = prob.tau();
    r.gamma_ell_star = res.gamma[prob.layout.ell_index()];
    r.lipschitz_bound = std::sqrt(std::max(r.gamma_ell_star, 0.0));
    r.converged = outcome.converged;
    r.timed_out = outcome.timed_out;
    r.certified = prob.tau() == 0 && outcome.converged;
    r.iters = probe_total + solver.state().iter;
    r.primal_residual = solver.state().primal_residual;
    r.dual_residual = solver.state().dual_residual;
    r.wall_time_s = outcome.wall_time_s;
    return res;
}

inline BoundReport solve(const SdpProblem& prob, const CliqueSet& cliques, const SolveOptions& opts = {}) {
    return solve_detailed(prob, cliques, opts).report;
}

// ---------------------------------------------------------------------------
// Solution checks

struct VerifyReport {
    double reconstruction_error = 0.0; ///< ||Z(gamma) - sum scatter(Z_k)||_inf
    double reconstruction_tol = 0.0;
    double max_block_eigenvalue = 0.0;
    double min_gamma = 0.0;
    double max_global_eigenvalue = 0.0; ///< lambda_max(Z(gamma))

    bool reconstruction_ok = false;
    bool blocks_nsd_ok = false;
    bool gamma_nonneg_ok = false;
    bool global_nsd_ok = false;

    bool all_ok() const { return reconstruction_ok && blocks_nsd_ok && gamma_nonneg_ok && global_nsd_ok; }
};

/// Independent checks of a candidate solution: reconstruction of Z(gamma)
/// from the clique blocks, block and global negative semidefiniteness, and
/// gamma >= 0.
inline VerifyReport verify_solution(const SdpProblem& prob, const CliqueSet& cliques, const Eigen::VectorXd& gamma,
                                    const std::vector<Eigen::MatrixXd>& z_blocks) {
    if (static_cast<int>(z_blocks.size()) != cliques.p()) {
        throw ShapeError("verify_solution: expected " + std::to_string(cliques.p()) + " blocks");
    }
    const Eigen::MatrixXd Z = to_dense(assemble_Z(prob, gamma));
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(prob.N(), prob.N());
    VerifyReport rep;
    rep.max_block_eigenvalue = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < cliques.p(); ++k) {
        const auto& C = cliques.cliques[k];
        sum += to_dense(clique_scatter(C, 0.5 * (z_blocks[k] + z_blocks[k].transpose()), prob.N()));
        rep.max_block_eigenvalue = std::max(rep.max_block_eigenvalue, max_eigenvalue(z_blocks[k]));
    }
    rep.reconstruction_error = (Z - sum).cwiseAbs().maxCoeff();
    rep.reconstruction_tol = 1e-6 * (1.0 + Z.cwiseAbs().maxCoeff());
    rep.min_gamma = gamma.size() ? gamma.minCoeff() : 0.0;
    rep.max_global_eigenvalue = max_eigenvalue(Z);

    rep.reconstruction_ok = rep.reconstruction_error <= rep.reconstruction_tol;
    rep.blocks_nsd_ok = rep.max_block_eigenvalue <= 1e-6;
    rep.gamma_nonneg_ok = rep.min_gamma >= -1e-12;
    rep.global_nsd_ok = rep.max_global_eigenvalue <= 1e-6;
    return rep;
}

inline nlohmann::json to_json(const VerifyReport& v) {
    return {{"reconstruction_error", v.reconstruction_error},
            {"reconstruction_ok", v.reconstruction_ok},
            {"max_block_eigenvalue", v.max_block_eigenvalue},
            {"blocks_nsd_ok", v.blocks_nsd_ok},
            {"min_gamma", v.min_gamma},
            {"gamma_nonneg_ok", v.gamma_nonneg_ok},
            {"max_global_eigenvalue", v.max_global_eigenvalue},
            {"global_nsd_ok", v.global_nsd_ok}};
}

} // namespace lipchord

#endif // LIPCHORD_ADMM_HPP
