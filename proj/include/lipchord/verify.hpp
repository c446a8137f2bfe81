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

#ifndef LIPCHORD_VERIFY_HPP
#define LIPCHORD_VERIFY_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lipchord/admm.hpp"
#include "lipchord/chordal.hpp"
#include "lipchord/error.hpp"
#include "lipchord/network.hpp"

namespace lipchord {

/// Empirical floor on the Lipschitz constant from difference quotients.
struct LowerBoundReport {
    double best_quotient = 0.0;
    Eigen::VectorXd best_x, best_y;
    /// Which sampler produced the best pair: "pairwise" or "local-perturbation".
    std::string best_mode = "pairwise";
    long samples = 0;
    long n_pairs = 0;
    long n_local = 0;
    double radius = 0.0;
    std::uint64_t seed = 0;
};

/// Max of ||f(x) - f(y)|| / ||x - y|| over `n_pairs` independent Gaussian
/// pairs and `n_local` perturbations y = x + radius * u with unit u.
///
/// The two samplers draw from separate streams derived from `seed`, so
/// raising either count only appends samples.
inline LowerBoundReport lower_bound_sampling(const Network& net, long n_pairs, long n_local, double radius,
                                             std::uint64_t seed) {
    if (net.activation.kind == ActivationKind::sector) {
        throw DomainError("lower_bound_sampling: needs a concrete activation (relu or tanh)");
    }
    if (n_pairs < 0 || n_local < 0) throw DomainError("lower_bound_sampling: sample counts must be nonnegative");
    if (n_local > 0 && !(radius > 0.0)) throw DomainError("lower_bound_sampling: radius must be positive");

    LowerBoundReport rep;
    rep.n_pairs = n_pairs;
    rep.n_local = n_local;
    rep.radius = radius;
    rep.seed = seed;
    const int n = net.input_dim();
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&](std::mt19937_64& rng) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = gauss(rng);
        return x;
    };
    auto consider = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y, const char* mode) {
        const double dist = (x - y).norm();
        if (dist == 0.0) return;
        ++rep.samples;
        const double q = (eval_forward(net, x) - eval_forward(net, y)).norm() / dist;
        if (q > rep.best_quotient) {
            rep.best_quotient = q;
            rep.best_x = x;
            rep.best_y = y;
            rep.best_mode = mode;
        }
    };

    std::seed_seq pair_seq{seed, std::uint64_t{0}};
    std::mt19937_64 pair_rng(pair_seq);
    for (long s = 0; s < n_pairs; ++s) {
        const Eigen::VectorXd x = draw(pair_rng);
        const Eigen::VectorXd y = draw(pair_rng);
        consider(x, y, "pairwise");
    }
    std::seed_seq local_seq{seed, std::uint64_t{1}};
    std::mt19937_64 local_rng(local_seq);
    for (long s = 0; s < n_local; ++s) {
        const Eigen::VectorXd x = draw(local_rng);
        Eigen::VectorXd u = draw(local_rng);
        const double un = u.norm();
        if (un == 0.0) continue;
        consider(x, x + (radius / un) * u, "local-perturbation");
    }
    return rep;
}

inline nlohmann::json to_json(const LowerBoundReport& r) {
    auto as_vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"best_quotient", r.best_quotient},
            {"best_pair", {{"x", as_vec(r.best_x)}, {"y", as_vec(r.best_y)}}},
            {"mode", r.best_mode},
            {"samples", r.samples},
            {"n_pairs", r.n_pairs},
            {"n_local", r.n_local},
            {"radius", r.radius},
            {"seed", r.seed},
            {"protocol", "random Gaussian pairs plus local perturbations"}};
}

/// Sparsity pattern covered by a set of clique intervals.
inline EdgeSet clique_pattern(const CliqueSet& cliques) {
    EdgeSet E(cliques.N);
    for (const auto& C : cliques.cliques) E.add_block(C.start, C.end);
    return E;
}

struct Lemma1Report {
    /// Sum of scattered NSD blocks: largest eigenvalue and pattern check.
    double easy_max_eigenvalue = 0.0;
    bool easy_support_ok = false;
    bool easy_ok = false;
    /// Decomposition of an NSD matrix supported on the pattern.
    double target_max_eigenvalue = 0.0;
    double reconstruction_residual = 0.0;
    double max_block_eigenvalue = 0.0;
    long iters = 0;
    bool converged = false;
    bool hard_ok = false;

    bool passed() const { return easy_ok && hard_ok; }
};

/// Decomposes the NSD matrix X (supported on the clique pattern) into
/// clique blocks by running the solver with no decision variables.
inline AdmmSolver decompose_nsd(const Eigen::MatrixXd& X, const CliqueSet& cliques, SolveOptions opts = {}) {
    ConicProblem prob;
    prob.N = cliques.N;
    const Eigen::MatrixXd upper = X.triangularView<Eigen::Upper>();
    prob.z_aff = upper.sparseView();
    prob.objective.resize(0);
    opts.feasibility_margin = 0.0;
    AdmmSolver solver(std::move(prob), cliques, opts);
    solver.run();
    return solver;
}

/// Both directions of the clique decomposition theorem on random data.
///
/// Easy direction: a sum of scattered random NSD blocks is NSD and lies in
/// the pattern. Hard direction: a random NSD matrix in the pattern (scattered
/// negative definite blocks plus a pattern-supported perturbation small
/// enough to keep it negative definite) is split back into NSD clique blocks
/// by the solver.
inline Lemma1Report lemma1_roundtrip(const CliqueSet& cliques, std::uint64_t seed, SolveOptions opts = {}) {
    const int N = cliques.N;
    if (N > 60) throw DomainError("lemma1_roundtrip: limited to N <= 60");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto random_matrix = [&](int r, int c) {
        Eigen::MatrixXd M(r, c);
        for (int j = 0; j < c; ++j) {
            for (int i = 0; i < r; ++i) M(i, j) = gauss(rng);
        }
        return M;
    };
    const EdgeSet pattern = clique_pattern(cliques);
    Lemma1Report rep;

    // Easy direction.
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(N, N);
    for (const auto& C : cliques.cliques) {
        const Eigen::MatrixXd G = random_matrix(C.size(), C.size());
        sum += to_dense(clique_scatter(C, -G * G.transpose(), N));
    }
    rep.easy_max_eigenvalue = max_eigenvalue(sum);
    rep.easy_support_ok = true;
    for (int j = 0; j < N; ++j) {
        for (int i = 0; i < N; ++i) {
            if (sum(i, j) != 0.0 && !pattern.contains(i + 1, j + 1)) rep.easy_support_ok = false;
        }
    }
    rep.easy_ok = rep.easy_support_ok && rep.easy_max_eigenvalue <= 1e-9 * (1.0 + sum.cwiseAbs().maxCoeff());

    // Hard direction.
    Eigen::MatrixXd base = Eigen::MatrixXd::Zero(N, N);
    for (const auto& C : cliques.cliques) {
        const Eigen::MatrixXd G = random_matrix(C.size(), C.size());
        const Eigen::MatrixXd block = -(G * G.transpose()) - Eigen::MatrixXd::Identity(C.size(), C.size());
        base += to_dense(clique_scatter(C, block, N));
    }
    Eigen::MatrixXd pert = random_matrix(N, N);
    pert = (0.5 * (pert + pert.transpose())).eval();
    for (int j = 0; j < N; ++j) {
        for (int i = 0; i < N; ++i) {
            if (!pattern.contains(i + 1, j + 1)) pert(i, j) = 0.0;
        }
    }
    const double headroom = -max_eigenvalue(base);
    const double pnorm = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pert, Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .cwiseAbs()
                             .maxCoeff();
    const Eigen::MatrixXd X = base + (pnorm > 0.0 ? 0.5 * headroom / pnorm : 0.0) * pert;
    rep.target_max_eigenvalue = max_eigenvalue(X);
    if (rep.target_max_eigenvalue > 0.0) return rep;

    opts.eps_abs = std::min(opts.eps_abs, 1e-10);
    opts.eps_rel = std::min(opts.eps_rel, 1e-9);
    const AdmmSolver solver = decompose_nsd(X, cliques, opts);
    rep.iters = solver.state().iter;
    rep.converged = solver.converged();
    Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(N, N);
    rep.max_block_eigenvalue = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < cliques.p(); ++k) {
        const Eigen::MatrixXd Zk = solver.z_block(k);
        rebuilt += to_dense(clique_scatter(cliques.cliques[k], Zk, N));
        rep.max_block_eigenvalue = std::max(rep.max_block_eigenvalue, max_eigenvalue(Zk));
    }
    rep.reconstruction_residual = (X - rebuilt).cwiseAbs().maxCoeff();
    rep.hard_ok = rep.converged && rep.reconstruction_residual <= 1e-6 && rep.max_block_eigenvalue <= 1e-9;
    return rep;
}

} // namespace lipchord

#endif // LIPCHORD_VERIFY_HPP
