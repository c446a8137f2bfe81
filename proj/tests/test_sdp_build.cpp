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

#include <gtest/gtest.h>

#include <random>

#include "lipchord/chordal.hpp"
#include "lipchord/sdp_build.hpp"
#include "oracles.hpp"

using namespace lipchord;

namespace {

Eigen::VectorXd random_gamma(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0);
    Eigen::VectorXd g(d);
    for (int i = 0; i < d; ++i) g[i] = u(rng);
    return g;
}

} // namespace

TEST(Dims, FigureOneProfile) {
    const DimsProfile dims({3, 3, 3, 3, 3, 2});
    EXPECT_EQ(dims.depth(), 5);
    for (int k = 0; k <= 5; ++k) EXPECT_EQ(dims.S(k), 3 * k);
    EXPECT_EQ(dims.N(), 15);
    EXPECT_EQ(dims.N_f(), 12);
    EXPECT_EQ(dims.block_of(7), 3);
    for (int i = 1; i <= dims.N(); ++i) {
        const int k = dims.block_of(i);
        EXPECT_LT(dims.S(k - 1), i);
        EXPECT_LE(i, dims.S(k));
    }
}

TEST(Dims, TwoLayer) {
    const DimsProfile dims({2, 4, 1});
    EXPECT_EQ(dims.N(), 6);
    EXPECT_EQ(dims.N_f(), 4);
    EXPECT_THROW(DimsProfile({2, 1}), ShapeError);
}

TEST(TauIndexSet, Examples) {
    EXPECT_TRUE(tau_index_set(4, 0).pairs.empty());
    const std::vector<std::pair<int, int>> two{{1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}};
    EXPECT_EQ(tau_index_set(4, 2).pairs, two);
    EXPECT_EQ(tau_index_set(4, 3).pairs.size(), 6U);
    EXPECT_EQ(tau_index_set(4, 50).tau, 3);
    EXPECT_THROW(tau_index_set(4, -1), DomainError);
}

TEST(TauIndexSet, MatchesEnumerationAndCount) {
    for (int n_f = 1; n_f <= 12; ++n_f) {
        for (int tau = 0; tau < n_f; ++tau) {
            const auto set = tau_index_set(n_f, tau);
            EXPECT_EQ(set.pairs, oracle::tau_pairs(n_f, tau));
            EXPECT_EQ(static_cast<int>(set.pairs.size()), tau * n_f - tau * (tau + 1) / 2);
        }
    }
}

TEST(BuildT, Examples) {
    EXPECT_TRUE(to_dense(build_T(make_layout(5, 0), Eigen::VectorXd::Ones(5))).isIdentity(0.0));

    Eigen::Matrix2d expect;
    expect << 1, -1, -1, 1;
    EXPECT_EQ(to_dense(build_T(make_layout(2, 1), Eigen::Vector3d(0, 0, 1))), expect);

    const auto layout = make_layout(3, 2);
    const Eigen::VectorXd g = Eigen::VectorXd::Ones(layout.num_alpha());
    EXPECT_LE((to_dense(build_T(layout, g)) - oracle::dense_T(3, oracle::tau_pairs(3, 2), g)).cwiseAbs().maxCoeff(),
              0.0);
    EXPECT_THROW(build_T(layout, -g), DomainError);
    EXPECT_THROW(build_T(layout, Eigen::VectorXd::Ones(2)), ShapeError);
}

TEST(BuildT, PsdBandedDiagonallyDominant) {
    std::mt19937_64 rng(1);
    for (int tau = 0; tau <= 4; ++tau) {
        const auto layout = make_layout(9, tau);
        const Eigen::MatrixXd T = to_dense(build_T(layout, random_gamma(layout.num_alpha(), rng)));
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T).eigenvalues().minCoeff(), -1e-12);
        for (int i = 0; i < 9; ++i) {
            EXPECT_GE(T(i, i), T.row(i).cwiseAbs().sum() - std::abs(T(i, i)) - 1e-12);
            for (int j = 0; j < 9; ++j) {
                if (std::abs(i - j) > tau) {
                    EXPECT_EQ(T(i, j), 0.0);
                }
            }
        }
    }
}

TEST(BuildProblem, LayoutAndSpecialMatrices) {
    const Network net = oracle::generic_network({3, 3, 3, 3, 3, 2}, 5);
    const SdpProblem prob = build_problem(net, 2);
    EXPECT_EQ(prob.d(), 12 * 3 - 3 + 1);
    EXPECT_EQ(prob.layout.ell_index(), prob.d() - 1);

    Eigen::MatrixXd ell = Eigen::MatrixXd::Zero(15, 15);
    ell.topLeftCorner(3, 3) = -Eigen::Matrix3d::Identity();
    EXPECT_EQ(to_dense(prob.basis.back()), ell);

    Eigen::MatrixXd zaff = Eigen::MatrixXd::Zero(15, 15);
    zaff.bottomRightCorner(3, 3) = net.weights[4].transpose() * net.weights[4];
    EXPECT_LE((to_dense(prob.z_aff) - zaff).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((to_dense(assemble_Z(prob, Eigen::VectorXd::Zero(prob.d()))) - zaff).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BuildProblem, MatchesDenseFormulaOracle) {
    std::mt19937_64 rng(2);
    const std::vector<std::vector<int>> profiles{{3, 3, 3, 3, 3, 2}, {2, 4, 3, 5, 2, 3}, {2, 3, 1}};
    for (const auto& sizes : profiles) {
        for (auto act : {ActivationSpec::relu(), ActivationSpec::sector(-0.3, 0.8)}) {
            const Network net = oracle::generic_network(sizes, 7, act);
            for (int tau : {0, 1, 3}) {
                const SdpProblem prob = build_problem(net, tau);
                for (int t = 0; t < 3; ++t) {
                    const Eigen::VectorXd g = random_gamma(prob.d(), rng);
                    const Eigen::MatrixXd got = to_dense(assemble_Z(prob, g));
                    const Eigen::MatrixXd want = oracle::dense_Z(net, tau, g);
                    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + want.cwiseAbs().maxCoeff()));
                }
            }
        }
    }
}

TEST(BuildProblem, UnitGammaIsBasisColumn) {
    const Network net = oracle::generic_network({2, 4, 3, 2}, 3);
    const SdpProblem prob = build_problem(net, 1);
    for (int i = 0; i < prob.d(); ++i) {
        const Eigen::MatrixXd got = to_dense(assemble_Z(prob, Eigen::VectorXd::Unit(prob.d(), i)));
        EXPECT_LE((got - to_dense(prob.z_aff) - to_dense(prob.basis[i])).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(BuildProblem, ReluBlockMultiplier) {
    // For relu the A^T T A term vanishes: Z_i = A^T T_i B + B^T T_i A - 2 B^T T_i B.
    const Network net = oracle::generic_network({2, 3, 3, 2}, 4);
    const SdpProblem prob = build_problem(net, 0);
    const Eigen::MatrixXd Z1 = to_dense(prob.basis[0]);
    const Eigen::MatrixXd& W1 = net.weights[0];
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(8, 8);
    for (int c = 0; c < 2; ++c) {
        expect(c, 2) += W1(0, c);
        expect(2, c) += W1(0, c);
    }
    expect(2, 2) -= 2.0;
    EXPECT_LE((Z1 - expect).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BuildProblem, Linearity) {
    std::mt19937_64 rng(8);
    const Network net = oracle::generic_network({2, 5, 4, 3, 2}, 9);
    const SdpProblem prob = build_problem(net, 2);
    for (int t = 0; t < 10; ++t) {
        const Eigen::VectorXd a = random_gamma(prob.d(), rng), b = random_gamma(prob.d(), rng);
        const Eigen::MatrixXd lhs = to_dense(assemble_Z(prob, a)) + to_dense(assemble_Z(prob, b)) - to_dense(prob.z_aff);
        EXPECT_LE((lhs - to_dense(assemble_Z(prob, a + b))).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(BuildProblem, BiasInvariance) {
    Network a = oracle::generic_network({2, 4, 4, 2}, 10);
    Network b = a;
    for (auto& v : b.biases) v.setConstant(0.7);
    const SdpProblem pa = build_problem(a, 1), pb = build_problem(b, 1);
    ASSERT_EQ(pa.d(), pb.d());
    EXPECT_EQ(to_dense(pa.z_aff), to_dense(pb.z_aff));
    for (int i = 0; i < pa.d(); ++i) EXPECT_EQ(to_dense(pa.basis[i]), to_dense(pb.basis[i]));
}

TEST(BuildProblem, SupportInsidePredictedPattern) {
    std::mt19937_64 rng(12);
    const std::vector<int> sizes{3, 3, 3, 3, 3, 2};
    const Network net = oracle::generic_network(sizes, 13);
    for (int tau : {0, 2, 4}) {
        const SdpProblem prob = build_problem(net, tau);
        const EdgeSet E = predicted_edge_set(prob.dims, tau);
        for (int t = 0; t < 1000; ++t) {
            const SymSparse Z = assemble_Z(prob, random_gamma(prob.d(), rng));
            for (int c = 0; c < Z.outerSize(); ++c) {
                for (SymSparse::InnerIterator it(Z, c); it; ++it) {
                    if (it.value() != 0.0) {
                        ASSERT_TRUE(E.contains(static_cast<int>(it.row()) + 1, c + 1));
                    }
                }
            }
        }
    }
}

TEST(BuildProblem, SectorConstraintHoldsForRelu) {
    // Eq. (2): [u-v; phi(u)-phi(v)]^T [[0, T], [T, -2T]] [u-v; phi(u)-phi(v)] >= 0 for diagonal T >= 0.
    std::mt19937_64 rng(14);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u01(0.0, 3.0);
    const int n = 6;
    for (int t = 0; t < 1000; ++t) {
        Eigen::VectorXd u(n), v(n), diag(n);
        for (int i = 0; i < n; ++i) {
            u[i] = g(rng);
            v[i] = g(rng);
            diag[i] = u01(rng);
        }
        const Eigen::MatrixXd T = to_dense(build_T(make_layout(n, 0), diag));
        const Eigen::VectorXd du = u - v;
        const Eigen::VectorXd dp = u.cwiseMax(0.0) - v.cwiseMax(0.0);
        const double q = 2.0 * du.dot(T * dp) - 2.0 * dp.dot(T * dp);
        EXPECT_GE(q, -1e-9);
    }
}

TEST(BuildProblem, Errors) {
    const Network net = oracle::generic_network({2, 3, 2}, 1);
    EXPECT_THROW(build_problem(net, -1), DomainError);
    const SdpProblem prob = build_problem(net, 0);
    EXPECT_THROW(assemble_Z(prob, Eigen::VectorXd::Zero(prob.d() + 1)), ShapeError);
    const SdpProblem clamped = build_problem(net, 10);
    EXPECT_TRUE(clamped.tau_clamped());
    EXPECT_EQ(clamped.tau(), 2);
}

TEST(BuildProblem, GreedyPointIsFeasible) {
    for (int tau : {0, 2}) {
        for (unsigned seed : {1u, 2u, 3u}) {
            const Network net = random_network(6, 6, seed);
            const SdpProblem prob = build_problem(net, tau);
            ASSERT_EQ(prob.greedy_gamma.size(), prob.d());
            ASSERT_EQ(prob.greedy_diag.size(), prob.N());
            EXPECT_GE(prob.greedy_gamma.minCoeff(), 0.0);
            // band multipliers stay at zero
            for (int i = prob.layout.n_f; i < prob.layout.ell_index(); ++i) EXPECT_EQ(prob.greedy_gamma[i], 0.0);
            const Eigen::MatrixXd Z = to_dense(assemble_Z(prob, prob.greedy_gamma));
            EXPECT_LT((prob.greedy_diag - Z.diagonal()).cwiseAbs().maxCoeff(), 1e-12 * Z.cwiseAbs().maxCoeff());
            // Z(g) <= 0 up to roundoff, checked under the same diagonal scaling the solver uses
            const Eigen::VectorXd s = Z.diagonal().cwiseAbs().cwiseSqrt().cwiseInverse();
            const Eigen::MatrixXd Zs = s.asDiagonal() * Z * s.asDiagonal();
            const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Zs).eigenvalues().maxCoeff();
            EXPECT_LE(top, 1e-9) << "tau " << tau << " seed " << seed;
        }
    }
}

TEST(BuildProblem, GreedyPointForSlopeRestrictedSector) {
    Network net = oracle::generic_network({3, 4, 4, 2}, 5);
    net.activation = ActivationSpec::sector(0.1, 0.9);
    const SdpProblem prob = build_problem(net, 0);
    ASSERT_EQ(prob.greedy_gamma.size(), prob.d());
    const Eigen::MatrixXd Z = to_dense(assemble_Z(prob, prob.greedy_gamma));
    EXPECT_LE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Z).eigenvalues().maxCoeff(),
              1e-9 * Z.cwiseAbs().maxCoeff());
}
