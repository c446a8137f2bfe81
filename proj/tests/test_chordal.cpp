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
#include <set>
#include <sstream>

#include "lipchord/chordal.hpp"
#include "lipchord/sdp_build.hpp"
#include "oracles.hpp"

using namespace lipchord;

namespace {

const std::vector<std::vector<int>> kProfiles{{3, 3, 3, 3, 3, 2}, {2, 4, 3, 5, 2, 3}, {10, 10, 10, 4}};

std::vector<std::vector<int>> as_lists(const CliqueSet& cs) {
    std::vector<std::vector<int>> out;
    for (const auto& c : cs.cliques) {
        std::vector<int> v;
        for (int i = c.start; i <= c.end; ++i) v.push_back(i);
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

EdgeSet from_pairs(int n, std::initializer_list<std::pair<int, int>> pairs) {
    EdgeSet E(n);
    for (auto [i, j] : pairs) E.add(i, j);
    return E;
}

} // namespace

TEST(EdgeSet, Basics) {
    EdgeSet E(4);
    E.add(3, 1);
    EXPECT_TRUE(E.contains(1, 3));
    EXPECT_TRUE(E.contains(3, 1));
    EXPECT_TRUE(E.contains(2, 2));
    EXPECT_FALSE(E.contains(1, 2));
    EXPECT_EQ(E.num_edges(), 1U);
    EXPECT_THROW(E.add(0, 1), DomainError);
    EXPECT_THROW(E.add(1, 5), DomainError);
}

TEST(PredictedEdgeSet, FigureOneBlocks) {
    const DimsProfile dims({3, 3, 3, 3, 3, 2});
    const EdgeSet E0 = predicted_edge_set(dims, 0);
    EdgeSet expect(15);
    for (int a : {1, 4, 7, 10}) expect.add_block(a, a + 5);
    EXPECT_TRUE(E0 == expect);

    const EdgeSet E2 = predicted_edge_set(dims, 2);
    EdgeSet expect2(15);
    for (int a : {1, 4, 7, 10}) expect2.add_block(a, std::min(a + 7, 15));
    EXPECT_TRUE(E2 == expect2);
}

TEST(PredictedEdgeSet, TwoLayerIsDense) {
    const DimsProfile dims({2, 4, 3});
    EdgeSet full(6);
    full.add_block(1, 6);
    EXPECT_TRUE(predicted_edge_set(dims, 0) == full);
}

TEST(PredictedEdgeSet, MatchesTwoLoopEnumeration) {
    for (const auto& sizes : kProfiles) {
        for (int tau = 0; tau <= 6; ++tau) {
            const auto P = oracle::theorem1_pattern(sizes, tau);
            const EdgeSet E = predicted_edge_set(DimsProfile(sizes), tau);
            for (int i = 1; i <= E.n(); ++i) {
                for (int j = 1; j <= E.n(); ++j) EXPECT_EQ(E.contains(i, j), i == j || P[i - 1][j - 1]);
            }
        }
    }
}

TEST(OracleEdgeSet, EqualsPredictedForGenericWeights) {
    for (const auto& sizes : kProfiles) {
        const Network net = oracle::generic_network(sizes, 31);
        for (int tau = 0; tau <= 6; ++tau) {
            const SdpProblem prob = build_problem(net, tau);
            const EdgeSet O = oracle_edge_set(prob);
            const EdgeSet P = predicted_edge_set(prob.dims, tau);
            EXPECT_TRUE(O.subset_of(P));
            EXPECT_TRUE(O == P) << "tau " << tau;
        }
    }
}

TEST(OracleEdgeSet, EllBasisSupport) {
    const Network net = oracle::generic_network({3, 3, 3, 2}, 1);
    SdpProblem prob = build_problem(net, 0);
    prob.z_aff.setZero();
    const SymSparse ell = prob.basis.back();
    prob.basis = {ell};
    const EdgeSet O = oracle_edge_set(prob);
    EdgeSet expect(9);
    expect.add_block(1, 3);
    // Only the diagonal is stored for -E1^T E1.
    EXPECT_EQ(O.num_edges(), 0U);
    EXPECT_TRUE(O.subset_of(expect));
}

TEST(MaximalCliques, Examples) {
    const DimsProfile dims({3, 3, 3, 3, 3, 2});
    const CliqueSet c0 = maximal_cliques(dims, 0);
    EXPECT_EQ(c0.p(), 4);
    const std::vector<Interval> e0{{1, 6}, {4, 9}, {7, 12}, {10, 15}};
    EXPECT_EQ(c0.cliques, e0);

    const CliqueSet c4 = maximal_cliques(dims, 4);
    const std::vector<Interval> e4{{1, 10}, {4, 13}, {7, 15}};
    EXPECT_EQ(c4.cliques, e4);

    const CliqueSet big = maximal_cliques(dims, 100);
    ASSERT_EQ(big.p(), 1);
    EXPECT_EQ(big.cliques[0], (Interval{1, 15}));
}

TEST(MaximalCliques, MatchBronKerboschAndChordal) {
    for (const auto& sizes : kProfiles) {
        const DimsProfile dims(sizes);
        int prev_p = 1 << 30;
        for (int tau = 0; tau <= 6; ++tau) {
            const EdgeSet E = predicted_edge_set(dims, tau);
            const CliqueSet cs = maximal_cliques(dims, tau);
            EXPECT_EQ(as_lists(cs), bron_kerbosch(E));
            EXPECT_TRUE(check_chordal(E).chordal);
            EXPECT_LE(cs.p(), prev_p);
            prev_p = cs.p();

            // Chain property and coverage.
            EXPECT_EQ(cs.cliques.front().start, 1);
            EXPECT_EQ(cs.cliques.back().end, dims.N());
            for (int k = 0; k + 1 < cs.p(); ++k) {
                EXPECT_LT(cs.cliques[k].start, cs.cliques[k + 1].start);
                EXPECT_GE(cs.cliques[k].end, cs.cliques[k + 1].start);
            }
        }
    }
}

TEST(MaximalCliques, BottleneckDeduplicated) {
    // A width-1 layer makes some formula intervals nested.
    for (const std::vector<int>& sizes : {std::vector<int>{6, 1, 6, 1, 2}, std::vector<int>{1, 8, 1, 1, 8, 2}}) {
        const DimsProfile dims(sizes);
        for (int tau = 0; tau <= 4; ++tau) {
            EXPECT_EQ(as_lists(maximal_cliques(dims, tau)), bron_kerbosch(predicted_edge_set(dims, tau)));
        }
    }
}

TEST(BronKerbosch, SmallGraphs) {
    const std::vector<std::vector<int>> tri{{1, 2, 3}};
    EXPECT_EQ(bron_kerbosch(from_pairs(3, {{1, 2}, {2, 3}, {1, 3}})), tri);
    const std::vector<std::vector<int>> path{{1, 2}, {2, 3}};
    EXPECT_EQ(bron_kerbosch(from_pairs(3, {{1, 2}, {2, 3}})), path);
    const std::vector<std::vector<int>> isolated{{1}, {2}};
    EXPECT_EQ(bron_kerbosch(EdgeSet(2)), isolated);
    EXPECT_THROW(bron_kerbosch(EdgeSet(300)), DomainError);
}

TEST(CheckChordal, Examples) {
    EXPECT_FALSE(check_chordal(from_pairs(4, {{1, 2}, {2, 3}, {3, 4}, {4, 1}})).chordal);
    EXPECT_TRUE(check_chordal(from_pairs(4, {{1, 2}, {2, 3}, {3, 4}, {4, 1}, {1, 3}})).chordal);
    EdgeSet K6(6);
    K6.add_block(1, 6);
    const auto r = check_chordal(K6);
    EXPECT_TRUE(r.chordal);
    EXPECT_EQ(r.elimination_order.size(), 6U);
}

TEST(CliqueScatter, RoundTripAndIdentity) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(4, 4);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
    X = 0.5 * (X + X.transpose()).eval();

    EXPECT_EQ(to_dense(clique_scatter({1, 4}, X, 4)), X);
    const Eigen::MatrixXd big = to_dense(clique_scatter({3, 6}, X, 8));
    EXPECT_EQ(clique_gather({3, 6}, big), X);
    const Eigen::MatrixXd E = oracle::selector(3, 6, 8);
    EXPECT_LE((big - E.transpose() * X * E).cwiseAbs().maxCoeff(), 0.0);

    EXPECT_THROW(clique_scatter({0, 3}, X, 8), DomainError);
    EXPECT_THROW(clique_scatter({6, 9}, X, 8), DomainError);
    EXPECT_THROW(clique_scatter({1, 3}, X, 8), ShapeError);
}

TEST(CliqueScatter, SumOfNsdBlocksIsNsdInPattern) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    const DimsProfile dims({3, 3, 3, 3, 3, 2});
    for (int tau : {0, 2}) {
        const CliqueSet cs = maximal_cliques(dims, tau);
        const EdgeSet E = predicted_edge_set(dims, tau);
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(15, 15);
        for (const auto& C : cs.cliques) {
            Eigen::MatrixXd G(C.size(), C.size());
            for (Eigen::Index i = 0; i < G.size(); ++i) G.data()[i] = g(rng);
            sum += to_dense(clique_scatter(C, -G * G.transpose(), 15));
        }
        EXPECT_LE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sum).eigenvalues().maxCoeff(), 1e-9);
        for (int i = 0; i < 15; ++i) {
            for (int j = 0; j < 15; ++j) {
                if (sum(i, j) != 0.0) {
                    EXPECT_TRUE(E.contains(i + 1, j + 1));
                }
            }
        }
    }
}

TEST(Export, PbmAndCsv) {
    const EdgeSet E = from_pairs(3, {{1, 2}});
    EXPECT_EQ(to_pbm(E), "P1\n3 3\n1 1 0\n1 1 0\n0 0 1\n");
    std::istringstream csv(to_csv(E));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "i,j");
    std::set<std::string> rows;
    while (std::getline(csv, line)) rows.insert(line);
    EXPECT_EQ(rows, (std::set<std::string>{"1,1", "1,2", "2,1", "2,2", "3,3"}));
}
