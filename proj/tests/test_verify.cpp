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

#include "lipchord/verify.hpp"

using namespace lipchord;

namespace {

Network identity_net() {
    Network net;
    net.layer_sizes = {2, 2, 2};
    net.weights = {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
    net.biases = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
    return net;
}

} // namespace

TEST(LowerBound, IdentityIsOneOnPositiveInputs) {
    // The identity chain is 1-Lipschitz and attains slope 1 on the positive orthant.
    const LowerBoundReport r = lower_bound_sampling(identity_net(), 2000, 2000, 1e-4, 1);
    EXPECT_NEAR(r.best_quotient, 1.0, 1e-9);
    EXPECT_LE(r.best_quotient, 1.0 + 1e-9);
    EXPECT_EQ(r.samples, 4000);
}

TEST(LowerBound, ScalarChainApproachesSlope) {
    Network net;
    net.layer_sizes = {1, 1, 1};
    net.weights = {Eigen::MatrixXd::Constant(1, 1, 2.5), Eigen::MatrixXd::Identity(1, 1)};
    net.biases = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    const LowerBoundReport r = lower_bound_sampling(net, 0, 500, 1e-6, 4);
    EXPECT_NEAR(r.best_quotient, 2.5, 1e-9);
    EXPECT_EQ(r.best_mode, "local-perturbation");
}

TEST(LowerBound, BelowNaiveAndMonotoneInSamples) {
    for (auto act : {ActivationSpec::relu(), ActivationSpec::tanh()}) {
        const Network net = random_network(8, 4, 10, act);
        const LowerBoundReport small = lower_bound_sampling(net, 100, 100, 1e-4, 3);
        const LowerBoundReport large = lower_bound_sampling(net, 2000, 2000, 1e-4, 3);
        EXPECT_LE(large.best_quotient, naive_lip(net));
        EXPECT_GE(large.best_quotient, small.best_quotient);
        EXPECT_GE(small.best_quotient, 0.0);

        const LowerBoundReport again = lower_bound_sampling(net, 2000, 2000, 1e-4, 3);
        EXPECT_EQ(again.best_quotient, large.best_quotient);
        EXPECT_EQ(again.best_x, large.best_x);
        const double q = (eval_forward(net, large.best_x) - eval_forward(net, large.best_y)).norm()
                         / (large.best_x - large.best_y).norm();
        EXPECT_EQ(q, large.best_quotient);
    }
}

TEST(LowerBound, Errors) {
    Network net = identity_net();
    net.activation = ActivationSpec::sector(0.0, 1.0);
    EXPECT_THROW(lower_bound_sampling(net, 10, 10, 1e-4, 0), DomainError);
    EXPECT_THROW(lower_bound_sampling(identity_net(), 10, 10, 0.0, 0), DomainError);
    EXPECT_THROW(lower_bound_sampling(identity_net(), -1, 10, 1e-4, 0), DomainError);
}

TEST(LowerBound, Json) {
    const auto j = to_json(lower_bound_sampling(identity_net(), 10, 10, 1e-4, 7));
    EXPECT_EQ(j["seed"], 7);
    EXPECT_EQ(j["samples"], 20);
    EXPECT_TRUE(j.contains("best_pair"));
    EXPECT_TRUE(j.contains("mode"));
}

TEST(Lemma1, SingleCliqueIsTheMatrixItself) {
    const CliqueSet cs = CliqueSet::dense(6);
    const Lemma1Report r = lemma1_roundtrip(cs, 1);
    EXPECT_TRUE(r.passed());
    EXPECT_LE(r.reconstruction_residual, 1e-8);
}

TEST(Lemma1, HandCheckableThreeByThree) {
    const CliqueSet cs{3, {{1, 2}, {2, 3}}};
    const Lemma1Report r = lemma1_roundtrip(cs, 2);
    EXPECT_TRUE(r.easy_ok);
    EXPECT_TRUE(r.hard_ok) << r.reconstruction_residual << " " << r.max_block_eigenvalue;

    // Block-diagonal NSD matrix: the split must reproduce it exactly.
    Eigen::Matrix3d X;
    X << -2, 1, 0, 1, -3, 1, 0, 1, -2;
    SolveOptions o;
    o.eps_abs = 1e-11;
    o.eps_rel = 1e-10;
    const AdmmSolver s = decompose_nsd(X, cs, o);
    Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
    sum.topLeftCorner(2, 2) += s.z_block(0);
    sum.bottomRightCorner(2, 2) += s.z_block(1);
    EXPECT_LE((sum - X).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(max_eigenvalue(s.z_block(0)), 1e-9);
    EXPECT_LE(max_eigenvalue(s.z_block(1)), 1e-9);
}

TEST(Lemma1, TheoremTwoCliques) {
    const DimsProfile dims({3, 3, 3, 3, 3, 2});
    for (int tau : {0, 2}) {
        const Lemma1Report r = lemma1_roundtrip(maximal_cliques(dims, tau), 5 + tau);
        EXPECT_TRUE(r.passed()) << "tau " << tau << " resid " << r.reconstruction_residual;
    }
}

TEST(Lemma1, SizeGuard) { EXPECT_THROW(lemma1_roundtrip(CliqueSet::dense(61), 0), DomainError); }
