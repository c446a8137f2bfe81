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

#include <iostream>

#include <CLI11.hpp>

#include "lipchord/cli.hpp"

namespace {

void add_solver_flags(CLI::App* cmd, lipchord::cli::SolverFlags& s) {
    cmd->add_option("--rho", s.rho, "Initial ADMM penalty")->check(CLI::PositiveNumber);
    cmd->add_option("--eps-abs", s.eps_abs, "Absolute stopping tolerance")->check(CLI::NonNegativeNumber);
    cmd->add_option("--eps-rel", s.eps_rel, "Relative stopping tolerance")->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-iters", s.max_iters, "Iteration cap")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    using namespace lipchord::cli;

    CLI::App app{"Lipschitz upper bounds for feedforward networks via chordally sparse SDPs"};
    app.require_subcommand(1);

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "Compute a Lipschitz upper bound");
    c_est->add_option("--net", est.net_path, "Network JSON")->required();
    c_est->add_option("--tau", est.tau, "Multiplier bandwidth (0 gives a certified bound)");
    c_est->add_option("--method", est.method, "chordal, dense or naive")
        ->check(CLI::IsMember({"chordal", "dense", "naive"}));
    add_solver_flags(c_est, est.solver);
    c_est->add_flag("--scale-weights", est.scale_weights, "Normalize weights to unit spectral norm (relu, zero biases)");
    c_est->add_option("--out", est.out_path, "Write the report as JSON");

    CliquesArgs cq;
    auto* c_cq = app.add_subcommand("cliques", "List the maximal cliques of the sparsity graph");
    c_cq->add_option("--net", cq.net_path, "Network JSON")->required();
    c_cq->add_option("--tau", cq.tau, "Multiplier bandwidth")->check(CLI::NonNegativeNumber);
    c_cq->add_option("--format", cq.format, "text or json")->check(CLI::IsMember({"text", "json"}));

    SparsityArgs sp;
    auto* c_sp = app.add_subcommand("sparsity", "Emit the predicted sparsity pattern");
    c_sp->add_option("--net", sp.net_path, "Network JSON")->required();
    c_sp->add_option("--tau", sp.tau, "Multiplier bandwidth")->check(CLI::NonNegativeNumber);
    c_sp->add_option("--format", sp.format, "pbm or csv")->check(CLI::IsMember({"pbm", "csv"}));
    c_sp->add_option("--out", sp.out_path, "Output file (default stdout)");
    c_sp->add_flag("--oracle", sp.oracle, "Cross-check against the assembled problem's support");

    RandomNetArgs rn;
    auto* c_rn = app.add_subcommand("random-net", "Generate a seeded random relu network");
    c_rn->add_option("--width", rn.width, "Hidden width")->check(CLI::PositiveNumber);
    c_rn->add_option("--depth", rn.depth, "Number of affine layers")->check(CLI::Range(2, 1 << 20));
    c_rn->add_option("--seed", rn.seed, "RNG seed");
    c_rn->add_option("--out", rn.out_path, "Output file (default stdout)");

    VerifyArgs vf;
    auto* c_vf = app.add_subcommand("verify", "Solve and independently check the certificate");
    c_vf->add_option("--net", vf.net_path, "Network JSON")->required();
    c_vf->add_option("--tau", vf.tau, "Multiplier bandwidth");
    add_solver_flags(c_vf, vf.solver);
    c_vf->add_option("--pairs", vf.pairs, "Random input pairs for the sampled lower bound");
    c_vf->add_option("--local", vf.local, "Local perturbations for the sampled lower bound");
    c_vf->add_option("--radius", vf.radius, "Local perturbation radius")->check(CLI::PositiveNumber);
    c_vf->add_option("--seed", vf.seed, "Sampling seed");
    c_vf->add_option("--out", vf.out_path, "Write all reports as JSON");

    BenchArgs bn;
    auto* c_bn = app.add_subcommand("bench", "Sweep random networks and record bounds and timings");
    c_bn->add_option("--widths", bn.widths, "Comma-separated widths")->delimiter(',');
    c_bn->add_option("--depths", bn.depths, "Comma-separated depths")->delimiter(',');
    c_bn->add_option("--taus", bn.taus, "Comma-separated taus")->delimiter(',');
    c_bn->add_option("--methods", bn.methods, "Comma-separated methods")->delimiter(',');
    c_bn->add_option("--seed", bn.seed, "Network seed");
    c_bn->add_option("--out", bn.out_path, "CSV output (default stdout)");
    c_bn->add_option("--time-budget-s", bn.time_budget_s, "Per-cell time budget, 0 for none")
        ->check(CLI::NonNegativeNumber);
    add_solver_flags(c_bn, bn.solver);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInputError;
    }

    try {
        if (c_est->parsed()) return cmd_estimate(est, std::cout, std::cerr);
        if (c_cq->parsed()) return cmd_cliques(cq, std::cout, std::cerr);
        if (c_sp->parsed()) return cmd_sparsity(sp, std::cout, std::cerr);
        if (c_rn->parsed()) return cmd_random_net(rn, std::cout, std::cerr);
        if (c_vf->parsed()) return cmd_verify(vf, std::cout, std::cerr);
        if (c_bn->parsed()) return cmd_bench(bn, std::cout, std::cerr);
    } catch (const lipchord::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kInputError;
}
