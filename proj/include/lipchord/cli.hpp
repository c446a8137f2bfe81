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

#ifndef LIPCHORD_CLI_HPP
#define LIPCHORD_CLI_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lipchord/admm.hpp"
#include "lipchord/chordal.hpp"
#include "lipchord/error.hpp"
#include "lipchord/network.hpp"
#include "lipchord/sdp_build.hpp"
#include "lipchord/verify.hpp"

namespace lipchord::cli {

// Exit codes shared by every command.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kNotConverged = 2;
inline constexpr int kCheckFailed = 3;

struct SolverFlags {
    double rho = SolveOptions{}.rho0;
    double eps_abs = SolveOptions{}.eps_abs;
    double eps_rel = SolveOptions{}.eps_rel;
    long max_iters = SolveOptions{}.max_iters;

    SolveOptions options() const {
        SolveOptions o;
        o.rho0 = rho;
        o.eps_abs = eps_abs;
        o.eps_rel = eps_rel;
        o.max_iters = max_iters;
        o.validate();
        return o;
    }
};

inline std::string certification_label(const BoundReport& r) {
    if (r.method == "naive") return "naive product bound";
    if (!r.converged) return "not converged";
    return r.tau == 0 ? "certified" : "estimate (tau > 0 is not a certificate)";
}

/// Dispatches one bound computation. `method` is chordal, dense or naive.
inline BoundReport estimate_bound(const Network& net, int tau, const std::string& method, const SolveOptions& opts) {
    if (method == "naive") {
        const auto t0 = std::chrono::steady_clock::now();
        BoundReport r;
        r.method = "naive";
        r.tau = tau;
        r.lipschitz_bound = naive_lip(net);
        r.gamma_ell_star = r.lipschitz_bound * r.lipschitz_bound;
        r.converged = true;
        r.certified = false;
        r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }
    if (method != "chordal" && method != "dense") throw DomainError("unknown method '" + method + "'");
    const auto t0 = std::chrono::steady_clock::now();
    const SdpProblem prob = build_problem(net, tau);
    const CliqueSet cliques = method == "dense" ? CliqueSet::dense(prob.N()) : maximal_cliques(prob.dims, prob.tau());
    BoundReport r = solve(prob, cliques, opts);
    r.method = method;
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    std::string net_path;
    int tau = 0;
    std::string method = "chordal";
    SolverFlags solver;
    bool scale_weights = false;
    std::string out_path;
};

inline int cmd_estimate(const EstimateArgs& args, std::ostream& out, std::ostream& err) {
    BoundReport report;
    try {
        if (args.tau < 0) throw DomainError("--tau must be nonnegative");
        Network net = load_network(args.net_path);
        const SolveOptions opts = args.solver.options();
        double factor = 1.0;
        if (args.scale_weights) {
            if (net.activation.kind != ActivationKind::relu || !net.has_zero_biases()) {
                throw DomainError("--scale-weights requires a relu network with zero biases "
                                  "(the rescaled bound is only valid for positively homogeneous maps)");
            }
            std::vector<double> factors;
            for (const auto& W : net.weights) {
                const double s = spectral_norm(W);
                if (!(s > 0.0)) throw DomainError("--scale-weights: a weight matrix is zero");
                factors.push_back(1.0 / s);
                factor *= s;
            }
            net = scale_weights(net, factors);
        }
        if (args.method != "naive") {
            const int max_tau = std::max(DimsProfile(net.layer_sizes).N_f() - 1, 0);
            if (args.tau > max_tau) {
                err << "warning: tau " << args.tau << " exceeds N_f - 1 and is clamped to " << max_tau << '\n';
            }
        }
        report = estimate_bound(net, args.tau, args.method, opts);
        report.lipschitz_bound *= factor;
        report.gamma_ell_star *= factor * factor;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }

    const auto j = to_json(report);
    if (!args.out_path.empty()) {
        std::ofstream f(args.out_path);
        if (!f) {
            err << "error: cannot write '" << args.out_path << "'\n";
            return kInputError;
        }
        f << j.dump(2) << '\n';
    }
    out << std::setprecision(10) << "lipschitz_bound " << report.lipschitz_bound << " (" << report.method
        << ", tau=" << report.tau << ", " << certification_label(report) << ")\n";
    return report.converged ? kOk : kNotConverged;
}

// ---------------------------------------------------------------------------
// cliques

struct CliquesArgs {
    std::string net_path;
    int tau = 0;
    std::string format = "text";
};

inline nlohmann::json to_json(const CliqueSet& cs) {
    auto arr = nlohmann::json::array();
    for (const auto& c : cs.cliques) arr.push_back({{"start", c.start}, {"end", c.end}, {"size", c.size()}});
    return {{"N", cs.N}, {"p", cs.p()}, {"cliques", arr}};
}

inline int cmd_cliques(const CliquesArgs& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.format != "text" && args.format != "json") throw DomainError("--format must be text or json");
        const Network net = load_network(args.net_path);
        const CliqueSet cs = maximal_cliques(DimsProfile(net.layer_sizes), args.tau);
        if (args.format == "json") {
            out << to_json(cs).dump(2) << '\n';
        } else {
            out << "p " << cs.p() << '\n';
            for (int k = 0; k < cs.p(); ++k) {
                const auto& c = cs.cliques[k];
                out << "C" << (k + 1) << " [" << c.start << ", " << c.end << "] size " << c.size() << '\n';
            }
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// sparsity

struct SparsityArgs {
    std::string net_path;
    int tau = 0;
    std::string format = "pbm";
    std::string out_path;
    bool oracle = false;
};

inline int cmd_sparsity(const SparsityArgs& args, std::ostream& out, std::ostream& err) {
    try {
        if (args.format != "pbm" && args.format != "csv") throw DomainError("--format must be pbm or csv");
        const Network net = load_network(args.net_path);
        const DimsProfile dims(net.layer_sizes);
        const EdgeSet predicted = predicted_edge_set(dims, args.tau);
        const std::string body = args.format == "pbm" ? to_pbm(predicted) : to_csv(predicted);
        if (args.out_path.empty()) {
            out << body;
        } else {
            std::ofstream f(args.out_path);
            if (!f) throw Error("cannot write '" + args.out_path + "'");
            f << body;
        }
        if (args.oracle) {
            const EdgeSet oracle = oracle_edge_set(build_problem(net, args.tau));
            if (!(oracle == predicted)) {
                err << "oracle mismatch: oracle has " << oracle.num_edges() << " edges, predicted "
                    << predicted.num_edges() << (oracle.subset_of(predicted) ? " (oracle is a subset)" : "")
                    << '\n';
                return kCheckFailed;
            }
            err << "oracle agrees with the predicted pattern (" << predicted.num_edges() << " edges)\n";
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// random-net

struct RandomNetArgs {
    int width = 10;
    int depth = 5;
    std::uint64_t seed = 0;
    std::string out_path;
};

inline int cmd_random_net(const RandomNetArgs& args, std::ostream& out, std::ostream& err) {
    try {
        const Network net = random_network(args.width, args.depth, args.seed);
        if (args.out_path.empty()) {
            out << to_json(net).dump() << '\n';
        } else {
            save_network(net, args.out_path);
            out << "wrote " << network_name(args.width, args.depth) << " (seed " << args.seed
                << ", weights N(0, 1/2) by variance) to " << args.out_path << '\n';
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
    std::string net_path;
    int tau = 0;
    SolverFlags solver;
    long pairs = 10000;
    long local = 10000;
    double radius = 1e-4;
    std::uint64_t seed = 0;
    std::string out_path;
};

inline int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
    nlohmann::json j;
    bool all_ok = true;
    try {
        if (args.tau < 0) throw DomainError("--tau must be nonnegative");
        const Network net = load_network(args.net_path);
        const SdpProblem prob = build_problem(net, args.tau);
        const CliqueSet cliques = maximal_cliques(prob.dims, prob.tau());
        const SolveResult res = solve_detailed(prob, cliques, args.solver.options());
        const VerifyReport ver = verify_solution(prob, cliques, res.gamma, res.z_blocks);
        const LowerBoundReport lb = lower_bound_sampling(net, args.pairs, args.local, args.radius, args.seed);

        auto line = [&](const char* name, bool ok, const std::string& detail) {
            out << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
            all_ok = all_ok && ok;
        };
        std::ostringstream s;
        s << std::setprecision(6);
        line("converged", res.report.converged, "iters=" + std::to_string(res.report.iters));
        s << "err=" << ver.reconstruction_error << " tol=" << ver.reconstruction_tol;
        line("reconstruction", ver.reconstruction_ok, s.str());
        s.str("");
        s << "max_eig=" << ver.max_block_eigenvalue;
        line("blocks_nsd", ver.blocks_nsd_ok, s.str());
        s.str("");
        s << "min_gamma=" << ver.min_gamma;
        line("gamma_nonneg", ver.gamma_nonneg_ok, s.str());
        s.str("");
        s << "max_eig=" << ver.max_global_eigenvalue;
        line("global_nsd", ver.global_nsd_ok, s.str());
        s.str("");
        s << "sampled=" << lb.best_quotient << " bound=" << res.report.lipschitz_bound;
        line("lower_bound", lb.best_quotient < res.report.lipschitz_bound, s.str());
        out << "bound " << std::setprecision(10) << res.report.lipschitz_bound << " ("
            << certification_label(res.report) << ")\n";

        j["bound"] = to_json(res.report);
        j["checks"] = to_json(ver);
        j["lower_bound"] = to_json(lb);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    if (!args.out_path.empty()) {
        std::ofstream f(args.out_path);
        if (!f) {
            err << "error: cannot write '" << args.out_path << "'\n";
            return kInputError;
        }
        f << j.dump(2) << '\n';
    }
    return all_ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// bench

struct BenchRow {
    std::string net;
    std::uint64_t seed = 0;
    std::string method;
    int tau = 0;
    double bound = 0.0;
    double wall_time_s = 0.0;
    long iters = 0;
    bool converged = false;
    /// ok, timeout, not_converged or error.
    std::string status = "ok";

    friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

inline const char* bench_csv_header() { return "net,seed,method,tau,bound,wall_time_s,iters,converged,status"; }

inline std::string to_csv_line(const BenchRow& r) {
    std::ostringstream s;
    s << std::setprecision(17) << r.net << ',' << r.seed << ',' << r.method << ',' << r.tau << ',' << r.bound << ','
      << r.wall_time_s << ',' << r.iters << ',' << (r.converged ? 1 : 0) << ',' << r.status;
    return s.str();
}

/// Parses CSV written by write_bench_csv. Throws ParseError on malformed lines.
inline std::vector<BenchRow> parse_bench_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != bench_csv_header()) throw ParseError("bench CSV: bad header");
    std::vector<BenchRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 9) throw ParseError("bench CSV: expected 9 fields in '" + line + "'");
        try {
            BenchRow r;
            r.net = f[0];
            r.seed = std::stoull(f[1]);
            r.method = f[2];
            r.tau = std::stoi(f[3]);
            r.bound = std::stod(f[4]);
            r.wall_time_s = std::stod(f[5]);
            r.iters = std::stol(f[6]);
            r.converged = f[7] == "1";
            r.status = f[8];
            rows.push_back(std::move(r));
        } catch (const std::exception&) {
            throw ParseError("bench CSV: malformed line '" + line + "'");
        }
    }
    return rows;
}

inline void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
    out << bench_csv_header() << '\n';
    for (const auto& r : rows) out << to_csv_line(r) << '\n';
}

struct BenchArgs {
    std::vector<int> widths;
    std::vector<int> depths;
    std::vector<int> taus;
    std::vector<std::string> methods;
    std::uint64_t seed = 0;
    std::string out_path;
    double time_budget_s = 0.0;
    SolverFlags solver;
};

/// Worker count from LIPCHORD_THREADS, defaulting to the hardware concurrency.
inline unsigned bench_threads() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LIPCHORD_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<unsigned>(v);
    }
    return n;
}

/// Runs the grid. Cell order (width, depth, tau, method) is fixed, so the
/// output is independent of the worker count.
inline std::vector<BenchRow> run_bench(const BenchArgs& args, unsigned threads) {
    struct Cell {
        int width, depth, tau;
        std::string method;
    };
    std::vector<Cell> cells;
    for (int w : args.widths) {
        for (int d : args.depths) {
            for (int t : args.taus) {
                for (const auto& m : args.methods) cells.push_back({w, d, t, m});
            }
        }
    }
    SolveOptions opts = args.solver.options();
    opts.time_budget_s = args.time_budget_s;

    std::vector<BenchRow> rows(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const Cell& c = cells[i];
            BenchRow& row = rows[i];
            row.net = network_name(c.width, c.depth);
            row.seed = args.seed;
            row.method = c.method;
            row.tau = c.tau;
            try {
                const Network net = random_network(c.width, c.depth, args.seed);
                const BoundReport r = estimate_bound(net, c.tau, c.method, opts);
                row.bound = r.lipschitz_bound;
                row.wall_time_s = r.wall_time_s;
                row.iters = r.iters;
                row.converged = r.converged;
                row.status = r.converged ? "ok" : (r.timed_out ? "timeout" : "not_converged");
            } catch (const Error&) {
                row.status = "error";
                row.bound = std::numeric_limits<double>::quiet_NaN();
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells.size())));
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return rows;
}

inline int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
    if (args.widths.empty() || args.depths.empty() || args.taus.empty() || args.methods.empty()) {
        err << "error: --widths, --depths, --taus and --methods each need at least one value\n";
        return kInputError;
    }
    for (const auto& m : args.methods) {
        if (m != "chordal" && m != "dense" && m != "naive") {
            err << "error: unknown method '" << m << "'\n";
            return kInputError;
        }
    }
    for (int t : args.taus) {
        if (t < 0) {
            err << "error: taus must be nonnegative\n";
            return kInputError;
        }
    }
    std::vector<BenchRow> rows;
    try {
        rows = run_bench(args, bench_threads());
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    if (args.out_path.empty()) {
        write_bench_csv(rows, out);
    } else {
        std::ofstream f(args.out_path);
        if (!f) {
            err << "error: cannot write '" << args.out_path << "'\n";
            return kInputError;
        }
        write_bench_csv(rows, f);
        out << "wrote " << rows.size() << " rows to " << args.out_path << '\n';
    }
    return kOk;
}

} // namespace lipchord::cli

#endif // LIPCHORD_CLI_HPP
