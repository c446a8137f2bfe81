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

#ifndef LIPCHORD_NETWORK_HPP
#define LIPCHORD_NETWORK_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lipchord/error.hpp"

namespace lipchord {

enum class ActivationKind { relu, tanh, sector };

inline const char* to_string(ActivationKind kind) {
    switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::sector: return "sector";
    }
    return "?";
}

/// Scalar activation abstracted by its slope sector [lo, hi].
struct ActivationSpec {
    ActivationKind kind = ActivationKind::relu;
    double lo = 0.0;
    double hi = 1.0;

    static ActivationSpec relu() { return {ActivationKind::relu, 0.0, 1.0}; }
    static ActivationSpec tanh() { return {ActivationKind::tanh, 0.0, 1.0}; }
    static ActivationSpec sector(double lo, double hi) {
        return {ActivationKind::sector, lo, hi};
    }

    double apply(double t) const {
        switch (kind) {
        case ActivationKind::relu: return t > 0.0 ? t : 0.0;
        case ActivationKind::tanh: return std::tanh(t);
        case ActivationKind::sector: break;
        }
        throw DomainError("activation kind 'sector' has no concrete nonlinearity to evaluate");
    }

    friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};

/// Feedforward network x_{k+1} = phi(W_k x_k + b_k), output W_K x_K + b_K.
///
/// layer_sizes holds [n_1, ..., n_K, m]; weights[k] is n_{k+2} x n_{k+1}
/// in zero-based terms.
struct Network {
    std::vector<int> layer_sizes;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    ActivationSpec activation;

    /// Number of affine layers K.
    int depth() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }

    bool has_zero_biases() const {
        for (const auto& b : biases) {
            if (!b.isZero(0.0)) return false;
        }
        return true;
    }

    /// Throws ShapeError / NonFiniteError / DomainError on the first violation.
    void validate() const {
        if (layer_sizes.size() < 3) {
            throw ShapeError("network needs at least two affine layers (layer_sizes length >= 3), got "
                             + std::to_string(layer_sizes.size()) + " sizes");
        }
        for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
            if (layer_sizes[i] <= 0) {
                throw ShapeError("layer_sizes[" + std::to_string(i) + "] must be positive");
            }
        }
        const std::size_t K = layer_sizes.size() - 1;
        if (weights.size() != K) {
            throw ShapeError("expected " + std::to_string(K) + " weight matrices, got "
                             + std::to_string(weights.size()));
        }
        if (biases.size() != K) {
            throw ShapeError("expected " + std::to_string(K) + " bias vectors, got "
                             + std::to_string(biases.size()));
        }
        for (std::size_t k = 0; k < K; ++k) {
            const auto& W = weights[k];
            const std::string layer = "layer " + std::to_string(k + 1);
            if (W.rows() != layer_sizes[k + 1] || W.cols() != layer_sizes[k]) {
                throw ShapeError(layer + ": weight is " + std::to_string(W.rows()) + "x"
                                 + std::to_string(W.cols()) + ", expected "
                                 + std::to_string(layer_sizes[k + 1]) + "x"
                                 + std::to_string(layer_sizes[k]));
            }
            if (biases[k].size() != layer_sizes[k + 1]) {
                throw ShapeError(layer + ": bias has length " + std::to_string(biases[k].size())
                                 + ", expected " + std::to_string(layer_sizes[k + 1]));
            }
            if (!W.allFinite()) throw NonFiniteError(layer + ": weight has a non-finite entry");
            if (!biases[k].allFinite()) throw NonFiniteError(layer + ": bias has a non-finite entry");
        }
        if (!std::isfinite(activation.lo) || !std::isfinite(activation.hi)) {
            throw NonFiniteError("activation sector bounds must be finite");
        }
        if (activation.lo > activation.hi) {
            throw DomainError("activation sector requires lo <= hi");
        }
    }

    friend bool operator==(const Network& a, const Network& b) {
        if (a.layer_sizes != b.layer_sizes || !(a.activation == b.activation)) return false;
        if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size()) return false;
        for (std::size_t k = 0; k < a.weights.size(); ++k) {
            if (a.weights[k].rows() != b.weights[k].rows() || a.weights[k].cols() != b.weights[k].cols()
                || a.weights[k] != b.weights[k]) {
                return false;
            }
            if (a.biases[k].size() != b.biases[k].size() || a.biases[k] != b.biases[k]) return false;
        }
        return true;
    }
};

inline Eigen::VectorXd eval_forward(const Network& net, const Eigen::VectorXd& x) {
    if (x.size() != net.input_dim()) {
        throw ShapeError("input has length " + std::to_string(x.size()) + ", network expects "
                         + std::to_string(net.input_dim()));
    }
    if (net.activation.kind == ActivationKind::sector) {
        throw DomainError("cannot evaluate a network whose activation is only a sector abstraction");
    }
    Eigen::VectorXd h = x;
    const int K = net.depth();
    for (int k = 0; k + 1 < K; ++k) {
        h = (net.weights[k] * h + net.biases[k]).unaryExpr(
            [&](double t) { return net.activation.apply(t); });
    }
    return net.weights[K - 1] * h + net.biases[K - 1];
}

/// Network of the benchmark family: n_1 = m = 2, hidden width `width`,
/// `depth` affine layers, weights i.i.d. N(0, 1/2) (variance), zero biases.
inline Network random_network(int width, int depth, std::uint64_t seed,
                              ActivationSpec activation = ActivationSpec::relu()) {
    if (width < 1) throw DomainError("random_network: width must be >= 1");
    if (depth < 2) throw DomainError("random_network: depth must be >= 2");
    Network net;
    net.activation = activation;
    net.layer_sizes.assign(depth + 1, width);
    net.layer_sizes.front() = 2;
    net.layer_sizes.back() = 2;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    for (int k = 0; k < depth; ++k) {
        Eigen::MatrixXd W(net.layer_sizes[k + 1], net.layer_sizes[k]);
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = gauss(rng);
        }
        net.weights.push_back(std::move(W));
        net.biases.push_back(Eigen::VectorXd::Zero(net.layer_sizes[k + 1]));
    }
    return net;
}

/// Benchmark-style name, e.g. "W30-D20".
inline std::string network_name(int width, int depth) {
    return "W" + std::to_string(width) + "-D" + std::to_string(depth);
}

/// Largest singular value by power iteration on M^T M.
///
/// Starts from the normalized all-ones vector; converges when successive
/// estimates agree to relative tolerance `tol`. Throws ConvergenceError
/// carrying the last estimate after `max_iters` iterations.
inline double spectral_norm(const Eigen::MatrixXd& M, double tol = 1e-12, int max_iters = 10000) {
    if (!(tol > 0.0)) throw DomainError("spectral_norm: tol must be positive");
    if (!M.allFinite()) throw NonFiniteError("spectral_norm: matrix has a non-finite entry");
    if (M.size() == 0) return 0.0;
    const double mmax = M.cwiseAbs().maxCoeff();
    if (mmax == 0.0) return 0.0;

    const Eigen::MatrixXd G = (M / mmax).transpose() * (M / mmax);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(G.cols()).normalized();
    double estimate = 0.0;
    bool restarted = false;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd w = G * v;
        const double norm_w = w.norm();
        if (norm_w == 0.0) {
            // All-ones start lies in the null space; restart from the column
            // of largest norm, which cannot.
            if (restarted) return 0.0;
            restarted = true;
            Eigen::Index col = 0;
            M.colwise().norm().maxCoeff(&col);
            v = Eigen::VectorXd::Unit(G.cols(), col);
            continue;
        }
        const double next = std::sqrt(v.dot(w));
        v = w / norm_w;
        if (it > 0 && std::abs(next - estimate) <= tol * next) {
            return std::sqrt(v.dot(G * v)) * mmax;
        }
        estimate = next;
    }
    throw ConvergenceError("spectral_norm: power iteration did not converge", estimate * mmax);
}

/// Product of the layer spectral norms.
inline double naive_lip(const Network& net, double tol = 1e-12) {
    double product = 1.0;
    for (const auto& W : net.weights) product *= spectral_norm(W, tol);
    return product;
}

/// Returns a copy with W_k replaced by factors[k] * W_k. Biases are untouched.
inline Network scale_weights(const Network& net, const std::vector<double>& factors) {
    if (static_cast<int>(factors.size()) != net.depth()) {
        throw ShapeError("scale_weights: expected " + std::to_string(net.depth()) + " factors, got "
                         + std::to_string(factors.size()));
    }
    Network out = net;
    for (std::size_t k = 0; k < factors.size(); ++k) {
        if (!(factors[k] > 0.0) || !std::isfinite(factors[k])) {
            throw DomainError("scale_weights: factor " + std::to_string(k + 1) + " must be positive");
        }
        out.weights[k] *= factors[k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Network& net) {
    nlohmann::json j;
    j["layer_sizes"] = net.layer_sizes;
    auto weights = nlohmann::json::array();
    for (const auto& W : net.weights) {
        auto rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < W.rows(); ++r) {
            std::vector<double> row(W.cols());
            for (Eigen::Index c = 0; c < W.cols(); ++c) row[c] = W(r, c);
            rows.push_back(row);
        }
        weights.push_back(std::move(rows));
    }
    j["weights"] = std::move(weights);
    auto biases = nlohmann::json::array();
    for (const auto& b : net.biases) biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
    j["biases"] = std::move(biases);
    j["activation"] = {{"kind", to_string(net.activation.kind)},
                       {"lo", net.activation.lo},
                       {"hi", net.activation.hi}};
    return j;
}

namespace detail {

inline double json_number(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw ParseError(where + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw NonFiniteError(where + ": non-finite value");
    return x;
}

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) known = known || item.key() == key;
        if (!known) throw ParseError(where + ": unknown key '" + item.key() + "'");
    }
}

} // namespace detail

/// Parses and validates a network. Shape problems raise ShapeError naming
/// the layer; non-finite numbers raise NonFiniteError; everything else that
/// is malformed raises ParseError.
inline Network network_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("network: top-level value must be an object");
    detail::reject_unknown_keys(j, {"layer_sizes", "weights", "biases", "activation"}, "network");
    for (const char* key : {"layer_sizes", "weights", "biases", "activation"}) {
        if (!j.contains(key)) throw ParseError(std::string("network: missing key '") + key + "'");
    }

    Network net;
    const auto& sizes = j.at("layer_sizes");
    if (!sizes.is_array()) throw ParseError("layer_sizes: expected an array");
    for (const auto& s : sizes) {
        if (!s.is_number_integer()) throw ParseError("layer_sizes: entries must be integers");
        net.layer_sizes.push_back(s.get<int>());
    }
    if (net.layer_sizes.size() < 3) {
        throw ShapeError("layer_sizes: need at least 3 entries (two affine layers)");
    }
    for (int n : net.layer_sizes) {
        if (n <= 0) throw ShapeError("layer_sizes: entries must be positive");
    }
    const std::size_t K = net.layer_sizes.size() - 1;

    const auto& weights = j.at("weights");
    if (!weights.is_array()) throw ParseError("weights: expected an array");
    if (weights.size() != K) {
        throw ShapeError("weights: expected " + std::to_string(K) + " matrices, got "
                         + std::to_string(weights.size()));
    }
    for (std::size_t k = 0; k < K; ++k) {
        const std::string where = "weights layer " + std::to_string(k + 1);
        const auto& rows = weights[k];
        if (!rows.is_array()) throw ParseError(where + ": expected a 2-D array");
        const int nr = net.layer_sizes[k + 1];
        const int nc = net.layer_sizes[k];
        if (static_cast<int>(rows.size()) != nr) {
            throw ShapeError(where + ": has " + std::to_string(rows.size()) + " rows, expected "
                             + std::to_string(nr));
        }
        Eigen::MatrixXd W(nr, nc);
        for (int r = 0; r < nr; ++r) {
            if (!rows[r].is_array()) throw ParseError(where + ": expected a 2-D array");
            if (static_cast<int>(rows[r].size()) != nc) {
                throw ShapeError(where + ": row " + std::to_string(r + 1) + " has "
                                 + std::to_string(rows[r].size()) + " columns, expected "
                                 + std::to_string(nc));
            }
            for (int c = 0; c < nc; ++c) W(r, c) = detail::json_number(rows[r][c], where);
        }
        net.weights.push_back(std::move(W));
    }

    const auto& biases = j.at("biases");
    if (!biases.is_array()) throw ParseError("biases: expected an array");
    if (biases.size() != K) {
        throw ShapeError("biases: expected " + std::to_string(K) + " vectors, got "
                         + std::to_string(biases.size()));
    }
    for (std::size_t k = 0; k < K; ++k) {
        const std::string where = "biases layer " + std::to_string(k + 1);
        const auto& b = biases[k];
        if (!b.is_array()) throw ParseError(where + ": expected an array");
        if (static_cast<int>(b.size()) != net.layer_sizes[k + 1]) {
            throw ShapeError(where + ": has length " + std::to_string(b.size()) + ", expected "
                             + std::to_string(net.layer_sizes[k + 1]));
        }
        Eigen::VectorXd v(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) v[i] = detail::json_number(b[i], where);
        net.biases.push_back(std::move(v));
    }

    const auto& act = j.at("activation");
    if (!act.is_object()) throw ParseError("activation: expected an object");
    detail::reject_unknown_keys(act, {"kind", "lo", "hi"}, "activation");
    if (!act.contains("kind") || !act.at("kind").is_string()) {
        throw ParseError("activation: missing string key 'kind'");
    }
    const auto kind = act.at("kind").get<std::string>();
    if (kind == "relu") {
        net.activation = ActivationSpec::relu();
    } else if (kind == "tanh") {
        net.activation = ActivationSpec::tanh();
    } else if (kind == "sector") {
        net.activation = ActivationSpec::sector(0.0, 1.0);
    } else {
        throw ParseError("activation: unknown kind '" + kind + "'");
    }
    if (act.contains("lo")) net.activation.lo = detail::json_number(act.at("lo"), "activation.lo");
    if (act.contains("hi")) net.activation.hi = detail::json_number(act.at("hi"), "activation.hi");
    if (net.activation.kind != ActivationKind::sector
        && (net.activation.lo != 0.0 || net.activation.hi != 1.0)) {
        throw DomainError("activation: " + kind + " has fixed sector [0, 1]");
    }

    net.validate();
    return net;
}

inline Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open network file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::out_of_range& e) {
        // 406: a literal such as 1e400 overflows a double.
        if (e.id == 406) throw NonFiniteError("network file '" + path + "': " + e.what());
        throw ParseError("network file '" + path + "': " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("network file '" + path + "': " + e.what());
    }
    return network_from_json(j);
}

inline void save_network(const Network& net, const std::string& path) {
    net.validate();
    std::ofstream out(path);
    if (!out) throw Error("cannot write network file '" + path + "'");
    out << to_json(net).dump() << '\n';
}

} // namespace lipchord

#endif // LIPCHORD_NETWORK_HPP
