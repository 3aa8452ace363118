#pragma once

// Dendrite Net: modules that mix linearly and then gate element-wise by
// the network input, so the whole model stays a polynomial in its inputs.
//
//   plain module     A_l = (W_l A_{l-1}) o G_l(X)
//   residual module  A_l = (W_l A_{l-1}) o G_l(X) + W_l A_{l-1}
//   output           Y   = W_L A_{L-1}
//
// A_0 = X, and X[0] is the constant bias component. Hidden unit j of a
// module is gated by X[j mod input_dim]; with width == input_dim this is
// the plain Hadamard product with X.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "relspec/dataset.hpp"
#include "relspec/error.hpp"

namespace relspec::dd {

struct Architecture {
    std::size_t input_dim = 0;               // includes the bias component
    std::vector<std::size_t> layer_widths;   // last entry = output dimension
    std::vector<bool> residual_flags;        // one per Hadamard module

    std::size_t modules() const { return layer_widths.empty() ? 0 : layer_widths.size() - 1; }
    std::size_t outputs() const { return layer_widths.empty() ? 0 : layer_widths.back(); }
    std::size_t gate_index(std::size_t unit) const { return unit % input_dim; }

    std::size_t previous_width(std::size_t layer) const {
        return layer == 0 ? input_dim : layer_widths[layer - 1];
    }

    void validate() const {
        relspec::detail::require(input_dim >= 2, "architecture: input_dim must be >= 2 (bias + one variable)");
        relspec::detail::require(!layer_widths.empty(), "architecture: layer_widths must be non-empty");
        for (auto w : layer_widths) relspec::detail::require(w >= 1, "architecture: every width must be >= 1");
        relspec::detail::require(residual_flags.size() == modules(),
                        "architecture: residual_flags length must equal the module count");
    }

    /// Hidden modules of the given widths followed by an output layer.
    static Architecture make(std::size_t input_dim, std::vector<std::size_t> hidden,
                             std::size_t outputs, std::vector<bool> residual = {}) {
        Architecture a;
        a.input_dim = input_dim;
        a.layer_widths = std::move(hidden);
        a.layer_widths.push_back(outputs);
        a.residual_flags = residual.empty() ? std::vector<bool>(a.modules(), false) : std::move(residual);
        a.validate();
        return a;
    }

    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct DDModel {
    Architecture architecture;
    std::vector<Eigen::MatrixXd> weights;  // weights[l] : layer_widths[l] x previous_width(l)

    void validate() const {
        architecture.validate();
        relspec::detail::require(weights.size() == architecture.layer_widths.size(),
                        "model: one weight matrix per layer required");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            const auto rows = static_cast<Eigen::Index>(architecture.layer_widths[l]);
            const auto cols = static_cast<Eigen::Index>(architecture.previous_width(l));
            if (weights[l].rows() != rows || weights[l].cols() != cols)
                throw ValidationError("model: weight matrix " + std::to_string(l) + " has shape " +
                                      std::to_string(weights[l].rows()) + "x" +
                                      std::to_string(weights[l].cols()) + ", expected " +
                                      std::to_string(rows) + "x" + std::to_string(cols));
            relspec::detail::require(weights[l].allFinite(), "model: non-finite weight entry");
        }
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
        return n;
    }

    friend bool operator==(const DDModel& a, const DDModel& b) {
        if (!(a.architecture == b.architecture) || a.weights.size() != b.weights.size()) return false;
        for (std::size_t l = 0; l < a.weights.size(); ++l) {
            if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols())
                return false;
            if (a.weights[l] != b.weights[l]) return false;
        }
        return true;
    }
};

/// Mini-batch gradient descent settings. batch_size == 0 means full batch.
struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double init_scale = 0.5;
    std::uint64_t rng_seed = 42;

    void validate() const {
        relspec::detail::require(learning_rate > 0 && std::isfinite(learning_rate), "train: learning_rate must be > 0");
        relspec::detail::require(init_scale >= 0 && std::isfinite(init_scale), "train: init_scale must be >= 0");
    }
};

using Gradients = std::vector<Eigen::MatrixXd>;

struct TrainResult {
    DDModel model;
    std::vector<double> loss_trace;  // training loss after each epoch
};

/// Weights i.i.d. uniform on [-init_scale, +init_scale].
inline DDModel init_model(const Architecture& arch, double init_scale, std::uint64_t rng_seed) {
    arch.validate();
    relspec::detail::require(init_scale >= 0 && std::isfinite(init_scale), "init_model: init_scale must be >= 0");
    DDModel m;
    m.architecture = arch;
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (std::size_t l = 0; l < arch.layer_widths.size(); ++l) {
        Eigen::MatrixXd w(static_cast<Eigen::Index>(arch.layer_widths[l]),
                          static_cast<Eigen::Index>(arch.previous_width(l)));
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = init_scale * unif(rng);
        m.weights.push_back(std::move(w));
    }
    return m;
}

namespace detail {

// Gate rows for a module of `width` units, one column per sample.
inline Eigen::MatrixXd gate_rows(const Architecture& arch, std::size_t width, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(width), x.cols());
    for (std::size_t j = 0; j < width; ++j)
        g.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(arch.gate_index(j)));
    return g;
}

// Cached intermediate values of a batched forward pass; columns are samples.
struct ForwardTrace {
    std::vector<Eigen::MatrixXd> activations;  // A_0 .. A_{L-1}
    std::vector<Eigen::MatrixXd> gate_factor;  // G_l (+1 for residual modules)
    Eigen::MatrixXd output;
};

inline ForwardTrace forward_trace(const DDModel& m, const Eigen::MatrixXd& x) {
    const auto& arch = m.architecture;
    ForwardTrace t;
    t.activations.push_back(x);
    for (std::size_t l = 0; l < arch.modules(); ++l) {
        Eigen::MatrixXd z = m.weights[l] * t.activations.back();
        Eigen::MatrixXd g = gate_rows(arch, arch.layer_widths[l], x);
        if (arch.residual_flags[l]) g.array() += 1.0;
        t.activations.push_back((z.array() * g.array()).matrix());
        t.gate_factor.push_back(std::move(g));
    }
    t.output = m.weights.back() * t.activations.back();
    return t;
}

inline void check_bias_rows(const Eigen::MatrixXd& features) {
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        if (features(i, 0) != 1.0)
            throw ValidationError("dendrite: x[0] must be 1 (row " + std::to_string(i) + ")");
}

}  // namespace detail

inline Eigen::VectorXd forward(const DDModel& m, std::span<const double> x) {
    const auto& arch = m.architecture;
    if (x.size() != arch.input_dim)
        throw ValidationError("forward: input length " + std::to_string(x.size()) + " != input_dim " +
                              std::to_string(arch.input_dim));
    if (x[0] != 1.0) throw ValidationError("forward: x[0] must be 1");
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::VectorXd a = xv;
    for (std::size_t l = 0; l < arch.modules(); ++l) {
        Eigen::VectorXd z = m.weights[l] * a;
        a.resize(z.size());
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            const double g = xv(static_cast<Eigen::Index>(arch.gate_index(static_cast<std::size_t>(j))));
            a(j) = arch.residual_flags[l] ? z(j) * g + z(j) : z(j) * g;
        }
    }
    return m.weights.back() * a;
}

inline Eigen::VectorXd forward(const DDModel& m, const Eigen::VectorXd& x) {
    return forward(m, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Row-wise forward pass: N x input_dim features to N x outputs.
inline Eigen::MatrixXd predict(const DDModel& m, const Eigen::MatrixXd& features) {
    if (static_cast<std::size_t>(features.cols()) != m.architecture.input_dim)
        throw ValidationError("predict: feature width != input_dim");
    detail::check_bias_rows(features);
    return detail::forward_trace(m, features.transpose()).output.transpose();
}

/// (1/N) * sum over rows of ||forward(x) - y||^2
inline double loss(const DDModel& m, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets) {
    relspec::detail::require(features.rows() > 0, "loss: empty batch");
    relspec::detail::require(targets.rows() == features.rows() &&
                        static_cast<std::size_t>(targets.cols()) == m.architecture.outputs(),
                    "loss: target shape mismatch");
    const Eigen::MatrixXd r = predict(m, features) - targets;
    return r.squaredNorm() / static_cast<double>(features.rows());
}

/// Exact gradients of loss() with respect to every weight entry.
inline Gradients gradients(const DDModel& m, const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets) {
    const auto& arch = m.architecture;
    relspec::detail::require(features.rows() > 0, "gradients: empty batch");
    relspec::detail::require(static_cast<std::size_t>(features.cols()) == arch.input_dim,
                    "gradients: feature width != input_dim");
    relspec::detail::require(targets.rows() == features.rows() &&
                        static_cast<std::size_t>(targets.cols()) == arch.outputs(),
                    "gradients: target shape mismatch");
    detail::check_bias_rows(features);

    const auto t = detail::forward_trace(m, features.transpose());
    const double n = static_cast<double>(features.rows());
    Gradients g(m.weights.size());

    Eigen::MatrixXd delta = (2.0 / n) * (t.output - targets.transpose());
    const std::size_t last = m.weights.size() - 1;
    g[last] = delta * t.activations[last].transpose();
    Eigen::MatrixXd upstream = m.weights[last].transpose() * delta;
    for (std::size_t l = arch.modules(); l-- > 0;) {
        delta = (upstream.array() * t.gate_factor[l].array()).matrix();
        g[l] = delta * t.activations[l].transpose();
        if (l > 0) upstream = m.weights[l].transpose() * delta;
    }
    return g;
}

inline Gradients gradients(const DDModel& m, const Dataset& batch) {
    return gradients(m, batch.features, batch.targets);
}

/// Plain mini-batch gradient descent on the mean squared error. Batches are
/// reshuffled every epoch from cfg.rng_seed. Throws NumericalError when the
/// loss stops being finite.
inline TrainResult train(DDModel model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    data.validate();
    relspec::detail::require(data.rows() > 0, "train: empty dataset");
    relspec::detail::require(data.input_dim() == model.architecture.input_dim, "train: feature width != input_dim");
    relspec::detail::require(data.outputs() == model.architecture.outputs(), "train: target width != model outputs");

    TrainResult result;
    const std::size_t n = data.rows();
    const std::size_t bs = (cfg.batch_size == 0 || cfg.batch_size > n) ? n : cfg.batch_size;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.rng_seed);

    Eigen::MatrixXd bf, bt;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (bs < n) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t len = std::min(bs, n - start);
            if (bs == n) {
                bf = data.features;
                bt = data.targets;
            } else {
                bf.resize(static_cast<Eigen::Index>(len), data.features.cols());
                bt.resize(static_cast<Eigen::Index>(len), data.targets.cols());
                for (std::size_t r = 0; r < len; ++r) {
                    const auto src = static_cast<Eigen::Index>(order[start + r]);
                    bf.row(static_cast<Eigen::Index>(r)) = data.features.row(src);
                    bt.row(static_cast<Eigen::Index>(r)) = data.targets.row(src);
                }
            }
            const auto g = gradients(model, bf, bt);
            for (std::size_t l = 0; l < g.size(); ++l) model.weights[l] -= cfg.learning_rate * g[l];
        }
        const double epoch_loss = loss(model, data.features, data.targets);
        if (!std::isfinite(epoch_loss) || !std::all_of(model.weights.begin(), model.weights.end(),
                                                       [](const auto& w) { return w.allFinite(); }))
            throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                                 " (learning rate " + std::to_string(cfg.learning_rate) + " too high?)");
        result.loss_trace.push_back(epoch_loss);
    }
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------
// JSON: {architecture: {input_dim, layer_widths, residual_flags},
//        weights: row-major nested arrays, format_version: 1}

inline nlohmann::json to_json(const DDModel& m) {
    nlohmann::json arch = {{"input_dim", m.architecture.input_dim},
                           {"layer_widths", m.architecture.layer_widths},
                           {"residual_flags", m.architecture.residual_flags}};
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& w : m.weights) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
            rows.push_back(std::move(row));
        }
        weights.push_back(std::move(rows));
    }
    return {{"architecture", arch}, {"weights", weights}, {"format_version", 1}};
}

inline DDModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != 1)
            throw ValidationError("model json: unsupported format_version");
        DDModel m;
        const auto& a = j.at("architecture");
        m.architecture.input_dim = a.at("input_dim").get<std::size_t>();
        m.architecture.layer_widths = a.at("layer_widths").get<std::vector<std::size_t>>();
        m.architecture.residual_flags = a.at("residual_flags").get<std::vector<bool>>();
        m.architecture.validate();
        for (const auto& wj : j.at("weights")) {
            const auto rows = static_cast<Eigen::Index>(wj.size());
            const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(wj.at(0).size());
            Eigen::MatrixXd w(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const auto& row = wj.at(static_cast<std::size_t>(r));
                if (static_cast<Eigen::Index>(row.size()) != cols)
                    throw ValidationError("model json: ragged weight matrix");
                for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
            }
            m.weights.push_back(std::move(w));
        }
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("model json: ") + e.what());
    }
}

}  // namespace relspec::dd
