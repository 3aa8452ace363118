#pragma once

// Linear-regression baseline, regression metrics, k-fold cross-validation
// and the paired t-test used to compare model classes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "relspec/dataset.hpp"
#include "relspec/dendrite.hpp"
#include "relspec/error.hpp"
#include "relspec/stats.hpp"

namespace relspec::eval {

// ---------------------------------------------------------------------------
// Linear regression

struct LinearFit {
    Eigen::MatrixXd coefficients;  // (1 + v) x outputs, row 0 is the intercept
    std::size_t rank = 0;
    bool rank_deficient = false;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const { return features * coefficients; }
};

/// Least squares F*A ~ T via complete orthogonal decomposition; on rank
/// deficiency this yields the minimum-norm solution and flags it.
inline LinearFit fit_lr(const Dataset& train) {
    train.validate();
    relspec::detail::require(train.rows() > 0, "fit_lr: empty dataset");
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(train.features);
    LinearFit fit;
    fit.coefficients = cod.solve(train.targets);
    fit.rank = static_cast<std::size_t>(cod.rank());
    fit.rank_deficient = fit.rank < train.input_dim();
    return fit;
}

// ---------------------------------------------------------------------------
// Metrics

inline double mse(std::span<const double> y_true, std::span<const double> y_pred) {
    relspec::detail::require(y_true.size() == y_pred.size(), "mse: length mismatch");
    relspec::detail::require(!y_true.empty(), "mse: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double r = y_true[i] - y_pred[i];
        s += r * r;
    }
    return s / static_cast<double>(y_true.size());
}

/// 1 - SS_res / SS_tot. Throws when y_true has zero variance.
inline double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
    relspec::detail::require(y_true.size() == y_pred.size(), "r_squared: length mismatch");
    relspec::detail::require(y_true.size() >= 2, "r_squared: need at least 2 values");
    const double mean = std::accumulate(y_true.begin(), y_true.end(), 0.0) / static_cast<double>(y_true.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    }
    if (ss_tot == 0.0) throw ValidationError("r_squared: y_true has zero variance (R^2 undefined)");
    return 1.0 - ss_res / ss_tot;
}

namespace detail {

inline std::span<const double> col_span(const Eigen::MatrixXd& m, Eigen::Index c) {
    return {m.col(c).data(), static_cast<std::size_t>(m.rows())};
}

inline double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// sample standard deviation (n - 1)
inline double stddev(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Folds

enum class FoldScheme { contiguous, seeded_random };

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// k folds whose sizes differ by at most one (larger folds first). The
/// contiguous scheme keeps time order; the random one shuffles rows with
/// `seed` before cutting.
inline std::vector<Split> kfold(std::size_t n, std::size_t k, FoldScheme scheme = FoldScheme::contiguous,
                                std::uint64_t seed = 0) {
    relspec::detail::require(k >= 2, "kfold: k must be >= 2");
    if (n < k) throw ValidationError("kfold: N=" + std::to_string(n) + " < k=" + std::to_string(k));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (scheme == FoldScheme::seeded_random) {
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<std::size_t> fold_of(n);
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        for (std::size_t i = start; i < start + size; ++i) fold_of[order[i]] = f;
        start += size;
    }
    std::vector<Split> splits(k);
    for (std::size_t row = 0; row < n; ++row)
        for (std::size_t f = 0; f < k; ++f) (fold_of[row] == f ? splits[f].test : splits[f].train).push_back(row);
    return splits;
}

inline std::vector<Split> kfold(const Dataset& data, std::size_t k, FoldScheme scheme = FoldScheme::contiguous,
                                std::uint64_t seed = 0) {
    return kfold(data.rows(), k, scheme, seed);
}

// ---------------------------------------------------------------------------
// Models under evaluation

struct LinearSpec {};

/// Dendrite Net settings; input and output widths come from the data.
struct DendriteSpec {
    std::vector<std::size_t> hidden_widths;  // empty entries default to input_dim
    std::vector<bool> residual;              // empty = all plain
    dd::TrainConfig train;
    bool per_output = true;                  // one single-output model per target column
};

using ModelSpec = std::variant<LinearSpec, DendriteSpec>;

inline std::string model_name(const ModelSpec& spec) {
    return std::holds_alternative<LinearSpec>(spec) ? "LR" : "DD";
}

/// Trained Dendrite Nets for a dataset: either one shared model or one
/// single-output model per target column.
struct DendriteBundle {
    std::vector<dd::DDModel> models;
    bool per_output = true;
    std::vector<std::vector<double>> loss_traces;

    Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const {
        if (!per_output) return dd::predict(models.front(), features);
        Eigen::MatrixXd out(features.rows(), static_cast<Eigen::Index>(models.size()));
        for (std::size_t o = 0; o < models.size(); ++o)
            out.col(static_cast<Eigen::Index>(o)) = dd::predict(models[o], features).col(0);
        return out;
    }
};

inline dd::Architecture architecture_for(const DendriteSpec& spec, std::size_t input_dim, std::size_t outputs) {
    std::vector<std::size_t> hidden = spec.hidden_widths;
    for (auto& w : hidden)
        if (w == 0) w = input_dim;
    return dd::Architecture::make(input_dim, hidden, outputs, spec.residual);
}

inline DendriteBundle fit_dd(const Dataset& train, const DendriteSpec& spec) {
    DendriteBundle b;
    b.per_output = spec.per_output;
    const std::size_t heads = spec.per_output ? train.outputs() : 1;
    for (std::size_t h = 0; h < heads; ++h) {
        const Dataset part = spec.per_output ? train.column(h) : train;
        const auto arch = architecture_for(spec, train.input_dim(), part.outputs());
        // distinct deterministic init per head
        auto init = dd::init_model(arch, spec.train.init_scale, spec.train.rng_seed + h);
        auto res = dd::train(std::move(init), part, spec.train);
        b.models.push_back(std::move(res.model));
        b.loss_traces.push_back(std::move(res.loss_trace));
    }
    return b;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldScore {
    std::vector<double> r2;   // per output
    std::vector<double> mse;  // per output
};

struct CVResult {
    std::string model;
    std::vector<std::string> output_names;
    std::vector<FoldScore> folds;
    std::vector<double> r2_mean, r2_sd, mse_mean, mse_sd;
    std::vector<std::size_t> fold_of_row;

    std::vector<double> r2_series(std::size_t output) const {
        std::vector<double> v;
        for (const auto& f : folds) v.push_back(f.r2[output]);
        return v;
    }
    std::vector<double> mse_series(std::size_t output) const {
        std::vector<double> v;
        for (const auto& f : folds) v.push_back(f.mse[output]);
        return v;
    }
};

inline FoldScore score(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred) {
    FoldScore s;
    for (Eigen::Index o = 0; o < y_true.cols(); ++o) {
        s.r2.push_back(r_squared(detail::col_span(y_true, o), detail::col_span(y_pred, o)));
        s.mse.push_back(mse(detail::col_span(y_true, o), detail::col_span(y_pred, o)));
    }
    return s;
}

inline CVResult cross_validate(const Dataset& data, std::size_t k, const ModelSpec& spec,
                               FoldScheme scheme = FoldScheme::contiguous, std::uint64_t fold_seed = 0) {
    data.validate();
    CVResult res;
    res.model = model_name(spec);
    res.output_names = data.target_names;
    const auto splits = kfold(data, k, scheme, fold_seed);
    res.fold_of_row.assign(data.rows(), 0);
    for (std::size_t f = 0; f < splits.size(); ++f) {
        for (auto r : splits[f].test) res.fold_of_row[r] = f;
        const Dataset train = data.subset(splits[f].train);
        const Dataset test = data.subset(splits[f].test);
        Eigen::MatrixXd pred;
        if (std::holds_alternative<LinearSpec>(spec))
            pred = fit_lr(train).predict(test.features);
        else
            pred = fit_dd(train, std::get<DendriteSpec>(spec)).predict(test.features);
        res.folds.push_back(score(test.targets, pred));
    }
    for (std::size_t o = 0; o < data.outputs(); ++o) {
        const auto r2 = res.r2_series(o);
        const auto ms = res.mse_series(o);
        res.r2_mean.push_back(detail::mean(r2));
        res.r2_sd.push_back(detail::stddev(r2));
        res.mse_mean.push_back(detail::mean(ms));
        res.mse_sd.push_back(detail::stddev(ms));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Paired t-test

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
    bool degenerate = false;  // all differences identical: t undefined
};

/// Two-tailed paired-samples t-test on d = a - b.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    relspec::detail::require(a.size() == b.size(), "paired_t_test: length mismatch");
    relspec::detail::require(a.size() >= 2, "paired_t_test: need at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    TTestResult r;
    r.df = d.size() - 1;
    const double sd = detail::stddev(d);
    if (sd == 0.0) {
        r.degenerate = true;
        r.t = std::numeric_limits<double>::quiet_NaN();
        r.p = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.t = detail::mean(d) / (sd / std::sqrt(static_cast<double>(d.size())));
    r.p = stats::student_t_two_tailed(r.t, static_cast<double>(r.df));
    return r;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json to_json(const CVResult& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (std::size_t f = 0; f < r.folds.size(); ++f)
        folds.push_back({{"fold", f}, {"r2", r.folds[f].r2}, {"mse", r.folds[f].mse}});
    return {{"model", r.model},           {"outputs", r.output_names}, {"folds", folds},
            {"r2_mean", r.r2_mean},       {"r2_sd", r.r2_sd},          {"mse_mean", r.mse_mean},
            {"mse_sd", r.mse_sd},         {"fold_of_row", r.fold_of_row}};
}

inline nlohmann::json to_json(const TTestResult& t) {
    if (t.degenerate) return {{"degenerate", true}, {"df", t.df}};
    return {{"degenerate", false}, {"t", t.t}, {"p", t.p}, {"df", t.df}};
}

}  // namespace relspec::eval
