#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "relspec/error.hpp"

namespace relspec {

/// Aligned regression data. Row order is time order; the first feature
/// column is the constant bias component and is identically 1.
struct Dataset {
    Eigen::MatrixXd features;  // N x (1 + v)
    Eigen::MatrixXd targets;   // N x outputs
    std::vector<std::string> feature_names;  // v names, bias excluded
    std::vector<std::string> target_names;

    std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t input_dim() const { return static_cast<std::size_t>(features.cols()); }
    std::size_t variables() const { return input_dim() - 1; }
    std::size_t outputs() const { return static_cast<std::size_t>(targets.cols()); }

    void validate() const {
        relspec::detail::require(features.rows() == targets.rows(),
                        "dataset: feature and target row counts differ");
        relspec::detail::require(features.cols() >= 1, "dataset: features need a bias column");
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            if (features(i, 0) != 1.0)
                throw ValidationError("dataset: bias column is not 1 at row " + std::to_string(i));
        }
        relspec::detail::require(features.allFinite(), "dataset: non-finite feature value");
        relspec::detail::require(targets.allFinite(), "dataset: non-finite target value");
        relspec::detail::require(feature_names.empty() || feature_names.size() == variables(),
                        "dataset: feature_names length mismatch");
        relspec::detail::require(target_names.empty() || target_names.size() == outputs(),
                        "dataset: target_names length mismatch");
    }

    /// Rows picked by index, in the given order.
    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset out;
        out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
        out.targets.resize(static_cast<Eigen::Index>(idx.size()), targets.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const auto src = static_cast<Eigen::Index>(idx[r]);
            relspec::detail::require(src < features.rows(), "dataset: row index out of range");
            out.features.row(static_cast<Eigen::Index>(r)) = features.row(src);
            out.targets.row(static_cast<Eigen::Index>(r)) = targets.row(src);
        }
        out.feature_names = feature_names;
        out.target_names = target_names;
        return out;
    }

    /// Single target column as its own dataset.
    Dataset column(std::size_t output) const {
        relspec::detail::require(output < outputs(), "dataset: output index out of range");
        Dataset out;
        out.features = features;
        out.targets = targets.col(static_cast<Eigen::Index>(output));
        out.feature_names = feature_names;
        if (!target_names.empty()) out.target_names = {target_names[output]};
        return out;
    }
};

/// Build a dataset from raw variable columns, prepending the bias column.
inline Dataset make_dataset(const Eigen::MatrixXd& variables, const Eigen::MatrixXd& targets,
                            std::vector<std::string> feature_names = {},
                            std::vector<std::string> target_names = {}) {
    Dataset d;
    d.features.resize(variables.rows(), variables.cols() + 1);
    d.features.col(0).setOnes();
    d.features.rightCols(variables.cols()) = variables;
    d.targets = targets;
    d.feature_names = std::move(feature_names);
    d.target_names = std::move(target_names);
    d.validate();
    return d;
}

}  // namespace relspec
