#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "dirfdr/inference.hpp"

namespace dirfdr {

/// True coefficients with their support and signs.
struct GroundTruth {
    Eigen::VectorXd beta_true;
    std::vector<Eigen::Index> support;
    std::vector<int> signs_true;  // length p, in {-1, 0, +1}

    explicit GroundTruth(Eigen::VectorXd beta);
    std::size_t s0() const { return support.size(); }
};

/// Wrong-sign selections over max(|S_hat|, 1). Selecting a true zero always counts as wrong.
double directional_fdp(const SelectionResult& sel, const GroundTruth& truth);

/// Number of wrong-sign selections; FWER indicator is (count >= 1).
std::size_t directional_fdv_count(const SelectionResult& sel, const GroundTruth& truth);

/// Correct-sign selections over max(|S|, 1).
double directional_power(const SelectionResult& sel, const GroundTruth& truth);

}  // namespace dirfdr
