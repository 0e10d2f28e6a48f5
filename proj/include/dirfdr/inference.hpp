#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dirfdr/families.hpp"
#include "dirfdr/lasso.hpp"
#include "dirfdr/precision.hpp"

namespace dirfdr {

struct DebiasedFit {
    Eigen::VectorXd beta_hat;
    Eigen::VectorXd beta_debiased;
    Eigen::VectorXd theta_diag;
    Eigen::Index n = 0;
    /// T_j = sqrt(n) * beta_debiased_j / sqrt(theta_diag_j)
    Eigen::VectorXd statistics;
};

/// One-step correction beta + Theta * score(beta), with standardized statistics.
DebiasedFit debias(const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& theta,
                   const Dataset& data, GlmFamily family);

inline DebiasedFit debias(const LassoFit& fit, const PrecisionEstimate& theta, const Dataset& data,
                          GlmFamily family) {
    return debias(fit.beta_hat, theta.theta_hat, data, family);
}

struct Threshold {
    double value = 0.0;
    bool fallback_used = false;
};

/// Smallest t in [0, t_p] with p G(t) / max(#{|T_j| >= t}, 1) <= alpha, found by
/// enumerating the intervals between order statistics of |T|; sqrt(2 ln p) when
/// no such t exists.
Threshold gmt_threshold(const Eigen::VectorXd& statistics, double alpha);

/// G^{-1}(u / p), for FDV control (u < p) or FWER control (u < 1).
double fdv_threshold(double u, std::size_t p);

struct SelectionResult {
    double threshold = 0.0;
    std::vector<Eigen::Index> selected;  // ascending
    std::vector<int> signs;              // parallel to `selected`, each +1 or -1
    bool fallback_used = false;
    /// Set when a zero statistic was selected (threshold 0) and given sign +1.
    bool zero_sign_convention_used = false;
};

/// Rejects every j with |stat_j| >= threshold and takes sign(stat_j) as its direction.
SelectionResult select_at_threshold(const Eigen::VectorXd& statistics, double threshold);

SelectionResult gmt_select(const DebiasedFit& fit, double alpha);
SelectionResult gmt_fdv_select(const DebiasedFit& fit, double u);

struct TwoSampleStatistics {
    Eigen::VectorXd m_statistics;
    Eigen::Index n1 = 0;
    Eigen::Index n2 = 0;
};

/// M_j = (bd1_j - bd2_j) / sqrt(theta1_jj / n1 + theta2_jj / n2) on debiased coefficients.
TwoSampleStatistics two_sample_statistics(const DebiasedFit& first, const DebiasedFit& second);

SelectionResult gmt2_select(const TwoSampleStatistics& m, double alpha);
SelectionResult gmt2_fdv_select(const TwoSampleStatistics& m, double u);

}  // namespace dirfdr
