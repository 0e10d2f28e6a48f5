#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dirfdr/families.hpp"

namespace dirfdr {

struct ClimeOptions {
    /// Pivot budget per column; 0 picks 50 * p + 500.
    int max_pivots = 0;
    /// Columns solved concurrently; the result does not depend on this.
    unsigned jobs = 1;
};

/// Solutions of one CLIME column program
///   min ||w||_1  s.t.  ||Sigma w - e_j||_inf <= lambda
/// at a descending list of lambda values, from one parametric pass.
struct ClimeColumnPath {
    std::vector<double> lambdas;      // as requested, descending
    Eigen::MatrixXd solutions;        // p x lambdas.size()
    std::vector<bool> feasible;       // per lambda
    /// Program is infeasible for every lambda below this value (0 when never).
    double infeasible_below = 0.0;
    int pivots = 0;
};

ClimeColumnPath clime_column_path(const Eigen::MatrixXd& sigma, Eigen::Index column,
                                  std::vector<double> lambdas, const ClimeOptions& options = {});

/// Single column at a single lambda. Throws NumericalError naming the column
/// when the program is infeasible.
Eigen::VectorXd clime_column(const Eigen::MatrixXd& sigma, Eigen::Index column, double lambda,
                             const ClimeOptions& options = {});

struct PrecisionEstimate {
    Eigen::MatrixXd theta_hat;
    double lambda_n = 0.0;
    /// max_j ||Sigma theta_j - e_j||_inf of the returned matrix.
    double max_constraint_violation = 0.0;
    Eigen::VectorXd column_l1_norms;
    /// Columns whose diagonal entry was raised to the positivity floor.
    std::vector<Eigen::Index> clamped_diagonals;
    std::vector<std::string> warnings;
};

/// Floor applied to non-positive diagonal entries of the estimate.
inline constexpr double kThetaDiagonalFloor = 1e-8;

/// Column-by-column CLIME. No symmetrization is applied.
PrecisionEstimate clime(const Eigen::MatrixXd& sigma, double lambda,
                        const ClimeOptions& options = {});

/// 20 log-spaced values in [0.01, 1].
std::vector<double> default_clime_grid();

struct ClimeCvResult {
    std::vector<double> grid;   // descending
    std::vector<double> loss;   // NaN where the grid point was skipped
    double selected_lambda = 0.0;
    PrecisionEstimate estimate;
    std::vector<std::string> warnings;
};

/// Two-fold cross-validation of lambda_n. Each half builds its negative Hessian
/// at beta_hat; the loss is ||Sigma_val Theta_train - I||_F averaged over both
/// orientations. The final estimate is refit on all rows.
ClimeCvResult cv_clime(const Dataset& data, GlmFamily family, const Eigen::VectorXd& beta_hat,
                       const std::vector<double>& grid, std::uint64_t seed,
                       const ClimeOptions& options = {});

}  // namespace dirfdr
