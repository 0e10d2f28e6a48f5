#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dirfdr/families.hpp"

namespace dirfdr {

struct LassoOptions {
    /// Outer loop stops once the KKT residual falls below this.
    double kkt_tolerance = 1e-8;
    int max_outer = 100;
    int max_inner = 10000;
    int max_halvings = 50;
};

struct LassoFit {
    Eigen::VectorXd beta_hat;
    double lambda = 0.0;
    int iterations = 0;
    double kkt_violation = 0.0;
    bool converged = false;
    /// Penalized objective after each outer iteration (index 0 is the start point).
    std::vector<double> objective_trace;
    std::vector<std::string> warnings;
};

/// -loglik(beta) + lambda * ||beta||_1.
double penalized_objective(const Dataset& data, GlmFamily family, const Eigen::VectorXd& beta,
                           double lambda);

/// Max-norm residual of the subgradient optimality conditions, evaluated through score().
double kkt_violation(const Dataset& data, GlmFamily family, const Eigen::VectorXd& beta,
                     double lambda);

/// l1-penalized maximum likelihood by proximal Newton with coordinate descent.
/// `init` is required for the exponential family (the origin is outside its domain).
LassoFit fit_lasso(const Dataset& data, GlmFamily family, double lambda,
                   const std::optional<Eigen::VectorXd>& init = std::nullopt,
                   const LassoOptions& options = {});

/// Smallest lambda whose solution is zero: ||(1/n) X'(y - bdot(0))||_inf.
double lambda_max(const Dataset& data, GlmFamily family);

/// `size` log-spaced values from `top` down to `min_ratio * top`.
std::vector<double> log_grid(double top, double min_ratio, std::size_t size);

/// Fits each lambda of a descending grid, warm-starting from the previous solution.
std::vector<LassoFit> fit_lasso_path(const Dataset& data, GlmFamily family,
                                     const std::vector<double>& lambdas,
                                     const std::optional<Eigen::VectorXd>& init = std::nullopt,
                                     const LassoOptions& options = {});

struct CvLassoOptions {
    std::size_t folds = 5;
    std::size_t grid_size = 100;
    double min_ratio = 1e-3;
    std::uint64_t seed = 0;
    /// Folds evaluated concurrently; results do not depend on this.
    unsigned jobs = 1;
    LassoOptions solver{};
};

struct CvResult {
    std::vector<double> lambda_grid;
    std::vector<double> cv_loss;
    double selected_lambda = 0.0;
    std::size_t selected_index = 0;
    std::uint64_t fold_assignment_seed = 0;
    std::size_t folds_used = 0;
    std::vector<std::string> warnings;
};

/// K-fold cross-validation on mean held-out negative log-likelihood, then a
/// refit on all rows at the selected lambda.
std::pair<CvResult, LassoFit> cv_lasso(const Dataset& data, GlmFamily family,
                                       const CvLassoOptions& options = {});

/// Fold label (0..folds-1) of each row under the seeded assignment used by cv_lasso.
std::vector<std::size_t> fold_labels(std::size_t n, std::size_t folds, std::uint64_t seed);

}  // namespace dirfdr
