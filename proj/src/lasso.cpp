#include "dirfdr/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dirfdr/errors.hpp"
#include "dirfdr/parallel.hpp"
#include "dirfdr/rng.hpp"

namespace dirfdr {

namespace {

// Curvature floor for the quadratic model only; the line search and the KKT
// check always use the exact likelihood.
constexpr double kCurvatureFloor = 1e-6;

double soft_threshold(double u, double lambda) {
    if (u > lambda) return u - lambda;
    if (u < -lambda) return u + lambda;
    return 0.0;
}

// Smooth part -loglik given the linear predictor; +inf outside the domain.
double neg_loglik_from_eta(const Eigen::VectorXd& eta, const Eigen::VectorXd& y, GlmFamily family) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        if (!in_domain(family, eta[i])) return std::numeric_limits<double>::infinity();
        total += family_b(family, eta[i]) - y[i] * eta[i];
    }
    return total / static_cast<double>(eta.size());
}

double kkt_from_gradient(const Eigen::VectorXd& grad, const Eigen::VectorXd& beta, double lambda) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double v = beta[j] != 0.0 ? std::abs(grad[j] + lambda * (beta[j] > 0 ? 1.0 : -1.0))
                                        : std::max(0.0, std::abs(grad[j]) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

// Gradient of -loglik at the given linear predictor.
Eigen::VectorXd neg_gradient_from_eta(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& eta, GlmFamily family) {
    Eigen::VectorXd resid(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) resid[i] = family_bdot(family, eta[i]) - y[i];
    return x.transpose() * resid / static_cast<double>(eta.size());
}

// Slow coordinate descent on an active set usually means the sign pattern has
// settled; one exact solve of the sign-fixed model then finishes the job.
constexpr int kPolishAfter = 3;

// Moves toward the minimizer of the quadratic model over the active set with
// signs held fixed, stopping where the first active coefficient reaches zero.
void newton_polish(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, Eigen::VectorXd& q,
                   Eigen::VectorXd& beta, const std::vector<Eigen::Index>& candidates, double lambda) {
    std::vector<Eigen::Index> active;
    for (auto j : candidates) {
        if (beta[j] != 0.0) active.push_back(j);
    }
    const auto k = static_cast<Eigen::Index>(active.size());
    if (k == 0) return;
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd xa(n, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index t = 0; t < k; ++t) {
        const Eigen::Index j = active[static_cast<std::size_t>(t)];
        xa.col(t) = x.col(j);
        rhs[t] = x.col(j).dot(q) - lambda * (beta[j] > 0.0 ? 1.0 : -1.0);
    }
    const Eigen::MatrixXd wx = w.asDiagonal() * xa;
    const Eigen::MatrixXd h = xa.transpose() * wx;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
    Eigen::VectorXd step = ldlt.solve(rhs);
    if (!step.allFinite()) return;
    double frac = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index t = 0; t < k; ++t) {
        const double b = beta[active[static_cast<std::size_t>(t)]];
        if ((b + step[t]) * b <= 0.0) {
            const double at = -b / step[t];
            if (at < frac) {
                frac = at;
                blocking = t;
            }
        }
    }
    step *= frac;
    for (Eigen::Index t = 0; t < k; ++t) beta[active[static_cast<std::size_t>(t)]] += step[t];
    if (blocking >= 0) {
        // Land exactly on zero and account for the rounding in the residual.
        const Eigen::Index j = active[static_cast<std::size_t>(blocking)];
        step[blocking] -= beta[j];
        beta[j] = 0.0;
    }
    q.noalias() -= wx * step;
}

// Coordinate descent on the penalized quadratic model
//   g'(b - b0) + 1/2 (b - b0)' X'WX (b - b0) + lambda ||b||_1
// tracking q_i = -(per-row model gradient contribution). Returns sweeps used.
int coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, Eigen::VectorXd& q,
                       Eigen::VectorXd& beta, const Eigen::VectorXd& col_curv, double lambda,
                       double tol, int max_sweeps) {
    const Eigen::Index p = x.cols();
    const Eigen::Index n = x.rows();
    std::vector<Eigen::Index> active;
    int sweeps = 0;

    auto update = [&](Eigen::Index j) -> double {
        const double v = col_curv[j];
        if (v <= 0.0) {
            const double old = beta[j];
            beta[j] = 0.0;
            return old == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        }
        const double* xj = x.col(j).data();
        double u = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) u += xj[i] * q[i];
        const double old = beta[j];
        const double fresh = soft_threshold(u + v * old, lambda) / v;
        const double delta = fresh - old;
        if (delta != 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) q[i] -= w[i] * xj[i] * delta;
            beta[j] = fresh;
        }
        return v * std::abs(delta);
    };

    while (sweeps < max_sweeps) {
        double change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) change = std::max(change, update(j));
        ++sweeps;
        if (change <= tol) break;
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j) {
            if (beta[j] != 0.0) active.push_back(j);
        }
        int active_sweeps = 0;
        while (sweeps < max_sweeps) {
            double inner = 0.0;
            for (auto j : active) inner = std::max(inner, update(j));
            ++sweeps;
            if (inner <= tol) break;
            if (++active_sweeps % kPolishAfter == 0) newton_polish(x, w, q, beta, active, lambda);
        }
    }
    return sweeps;
}

}  // namespace

double penalized_objective(const Dataset& data, GlmFamily family, const Eigen::VectorXd& beta,
                           double lambda) {
    return -log_likelihood(data, beta, family) + lambda * beta.lpNorm<1>();
}

double kkt_violation(const Dataset& data, GlmFamily family, const Eigen::VectorXd& beta,
                     double lambda) {
    const Eigen::VectorXd grad = -score(data, beta, family);
    return kkt_from_gradient(grad, beta, lambda);
}

LassoFit fit_lasso(const Dataset& data, GlmFamily family, double lambda,
                   const std::optional<Eigen::VectorXd>& init, const LassoOptions& options) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw DomainError("fit_lasso: lambda must be finite and nonnegative");
    }
    const Eigen::MatrixXd& x = data.design();
    const Eigen::VectorXd& y = data.response();
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();

    LassoFit fit;
    fit.lambda = lambda;
    fit.beta_hat = init ? *init : Eigen::VectorXd::Zero(p);
    if (fit.beta_hat.size() != p) {
        throw DataError("fit_lasso: initial vector has length " + std::to_string(fit.beta_hat.size()) +
                        ", expected " + std::to_string(p));
    }
    Eigen::VectorXd eta = x * fit.beta_hat;
    double smooth = neg_loglik_from_eta(eta, y, family);
    if (!std::isfinite(smooth)) {
        throw DomainError("fit_lasso: starting point lies outside the domain of the " +
                          std::string(family_name(family)) +
                          " family (the exponential family needs an explicit init)");
    }
    double objective = smooth + lambda * fit.beta_hat.lpNorm<1>();
    fit.objective_trace.push_back(objective);

    Eigen::VectorXd w(n);
    Eigen::VectorXd q(n);
    Eigen::VectorXd col_curv(p);
    Eigen::VectorXd candidate(p);
    Eigen::VectorXd eta_dir(n);
    Eigen::VectorXd eta_new(n);
    const double inner_tol = 0.1 * options.kkt_tolerance;

    for (int outer = 0; outer < options.max_outer; ++outer) {
        const Eigen::VectorXd grad = neg_gradient_from_eta(x, y, eta, family);
        fit.kkt_violation = kkt_from_gradient(grad, fit.beta_hat, lambda);
        if (fit.kkt_violation <= options.kkt_tolerance) {
            fit.converged = true;
            break;
        }
        ++fit.iterations;

        for (Eigen::Index i = 0; i < n; ++i) {
            const double curv = std::max(family_bddot(family, eta[i]), kCurvatureFloor);
            w[i] = curv / static_cast<double>(n);
            q[i] = (y[i] - family_bdot(family, eta[i])) / static_cast<double>(n);
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            const double* xj = x.col(j).data();
            double v = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) v += w[i] * xj[i] * xj[i];
            col_curv[j] = v;
        }
        candidate = fit.beta_hat;
        coordinate_descent(x, w, q, candidate, col_curv, lambda, inner_tol, options.max_inner);

        const Eigen::VectorXd direction = candidate - fit.beta_hat;
        eta_dir.noalias() = x * direction;
        double step = 1.0;
        bool accepted = false;
        double new_objective = objective;
        for (int h = 0; h <= options.max_halvings; ++h) {
            eta_new = eta + step * eta_dir;
            const double s = neg_loglik_from_eta(eta_new, y, family);
            if (std::isfinite(s)) {
                new_objective = s + lambda * (fit.beta_hat + step * direction).lpNorm<1>();
                if (new_objective <= objective) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            fit.warnings.push_back("line search could not decrease the objective at outer iteration " +
                                   std::to_string(outer + 1));
            break;
        }
        fit.beta_hat += step * direction;
        eta = eta_new;
        objective = new_objective;
        fit.objective_trace.push_back(objective);
    }
    if (!fit.converged) {
        const Eigen::VectorXd grad = neg_gradient_from_eta(x, y, eta, family);
        fit.kkt_violation = kkt_from_gradient(grad, fit.beta_hat, lambda);
        fit.converged = fit.kkt_violation <= options.kkt_tolerance;
        if (!fit.converged) {
            fit.warnings.push_back("lasso did not converge at lambda=" + std::to_string(lambda) +
                                   " (KKT residual " + std::to_string(fit.kkt_violation) + ")");
        }
    }
    if (!fit.beta_hat.allFinite()) throw NumericalError("fit_lasso: non-finite coefficients");
    return fit;
}

double lambda_max(const Dataset& data, GlmFamily family) {
    if (family == GlmFamily::Exponential) {
        throw DomainError("lambda_max: the exponential family has no finite lambda_max "
                          "(the zero vector is outside its domain)");
    }
    const double mean0 = family_bdot(family, 0.0);
    const Eigen::VectorXd centered = data.response().array() - mean0;
    const Eigen::VectorXd g = data.design().transpose() * centered / static_cast<double>(data.n());
    return g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
}

std::vector<double> log_grid(double top, double min_ratio, std::size_t size) {
    std::vector<double> grid(size);
    if (size == 0) return grid;
    if (size == 1) {
        grid[0] = top;
        return grid;
    }
    const double log_top = std::log(top);
    const double log_bottom = std::log(top * min_ratio);
    for (std::size_t k = 0; k < size; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(size - 1);
        grid[k] = std::exp(log_top + frac * (log_bottom - log_top));
    }
    grid.front() = top;
    return grid;
}

std::vector<LassoFit> fit_lasso_path(const Dataset& data, GlmFamily family,
                                     const std::vector<double>& lambdas,
                                     const std::optional<Eigen::VectorXd>& init,
                                     const LassoOptions& options) {
    std::vector<LassoFit> fits;
    fits.reserve(lambdas.size());
    std::optional<Eigen::VectorXd> start = init;
    for (double lambda : lambdas) {
        fits.push_back(fit_lasso(data, family, lambda, start, options));
        start = fits.back().beta_hat;
    }
    return fits;
}

std::vector<std::size_t> fold_labels(std::size_t n, std::size_t folds, std::uint64_t seed) {
    const auto perm = seeded_permutation(n, seed);
    std::vector<std::size_t> labels(n);
    for (std::size_t k = 0; k < n; ++k) labels[perm[k]] = k % folds;
    return labels;
}

std::pair<CvResult, LassoFit> cv_lasso(const Dataset& data, GlmFamily family,
                                       const CvLassoOptions& options) {
    const auto n = static_cast<std::size_t>(data.n());
    if (options.folds < 2) throw DomainError("cv_lasso: need at least 2 folds");
    if (n < options.folds) {
        throw DataError("cv_lasso: " + std::to_string(n) + " rows cannot fill " +
                        std::to_string(options.folds) + " folds");
    }
    if (options.grid_size == 0) throw DomainError("cv_lasso: empty lambda grid");

    CvResult cv;
    cv.fold_assignment_seed = options.seed;
    const double top = lambda_max(data, family);
    if (!(top > 0.0)) {
        // The zero vector is already optimal for every lambda.
        cv.lambda_grid = {0.0};
        cv.cv_loss = {0.0};
        cv.warnings.push_back("lambda_max is zero; returning the zero fit");
        LassoFit zero = fit_lasso(data, family, 0.0, std::nullopt, options.solver);
        return {cv, zero};
    }
    cv.lambda_grid = log_grid(top, options.min_ratio, options.grid_size);

    const auto labels = fold_labels(n, options.folds, options.seed);
    std::vector<std::vector<double>> fold_loss(options.folds);
    std::vector<std::string> fold_warning(options.folds);

    parallel_for(options.folds, options.jobs, [&](std::size_t fold) {
        std::vector<Eigen::Index> train;
        std::vector<Eigen::Index> held;
        for (std::size_t i = 0; i < n; ++i) {
            (labels[i] == fold ? held : train).push_back(static_cast<Eigen::Index>(i));
        }
        const Dataset train_data = data.subset(train);
        const Dataset held_data = data.subset(held);
        if (family == GlmFamily::Logistic) {
            const auto& yt = train_data.response();
            if (yt.minCoeff() == yt.maxCoeff()) {
                fold_warning[fold] = "fold " + std::to_string(fold + 1) +
                                     " skipped: constant response in the training rows";
                return;
            }
        }
        const auto path = fit_lasso_path(train_data, family, cv.lambda_grid, std::nullopt,
                                         options.solver);
        auto& losses = fold_loss[fold];
        losses.reserve(path.size());
        for (const auto& fit : path) {
            const Eigen::VectorXd eta = held_data.design() * fit.beta_hat;
            losses.push_back(neg_loglik_from_eta(eta, held_data.response(), family));
        }
    });

    cv.cv_loss.assign(cv.lambda_grid.size(), 0.0);
    for (std::size_t fold = 0; fold < options.folds; ++fold) {
        if (!fold_warning[fold].empty()) cv.warnings.push_back(fold_warning[fold]);
        if (fold_loss[fold].empty()) continue;
        ++cv.folds_used;
        for (std::size_t g = 0; g < cv.lambda_grid.size(); ++g) cv.cv_loss[g] += fold_loss[fold][g];
    }
    if (cv.folds_used == 0) throw NumericalError("cv_lasso: every fold was degenerate");
    for (auto& v : cv.cv_loss) v /= static_cast<double>(cv.folds_used);

    // Strict comparison while scanning the descending grid keeps the largest
    // lambda among tied minimizers.
    std::size_t best = 0;
    for (std::size_t g = 1; g < cv.cv_loss.size(); ++g) {
        if (cv.cv_loss[g] < cv.cv_loss[best]) best = g;
    }
    cv.selected_index = best;
    cv.selected_lambda = cv.lambda_grid[best];

    const std::vector<double> refit_grid(cv.lambda_grid.begin(),
                                         cv.lambda_grid.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    auto path = fit_lasso_path(data, family, refit_grid, std::nullopt, options.solver);
    LassoFit final_fit = std::move(path.back());
    return {std::move(cv), std::move(final_fit)};
}

}  // namespace dirfdr
