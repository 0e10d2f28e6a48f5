#include "dirfdr/precision.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "dirfdr/errors.hpp"
#include "dirfdr/lasso.hpp"
#include "dirfdr/parallel.hpp"

namespace dirfdr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPivotEps = 1e-12;
constexpr int kRefactorEvery = 100;

// Parametric dual simplex for one CLIME column as lambda decreases from 1.
//
// A vertex is described by the support S of w (signs s), the active rows A of
// the residual r = Sigma w - e_j (r_i = -lambda z_i on A), and M = Sigma[A, S],
// square and nonsingular. On a segment
//   w_S(lambda) = M^{-1} (e_A - lambda z),   y_A = M^{-T} s,
// where y is the dual vector with |Sigma y| <= 1 and (Sigma y)_S = s. A
// breakpoint occurs when an inactive row reaches its bound or a support entry
// reaches zero; a dual ratio test then picks the entering element.
class ColumnHomotopy {
public:
    ColumnHomotopy(const MatrixXd& sigma, Index column, int max_pivots)
        : sigma_(sigma), p_(sigma.rows()), j_(column), max_pivots_(max_pivots),
          pos_s_(static_cast<std::size_t>(p_), -1), pos_a_(static_cast<std::size_t>(p_), -1),
          sig_s_(p_, p_), sig_a_(p_, p_), minv_(p_, p_), y_(VectorXd::Zero(p_)),
          b_(VectorXd::Zero(p_)) {}

    ClimeColumnPath run(std::vector<double> lambdas) {
        ClimeColumnPath out;
        out.lambdas = std::move(lambdas);
        const auto count = out.lambdas.size();
        out.solutions = MatrixXd::Zero(p_, static_cast<Index>(count));
        out.feasible.assign(count, false);

        std::size_t next = 0;
        while (next < count && out.lambdas[next] >= 1.0) out.feasible[next++] = true;
        if (next == count) return out;

        double lambda = 1.0;
        Event event{EventKind::RowEnters, j_, 1.0};
        // Empty basis: w = 0, residual -e_j, dual 0.
        g_.setZero(p_);
        d_.setZero(p_);
        c_.setZero(p_);
        c_[j_] = -1.0;
        VectorXd a, r_star;
        while (true) {
            if (out.pivots >= max_pivots_) {
                throw NumericalError("CLIME column " + std::to_string(j_ + 1) +
                                     ": pivot limit reached at lambda=" + std::to_string(lambda) +
                                     " with " + std::to_string(k_) + " active entries");
            }
            ++out.pivots;
            r_star = c_ - lambda * d_;
            if (!pivot(event)) {
                out.infeasible_below = lambda;
                return out;
            }
            primal_vectors(lambda, r_star, a);
            const Event found = next_event(lambda, a, b_.head(k_), c_, d_);
            while (next < count && out.lambdas[next] >= found.lambda) {
                record(out.lambdas[next], out.solutions.col(static_cast<Index>(next)));
                out.feasible[next] = true;
                ++next;
            }
            if (next == count || found.kind == EventKind::None) {
                // Remaining targets all lie on the final segment.
                while (next < count) {
                    record(out.lambdas[next], out.solutions.col(static_cast<Index>(next)));
                    out.feasible[next] = true;
                    ++next;
                }
                return out;
            }
            lambda = found.lambda;
            event = found;
        }
    }

private:
    enum class EventKind { None, RowEnters, VarLeaves };
    struct Event {
        EventKind kind = EventKind::None;
        Index index = -1;     // row (RowEnters) or variable (VarLeaves)
        double sign = 0.0;    // z for an entering row
        double lambda = 0.0;
    };

    auto minv() { return minv_.topLeftCorner(k_, k_); }
    auto minv() const { return minv_.topLeftCorner(k_, k_); }
    // Sigma(:, S) and Sigma(:, A) as contiguous blocks; Sigma is symmetric, so
    // Sigma(A_r, S_c) = sig_s_(A_r, c) and Sigma(S_c, i) = sig_s_(i, c).
    auto cols_s() const { return sig_s_.leftCols(k_); }
    auto cols_a() const { return sig_a_.leftCols(k_); }
    Eigen::Map<const VectorXd> s_vec() const { return {s_.data(), k_}; }
    Eigen::Map<const VectorXd> z_vec() const { return {z_.data(), k_}; }

    void set_var(Index t, Index var, double s) {
        S_[static_cast<std::size_t>(t)] = var;
        s_[static_cast<std::size_t>(t)] = s;
        sig_s_.col(t) = sigma_.col(var);
        pos_s_[static_cast<std::size_t>(var)] = t;
    }

    void set_row(Index t, Index row, double z) {
        A_[static_cast<std::size_t>(t)] = row;
        z_[static_cast<std::size_t>(t)] = z;
        sig_a_.col(t) = sigma_.col(row);
        pos_a_[static_cast<std::size_t>(row)] = t;
    }

    MatrixXd basis_matrix() const {
        MatrixXd m(k_, k_);
        for (Index r = 0; r < k_; ++r) m.row(r) = cols_s().row(A_[static_cast<std::size_t>(r)]);
        return m;
    }

    void refactor() {
        updates_ = 0;
        refreshed_ = true;
        if (k_ > 0) minv() = basis_matrix().partialPivLu().inverse();
    }

    void after_update(double denom, double scale) {
        ++updates_;
        if (updates_ >= kRefactorEvery || std::abs(denom) <= 1e-10 * std::max(1.0, scale)) refactor();
    }

    // yv = M^{-T} Sigma(row, S)^T, already known to the caller.
    void add_border(Index row, double z, Index var, double s, const VectorXd& yv) {
        const Index n = k_;
        const VectorXd u = sig_a_.row(var).head(n).transpose();
        const VectorXd x = minv() * u;
        const double schur = sigma_(row, var) - sig_s_.row(row).head(n).dot(x);
        S_.push_back(var);
        s_.push_back(s);
        A_.push_back(row);
        z_.push_back(z);
        set_var(n, var, s);
        set_row(n, row, z);
        k_ = n + 1;
        if (std::abs(schur) <= 1e-12 * std::max(1.0, std::abs(sigma_(row, var)))) {
            refactor();
            return;
        }
        minv_.topLeftCorner(n, n).noalias() += (x / schur) * yv.transpose();
        minv_.col(n).head(n) = -x / schur;
        minv_.row(n).head(n) = -yv.transpose() / schur;
        minv_(n, n) = 1.0 / schur;
        const double alpha = (yv.dot(z_vec().head(n)) - z) / schur;
        b_.head(n) += alpha * x;
        b_[n] = -alpha;
        after_update(schur, std::abs(sigma_(row, var)));
    }

    // Moves support position t to the end (row t of the inverse).
    void swap_var(Index t, Index last) {
        if (t == last) return;
        std::swap(S_[static_cast<std::size_t>(t)], S_[static_cast<std::size_t>(last)]);
        std::swap(s_[static_cast<std::size_t>(t)], s_[static_cast<std::size_t>(last)]);
        sig_s_.col(t).swap(sig_s_.col(last));
        std::swap(b_[t], b_[last]);
        minv_.row(t).head(k_).swap(minv_.row(last).head(k_));
        pos_s_[static_cast<std::size_t>(S_[static_cast<std::size_t>(t)])] = t;
        pos_s_[static_cast<std::size_t>(S_[static_cast<std::size_t>(last)])] = last;
    }

    // Moves active-row position t to the end (column t of the inverse).
    void swap_row(Index t, Index last) {
        if (t == last) return;
        std::swap(A_[static_cast<std::size_t>(t)], A_[static_cast<std::size_t>(last)]);
        std::swap(z_[static_cast<std::size_t>(t)], z_[static_cast<std::size_t>(last)]);
        sig_a_.col(t).swap(sig_a_.col(last));
        std::swap(y_[t], y_[last]);
        minv_.col(t).head(k_).swap(minv_.col(last).head(k_));
        pos_a_[static_cast<std::size_t>(A_[static_cast<std::size_t>(t)])] = t;
        pos_a_[static_cast<std::size_t>(A_[static_cast<std::size_t>(last)])] = last;
    }

    void remove(Index ra, Index cs) {
        const Index n = k_;
        const double t = minv_(cs, ra);
        const bool stable = std::abs(t) > 1e-12 * minv().col(ra).cwiseAbs().maxCoeff();
        if (stable) {
            const VectorXd colv = minv().col(ra) / t;
            const Eigen::RowVectorXd rowv = minv().row(cs);
            minv().noalias() -= colv * rowv;
            const double b_cs = b_[cs];
            b_.head(n) -= b_cs * colv;
        }
        swap_var(cs, n - 1);
        swap_row(ra, n - 1);
        pos_s_[static_cast<std::size_t>(S_.back())] = -1;
        pos_a_[static_cast<std::size_t>(A_.back())] = -1;
        S_.pop_back();
        s_.pop_back();
        A_.pop_back();
        z_.pop_back();
        k_ = n - 1;
        if (!stable) {
            refactor();
            return;
        }
        after_update(t, 1.0);
    }

    // Row `ra` of M becomes Sigma(row, S). Since Sigma(old, S) M^{-1} = e_ra, the
    // update row is yv^T - e_ra^T with yv as in add_border.
    void replace_row(Index ra, Index row, double z, const VectorXd& yv) {
        const Index old = A_[static_cast<std::size_t>(ra)];
        Eigen::RowVectorXd rowv = yv.transpose();
        rowv[ra] -= 1.0;
        const VectorXd colv = minv().col(ra);
        const double denom = 1.0 + rowv[ra];
        const double dz = z - z_[static_cast<std::size_t>(ra)];
        const double rowv_z = rowv.dot(z_vec().transpose());
        pos_a_[static_cast<std::size_t>(old)] = -1;
        set_row(ra, row, z);
        if (std::abs(denom) <= 1e-10) {
            refactor();
            return;
        }
        minv().noalias() -= (colv / denom) * rowv;
        b_.head(k_) += dz * minv().col(ra) - (rowv_z / denom) * colv;
        after_update(denom, 1.0);
    }

    void replace_col(Index cs, Index var, double s) {
        const Index n = k_;
        const Index old = S_[static_cast<std::size_t>(cs)];
        VectorXd bu = minv() * sig_a_.row(var).head(n).transpose();
        bu[cs] -= 1.0;  // M^{-1} Sigma(A, old) = e_cs
        const Eigen::RowVectorXd rowv = minv().row(cs);
        const double denom = 1.0 + bu[cs];
        const double b_cs = b_[cs];
        pos_s_[static_cast<std::size_t>(old)] = -1;
        set_var(cs, var, s);
        if (std::abs(denom) <= 1e-10) {
            refactor();
            return;
        }
        minv().noalias() -= (bu / denom) * rowv;
        b_.head(n) -= (b_cs / denom) * bu;
        after_update(denom, 1.0);
    }

    // Segment after a pivot at `lambda`: w_S = a - lambda b, residual c - lambda d.
    // The primal solution is continuous at the breakpoint, so c follows from the
    // residual there unless the inverse was just rebuilt.
    void primal_vectors(double lambda, const VectorXd& r_star, VectorXd& a) {
        const Index pj = pos_a_[static_cast<std::size_t>(j_)];
        if (pj >= 0) {
            a = minv().col(pj);
        } else {
            a.setZero(k_);
        }
        if (refreshed_) b_.head(k_).noalias() = minv() * z_vec();
        d_.noalias() = cols_s() * b_.head(k_);
        if (refreshed_) {
            c_.noalias() = cols_s() * a;
            c_[j_] -= 1.0;
            refreshed_ = false;
        } else {
            c_ = r_star + lambda * d_;
        }
    }

    // Largest lambda' <= lambda at which the current basis stops being primal feasible.
    Event next_event(double lambda, const VectorXd& a, const Eigen::Ref<const VectorXd>& b,
                     const VectorXd& c, const VectorXd& d) const {
        Event best;
        const double degenerate = lambda * (1.0 - 1e-10);
        auto consider = [&](double at, EventKind kind, Index idx, double sign, bool fresh) {
            if (!(at > 0.0)) return;
            at = std::min(at, lambda);
            if (fresh && at >= degenerate) return;
            if (at > best.lambda) best = Event{kind, idx, sign, at};
        };
        for (Index t = 0; t < k_; ++t) {
            const double st = s_[static_cast<std::size_t>(t)];
            if (st * b[t] < 0.0) {
                const Index var = S_[static_cast<std::size_t>(t)];
                consider(a[t] / b[t], EventKind::VarLeaves, var, 0.0, var == fresh_var_);
            }
        }
        for (Index i = 0; i < p_; ++i) {
            if (pos_a_[static_cast<std::size_t>(i)] >= 0) continue;
            const bool fresh = (i == fresh_row_);
            if (1.0 + d[i] > kPivotEps) consider(c[i] / (1.0 + d[i]), EventKind::RowEnters, i, -1.0, fresh);
            if (1.0 - d[i] > kPivotEps) consider(-c[i] / (1.0 - d[i]), EventKind::RowEnters, i, 1.0, fresh);
        }
        return best;
    }

    // Dual ratio test and basis update; false when the dual is unbounded
    // (the primal program is infeasible below the current lambda).
    bool pivot(const Event& event) {
        const Index n = k_;
        const auto y = y_.head(n);
        const VectorXd& g = g_;

        VectorXd delta(n);
        VectorXd h;
        VectorXd yv;
        Index leaving_var_pos = -1;
        if (event.kind == EventKind::RowEnters) {
            yv.noalias() = minv().transpose() * sig_s_.row(event.index).head(n).transpose();
            delta = -event.sign * yv;
            h.noalias() = cols_a() * delta;
            h.noalias() += event.sign * sigma_.col(event.index);
        } else {
            leaving_var_pos = pos_s_[static_cast<std::size_t>(event.index)];
            const double sk = s_[static_cast<std::size_t>(leaving_var_pos)];
            delta = -sk * minv().row(leaving_var_pos).transpose();
            h.noalias() = cols_a() * delta;
        }

        double theta = std::numeric_limits<double>::infinity();
        double weight = 0.0;
        Index enter_var = -1;
        Index leave_row_pos = -1;
        double enter_sign = 0.0;
        auto offer = [&](double th, double mag, Index var, Index row_pos, double sign) {
            th = std::max(th, 0.0);
            const double tol = 1e-12 * (1.0 + std::abs(theta));
            if (th < theta - tol || (th <= theta + tol && mag > weight)) {
                theta = th;
                weight = mag;
                enter_var = var;
                leave_row_pos = row_pos;
                enter_sign = sign;
            }
        };
        for (Index m = 0; m < p_; ++m) {
            if (pos_s_[static_cast<std::size_t>(m)] >= 0 && m != event.index) continue;
            if (pos_s_[static_cast<std::size_t>(m)] >= 0 && event.kind != EventKind::VarLeaves) continue;
            const double hm = h[m];
            if (hm > kPivotEps) {
                offer((1.0 - g[m]) / hm, hm, m, -1, 1.0);
            } else if (hm < -kPivotEps) {
                offer((-1.0 - g[m]) / hm, -hm, m, -1, -1.0);
            }
        }
        for (Index r = 0; r < n; ++r) {
            if (y[r] * delta[r] < 0.0 && std::abs(delta[r]) > kPivotEps) {
                offer(-y[r] / delta[r], std::abs(delta[r]), -1, r, 0.0);
            }
        }
        if (!std::isfinite(theta)) return false;

        // Dual step; the entering row (if any) takes dual value sign * theta.
        y_.head(n) += theta * delta;
        g_ += theta * h;
        fresh_var_ = -1;
        fresh_row_ = -1;
        if (event.kind == EventKind::RowEnters) {
            if (enter_var >= 0) {
                add_border(event.index, event.sign, enter_var, enter_sign, yv);
                y_[n] = event.sign * theta;
                fresh_var_ = enter_var;
            } else {
                fresh_row_ = A_[static_cast<std::size_t>(leave_row_pos)];
                replace_row(leave_row_pos, event.index, event.sign, yv);
                y_[leave_row_pos] = event.sign * theta;
            }
        } else {
            if (enter_var >= 0) {
                replace_col(leaving_var_pos, enter_var, enter_sign);
                fresh_var_ = enter_var;
            } else {
                fresh_row_ = A_[static_cast<std::size_t>(leave_row_pos)];
                remove(leave_row_pos, leaving_var_pos);
            }
        }
        if (refreshed_) {
            y_.head(k_).noalias() = minv().transpose() * s_vec();
            g_.noalias() = cols_a() * y_.head(k_);
        }
        return true;
    }

    // Solution at lambda with one step of iterative refinement.
    void record(double lambda, Eigen::Ref<VectorXd> out) const {
        out.setZero();
        if (k_ == 0) return;
        VectorXd rhs = -lambda * z_vec();
        const Index pj = pos_a_[static_cast<std::size_t>(j_)];
        if (pj >= 0) rhs[pj] += 1.0;
        VectorXd w = minv() * rhs;
        const VectorXd full = cols_s() * w;
        VectorXd resid(k_);
        for (Index r = 0; r < k_; ++r) resid[r] = rhs[r] - full[A_[static_cast<std::size_t>(r)]];
        w.noalias() += minv() * resid;
        for (Index t = 0; t < k_; ++t) out[S_[static_cast<std::size_t>(t)]] = w[t];
    }

    const MatrixXd& sigma_;
    Index p_;
    Index j_;
    int max_pivots_;
    std::vector<Index> S_, A_;
    std::vector<double> s_, z_;
    std::vector<Index> pos_s_, pos_a_;
    MatrixXd sig_s_, sig_a_;
    MatrixXd minv_;  // p x p buffer; the leading k x k block is Sigma(A, S)^{-1}
    Index k_ = 0;
    VectorXd y_;          // dual values on the active rows, y = M^{-T} s
    VectorXd g_;          // Sigma y
    VectorXd b_, c_, d_;  // current segment, see primal_vectors
    int updates_ = 0;
    bool refreshed_ = false;
    Index fresh_var_ = -1;
    Index fresh_row_ = -1;
};

void check_sigma(const MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
        throw DataError("CLIME: Sigma must be a nonempty square matrix");
    }
    if (!sigma.allFinite()) throw DataError("CLIME: Sigma has non-finite entries");
}

int pivot_budget(const ClimeOptions& options, Index p) {
    return options.max_pivots > 0 ? options.max_pivots : static_cast<int>(50 * p + 500);
}

}  // namespace

ClimeColumnPath clime_column_path(const MatrixXd& sigma, Index column, std::vector<double> lambdas,
                                  const ClimeOptions& options) {
    check_sigma(sigma);
    if (column < 0 || column >= sigma.cols()) throw DataError("CLIME: column index out of range");
    for (std::size_t t = 0; t < lambdas.size(); ++t) {
        if (!(lambdas[t] > 0.0) || !std::isfinite(lambdas[t])) {
            throw DomainError("CLIME: lambda_n must be positive and finite");
        }
        if (t > 0 && lambdas[t] > lambdas[t - 1]) {
            throw DomainError("CLIME: lambda values must be in descending order");
        }
    }
    ColumnHomotopy solver(sigma, column, pivot_budget(options, sigma.rows()));
    return solver.run(std::move(lambdas));
}

VectorXd clime_column(const MatrixXd& sigma, Index column, double lambda, const ClimeOptions& options) {
    const auto path = clime_column_path(sigma, column, {lambda}, options);
    if (!path.feasible[0]) {
        throw NumericalError("CLIME column " + std::to_string(column + 1) +
                             " is infeasible at lambda_n=" + std::to_string(lambda) +
                             " (feasible only above " + std::to_string(path.infeasible_below) + ")");
    }
    return path.solutions.col(0);
}

namespace {

void finalize_estimate(const MatrixXd& sigma, PrecisionEstimate& est) {
    const Index p = sigma.rows();
    for (Index j = 0; j < p; ++j) {
        if (est.theta_hat(j, j) <= kThetaDiagonalFloor) {
            est.clamped_diagonals.push_back(j);
            est.warnings.push_back("diagonal entry " + std::to_string(j + 1) + " (" +
                                   std::to_string(est.theta_hat(j, j)) +
                                   ") raised to the positivity floor");
            est.theta_hat(j, j) = kThetaDiagonalFloor;
        }
    }
    const MatrixXd resid = sigma * est.theta_hat - MatrixXd::Identity(p, p);
    est.max_constraint_violation = resid.cwiseAbs().maxCoeff();
    est.column_l1_norms = est.theta_hat.cwiseAbs().colwise().sum().transpose();
}

}  // namespace

PrecisionEstimate clime(const MatrixXd& sigma, double lambda, const ClimeOptions& options) {
    check_sigma(sigma);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw DomainError("CLIME: lambda_n must be positive and finite");
    }
    const Index p = sigma.rows();
    PrecisionEstimate est;
    est.lambda_n = lambda;
    est.theta_hat = MatrixXd::Zero(p, p);
    parallel_for(static_cast<std::size_t>(p), options.jobs, [&](std::size_t j) {
        est.theta_hat.col(static_cast<Index>(j)) =
            clime_column(sigma, static_cast<Index>(j), lambda, options);
    });
    finalize_estimate(sigma, est);
    return est;
}

std::vector<double> default_clime_grid() {
    return log_grid(1.0, 0.01, 20);
}

ClimeCvResult cv_clime(const Dataset& data, GlmFamily family, const VectorXd& beta_hat,
                       const std::vector<double>& grid, std::uint64_t seed,
                       const ClimeOptions& options) {
    if (data.n() < 2) throw DataError("cv_clime: need at least 2 rows");
    if (grid.empty()) throw DomainError("cv_clime: empty grid");

    ClimeCvResult cv;
    cv.grid = grid;
    std::sort(cv.grid.begin(), cv.grid.end(), std::greater<>());
    const auto count = cv.grid.size();

    const auto labels = fold_labels(static_cast<std::size_t>(data.n()), 2, seed);
    std::vector<Index> half[2];
    for (std::size_t i = 0; i < labels.size(); ++i) half[labels[i]].push_back(static_cast<Index>(i));
    const MatrixXd sig[2] = {neg_hessian(data.subset(half[0]), beta_hat, family),
                             neg_hessian(data.subset(half[1]), beta_hat, family)};
    const Index p = data.p();

    // Squared Frobenius loss per (orientation, column, grid point); NaN marks infeasible.
    std::vector<MatrixXd> col_loss(2, MatrixXd::Zero(p, static_cast<Index>(count)));
    for (int orient = 0; orient < 2; ++orient) {
        const MatrixXd& train = sig[orient];
        const MatrixXd& val = sig[1 - orient];
        parallel_for(static_cast<std::size_t>(p), options.jobs, [&](std::size_t jj) {
            const auto j = static_cast<Index>(jj);
            const auto path = clime_column_path(train, j, cv.grid, options);
            for (std::size_t g = 0; g < count; ++g) {
                if (!path.feasible[g]) {
                    col_loss[orient](j, static_cast<Index>(g)) = std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
                VectorXd r = val * path.solutions.col(static_cast<Index>(g));
                r[j] -= 1.0;
                col_loss[orient](j, static_cast<Index>(g)) = r.squaredNorm();
            }
        });
    }

    cv.loss.assign(count, std::numeric_limits<double>::quiet_NaN());
    std::size_t skipped = 0;
    for (std::size_t g = 0; g < count; ++g) {
        const double l0 = col_loss[0].col(static_cast<Index>(g)).sum();
        const double l1 = col_loss[1].col(static_cast<Index>(g)).sum();
        if (std::isnan(l0) || std::isnan(l1)) {
            ++skipped;
            cv.warnings.push_back("lambda_n=" + std::to_string(cv.grid[g]) +
                                  " skipped: CLIME infeasible on a training half");
            continue;
        }
        cv.loss[g] = 0.5 * (std::sqrt(l0) + std::sqrt(l1));
    }
    if (skipped == count) throw NumericalError("cv_clime: CLIME infeasible at every grid value");

    std::size_t best = count;
    for (std::size_t g = 0; g < count; ++g) {
        if (std::isnan(cv.loss[g])) continue;
        if (best == count || cv.loss[g] < cv.loss[best]) best = g;
    }
    cv.selected_lambda = cv.grid[best];
    const MatrixXd full = neg_hessian(data, beta_hat, family);
    cv.estimate = clime(full, cv.selected_lambda, options);
    for (const auto& w : cv.estimate.warnings) cv.warnings.push_back(w);
    return cv;
}

}  // namespace dirfdr
