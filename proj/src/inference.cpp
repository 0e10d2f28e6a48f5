#include "dirfdr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "dirfdr/errors.hpp"
#include "dirfdr/numerics.hpp"

namespace dirfdr {

DebiasedFit debias(const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& theta,
                   const Dataset& data, GlmFamily family) {
    const Eigen::Index p = data.p();
    if (beta_hat.size() != p || theta.rows() != p || theta.cols() != p) {
        throw DataError("debias: dimension mismatch (p=" + std::to_string(p) + ", beta " +
                        std::to_string(beta_hat.size()) + ", theta " + std::to_string(theta.rows()) +
                        "x" + std::to_string(theta.cols()) + ")");
    }
    const Eigen::VectorXd grad = score(data, beta_hat, family);
    if (!grad.allFinite()) throw NumericalError("debias: non-finite score");

    DebiasedFit out;
    out.beta_hat = beta_hat;
    out.n = data.n();
    out.theta_diag = theta.diagonal();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(out.theta_diag[j] > 0.0)) {
            throw DomainError("debias: theta diagonal entry " + std::to_string(j + 1) +
                              " is not positive");
        }
    }
    out.beta_debiased = beta_hat + theta * grad;
    const double root_n = std::sqrt(static_cast<double>(out.n));
    out.statistics = root_n * out.beta_debiased.array() / out.theta_diag.array().sqrt();
    return out;
}

Threshold gmt_threshold(const Eigen::VectorXd& statistics, double alpha) {
    const auto p = static_cast<std::size_t>(statistics.size());
    if (p == 0) throw DomainError("gmt_threshold: empty statistics vector");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("gmt_threshold: alpha must lie in (0, 1)");
    if (!statistics.allFinite()) throw DomainError("gmt_threshold: non-finite statistic");
    const double cap = scan_cap(p);

    std::vector<double> mags(p);
    for (std::size_t j = 0; j < p; ++j) mags[j] = std::abs(statistics[static_cast<Eigen::Index>(j)]);
    std::sort(mags.begin(), mags.end(), std::greater<>());
    auto order_stat = [&](std::size_t m) { return m == 0 ? cap : (m <= p ? mags[m - 1] : 0.0); };

    // On (a_{m+1}, a_m] exactly m statistics satisfy |T_j| >= t, and the
    // condition reads G(t) <= alpha * max(m, 1) / p. The interval above a_1
    // (m = 0) is capped at t_p.
    bool found = false;
    double best = 0.0;
    for (std::size_t m = 0; m <= p; ++m) {
        const double upper = std::min(order_stat(m), cap);
        const double lower = order_stat(m + 1);
        if (!(upper > lower)) continue;
        const double level = std::min(alpha * static_cast<double>(std::max<std::size_t>(m, 1)) /
                                          static_cast<double>(p),
                                      1.0);
        const double c = gaussian_tail_inverse(level);
        if (c > lower && c <= upper && (!found || c < best)) {
            best = c;
            found = true;
        }
    }
    if (found) return {best, false};
    return {std::sqrt(2.0 * std::log(static_cast<double>(p))), true};
}

double fdv_threshold(double u, std::size_t p) {
    if (!(u > 0.0) || !(u < static_cast<double>(p))) {
        throw DomainError("fdv_threshold: u must lie in (0, p), got " + std::to_string(u));
    }
    return gaussian_tail_inverse(u / static_cast<double>(p));
}

SelectionResult select_at_threshold(const Eigen::VectorXd& statistics, double threshold) {
    SelectionResult sel;
    sel.threshold = threshold;
    for (Eigen::Index j = 0; j < statistics.size(); ++j) {
        const double t = statistics[j];
        if (std::abs(t) >= threshold) {
            sel.selected.push_back(j);
            if (t == 0.0) sel.zero_sign_convention_used = true;
            sel.signs.push_back(t < 0.0 ? -1 : 1);
        }
    }
    return sel;
}

namespace {

SelectionResult fdr_select(const Eigen::VectorXd& stats, double alpha) {
    const Threshold t = gmt_threshold(stats, alpha);
    SelectionResult sel = select_at_threshold(stats, t.value);
    sel.fallback_used = t.fallback_used;
    return sel;
}

}  // namespace

SelectionResult gmt_select(const DebiasedFit& fit, double alpha) {
    return fdr_select(fit.statistics, alpha);
}

SelectionResult gmt_fdv_select(const DebiasedFit& fit, double u) {
    return select_at_threshold(fit.statistics,
                               fdv_threshold(u, static_cast<std::size_t>(fit.statistics.size())));
}

TwoSampleStatistics two_sample_statistics(const DebiasedFit& first, const DebiasedFit& second) {
    if (first.beta_debiased.size() != second.beta_debiased.size()) {
        throw DataError("two_sample_statistics: dimension mismatch (" +
                        std::to_string(first.beta_debiased.size()) + " vs " +
                        std::to_string(second.beta_debiased.size()) + ")");
    }
    if (first.n <= 0 || second.n <= 0) throw DataError("two_sample_statistics: empty sample");
    if ((first.theta_diag.array() <= 0.0).any() || (second.theta_diag.array() <= 0.0).any()) {
        throw DomainError("two_sample_statistics: theta diagonals must be positive");
    }
    TwoSampleStatistics out;
    out.n1 = first.n;
    out.n2 = second.n;
    const Eigen::ArrayXd scale = (first.theta_diag.array() / static_cast<double>(first.n) +
                                  second.theta_diag.array() / static_cast<double>(second.n))
                                     .sqrt();
    out.m_statistics = ((first.beta_debiased - second.beta_debiased).array() / scale).matrix();
    return out;
}

SelectionResult gmt2_select(const TwoSampleStatistics& m, double alpha) {
    return fdr_select(m.m_statistics, alpha);
}

SelectionResult gmt2_fdv_select(const TwoSampleStatistics& m, double u) {
    return select_at_threshold(m.m_statistics,
                               fdv_threshold(u, static_cast<std::size_t>(m.m_statistics.size())));
}

}  // namespace dirfdr
