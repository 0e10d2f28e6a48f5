#pragma once

// Brute-force scan for the smallest feasible threshold on a fine grid.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

class ThresholdScan {
public:
    explicit ThresholdScan(double step = 1e-6, double max_t = 4.0) : step_(step) {
        const auto count = static_cast<std::size_t>(max_t / step) + 1;
        tail_.resize(count);
        for (std::size_t k = 0; k < count; ++k) tail_[k] = tail(static_cast<double>(k) * step);
    }

    static double tail(double t) { return std::erfc(t / std::sqrt(2.0)); }

    /// Smallest t in [0, cap] on the grid or at an order statistic of |T| with
    /// p tail(t) <= alpha max(#{|T_j| >= t}, 1); sqrt(2 ln p) if none.
    double operator()(const Eigen::VectorXd& stats, double alpha, bool* fallback = nullptr) const {
        const auto p = static_cast<std::size_t>(stats.size());
        const double pd = static_cast<double>(p);
        const double cap = std::sqrt(2.0 * std::log(pd) - 2.0 * std::log(std::log(pd)));
        std::vector<double> mags(p);
        for (std::size_t j = 0; j < p; ++j) mags[j] = std::abs(stats[static_cast<Eigen::Index>(j)]);
        std::sort(mags.begin(), mags.end());

        auto feasible = [&](double g, std::size_t below) {
            const double hits = static_cast<double>(std::max<std::size_t>(p - below, 1));
            return pd * g <= alpha * hits;
        };
        if (fallback) *fallback = false;
        std::size_t below = 0;  // statistics strictly smaller than the current t
        for (std::size_t k = 0; k < tail_.size(); ++k) {
            const double t = static_cast<double>(k) * step_;
            while (below < p && mags[below] < t) {
                const double a = mags[below];
                if (a <= cap && feasible(tail(a), below)) return a;
                ++below;
            }
            if (t > cap) break;
            if (feasible(tail_[k], below)) return t;
        }
        while (below < p && mags[below] < cap) ++below;
        if (feasible(tail(cap), below)) return cap;
        if (fallback) *fallback = true;
        return std::sqrt(2.0 * std::log(pd));
    }

private:
    double step_;
    std::vector<double> tail_;
};

}  // namespace oracle
