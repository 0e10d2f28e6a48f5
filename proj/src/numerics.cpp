#include "dirfdr/numerics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "dirfdr/errors.hpp"

namespace dirfdr {

double normal_pdf(double t) {
    return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double t) {
    return 0.5 * std::erfc(-t / std::numbers::sqrt2);
}

double gaussian_tail(double t) {
    if (!std::isfinite(t) || t < 0.0) {
        throw DomainError("gaussian_tail: argument must be finite and nonnegative, got " +
                          std::to_string(t));
    }
    // erfc keeps full relative precision deep in the tail, unlike 2 - 2*Phi(t).
    return std::erfc(t / std::numbers::sqrt2);
}

double gaussian_tail_inverse(double q) {
    if (!(q > 0.0) || q > 1.0) {
        throw DomainError("gaussian_tail_inverse: probability must lie in (0, 1], got " +
                          std::to_string(q));
    }
    if (q == 1.0) return 0.0;
    double lo = 0.0;
    double hi = 40.0;
    // Run until the bracket cannot shrink any further in double precision.
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (gaussian_tail(mid) > q) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Return whichever endpoint is closer in tail probability.
    return std::abs(gaussian_tail(lo) - q) <= std::abs(gaussian_tail(hi) - q) ? lo : hi;
}

double scan_cap(std::size_t p) {
    if (p < 3) {
        throw DomainError("scan_cap: p must be at least 3, got " + std::to_string(p));
    }
    const double lp = std::log(static_cast<double>(p));
    return std::sqrt(2.0 * lp - 2.0 * std::log(lp));
}

}  // namespace dirfdr
