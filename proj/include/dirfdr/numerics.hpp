#pragma once

#include <cstddef>

namespace dirfdr {

/// Two-sided standard normal tail G(t) = 2(1 - Phi(t)), t >= 0.
/// Throws DomainError for negative or non-finite t.
double gaussian_tail(double t);

/// Inverse of gaussian_tail on q in (0, 1]. Bisection on [0, 40].
double gaussian_tail_inverse(double q);

/// Upper end of the threshold search range, sqrt(2 ln p - 2 ln ln p). Requires p >= 3.
double scan_cap(std::size_t p);

/// Standard normal density.
double normal_pdf(double t);

/// Standard normal CDF.
double normal_cdf(double t);

}  // namespace dirfdr
