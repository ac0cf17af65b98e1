#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace nesycl {

// FNV-1a 64-bit; used for config/manifest fingerprints.
std::uint64_t fnv1a(std::string_view s);
std::string hex64(std::uint64_t v);

// Regularized upper incomplete gamma Q(a, x); series + continued fraction.
double gamma_q(double a, double x);

// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi_square_pvalue(double statistic, double dof);

double mean_of(std::span<const double> v);
double stddev_of(std::span<const double> v);  // sample std (n - 1)

}  // namespace nesycl
