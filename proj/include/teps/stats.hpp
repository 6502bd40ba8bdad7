#pragma once

#include <span>
#include <vector>

namespace teps
{
//! Standard normal density.
double normal_pdf(double z);
//! Standard normal CDF, accurate in both tails.
double normal_cdf(double z);

//! P(X > x) for X ~ chi-square(df); x >= 0, df >= 1.
double chi_square_sf(double x, int df);

//! Gelman-Rubin potential scale reduction factor for one parameter.
//!
//! With W the mean within-chain variance (denominator n) and B/n the
//! variance of chain means, returns sqrt((W + B/n) / W). Identical chains
//! give exactly 1.
double psrf(std::span<std::vector<double> const> chains);

class RandomStream;
class FastStream;

//! One exact draw from N(mean, variance) restricted to the open interval
//! (lower, upper); either bound may be infinite. Instantiated for
//! RandomStream and FastStream.
template<class Rng>
double draw_truncated_normal(double mean, double variance, double lower,
                             double upper, Rng& rng);

namespace detail
{
//! Unchecked N(0, 1) draw restricted to (a, b), a < b.
template<class Rng>
double standard_truncated(double a, double b, Rng& rng);
}  // namespace detail

}  // namespace teps
