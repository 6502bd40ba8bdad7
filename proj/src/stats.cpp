#include "teps/stats.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "teps/errors.hpp"
#include "teps/random.hpp"

namespace teps
{
double normal_pdf(double z)
{
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double chi_square_sf(double x, int df)
{
    if (!(x >= 0.0))
        throw ValidationError("chi-square statistic must be non-negative, got "
                              + std::to_string(x));
    if (df < 1)
        throw ValidationError("chi-square degrees of freedom must be positive");
    if (x == 0.0)
        return 1.0;
    if (std::isinf(x))
        return 0.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double psrf(std::span<std::vector<double> const> chains)
{
    if (chains.size() < 2)
        throw ValidationError("PSRF needs at least two chains");
    std::size_t const n = chains[0].size();
    if (n < 2)
        throw ValidationError("PSRF needs chains of length two or more");
    for (auto const& c : chains)
    {
        if (c.size() != n)
            throw ValidationError("PSRF chains must have equal lengths");
    }

    auto const m = static_cast<double>(chains.size());
    std::vector<double> means;
    double w = 0.0;
    for (auto const& c : chains)
    {
        double mean = 0.0;
        for (double v : c)
            mean += v;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double v : c)
            ss += (v - mean) * (v - mean);
        w += ss / static_cast<double>(n);
        means.push_back(mean);
    }
    w /= m;
    if (!(w > 0.0))
        throw NumericalError("PSRF undefined: zero within-chain variance");

    double grand = 0.0;
    for (double mu : means)
        grand += mu;
    grand /= m;
    double b_over_n = 0.0;
    for (double mu : means)
        b_over_n += (mu - grand) * (mu - grand);
    b_over_n /= m - 1.0;
    return std::sqrt((w + b_over_n) / w);
}

//---------------------------------------------------------------------------//

namespace
{
// Accept with probability exp(q), q <= 0; the bound exp(q) >= 1 + q settles
// most cases without calling exp.
template<class Rng>
bool accept_log(double q, Rng& rng)
{
    double const u = rng.uniform();
    return u < 1.0 + q || u < std::exp(q);
}

template<class Rng>
double uniform_proposal(double a, double b, double peak, Rng& rng)
{
    // peak: the point of (a, b) closest to zero
    for (;;)
    {
        double const z = a + (b - a) * rng.uniform_open();
        if (accept_log(0.5 * (peak * peak - z * z), rng))
            return z;
    }
}

// Standardized (a, b) with a >= 0: uniform, half-normal or exponential
// proposals, whichever accepts most often (Robert 1995).
template<class Rng>
double right_tail(double a, double b, Rng& rng)
{
    double const width = b - a;
    // Below this a, half-normal rejection beats the exponential proposal
    // because normals come cheap from the ziggurat.
    constexpr double half_normal_limit = 0.6;
    if (a < half_normal_limit)
    {
        if (width < std::sqrt(std::numbers::pi / 2) * std::exp(0.5 * a * a))
            return uniform_proposal(a, b, a, rng);
        for (;;)
        {
            double const z = std::abs(rng.normal());
            if (z > a && z < b)
                return z;
        }
    }
    double const root = std::sqrt(a * a + 4.0);
    double const uniform_limit = 2.0 * std::sqrt(std::numbers::e) / (a + root)
                                 * std::exp(0.25 * (a * a - a * root));
    if (width < uniform_limit)
        return uniform_proposal(a, b, a, rng);
    double const rate = 0.5 * (a + root);
    for (;;)
    {
        double const z = a + rng.exponential() / rate;
        if (z >= b)
            continue;
        double const d = z - rate;
        if (accept_log(-0.5 * d * d, rng))
            return z;
    }
}

}  // namespace

template<class Rng>
double detail::standard_truncated(double a, double b, Rng& rng)
{
    if (a >= 0.0)
        return right_tail(a, b, rng);
    if (b <= 0.0)
        return -right_tail(-b, -a, rng);
    // interval straddles zero
    if (b - a < std::sqrt(2.0 * std::numbers::pi))
        return uniform_proposal(a, b, 0.0, rng);
    for (;;)
    {
        double const z = rng.normal();
        if (z > a && z < b)
            return z;
    }
}

template<class Rng>
double draw_truncated_normal(double mean, double variance, double lower,
                             double upper, Rng& rng)
{
    if (!(lower < upper))
        throw ValidationError("truncation bounds must satisfy lower < upper");
    if (!(variance > 0.0) || !std::isfinite(mean))
        throw ValidationError("truncated normal needs finite mean and positive "
                              "variance");
    double const sd = std::sqrt(variance);
    double const a = (lower - mean) / sd;
    double const b = (upper - mean) / sd;
    if (std::isinf(a) && std::isinf(b))
        return mean + sd * rng.normal();

    // Rounding on the way back can land on a bound; redraw in that case.
    for (int attempt = 0; attempt < 64; ++attempt)
    {
        double const x = mean + sd * detail::standard_truncated(a, b, rng);
        if (x > lower && x < upper)
            return x;
    }
    double const mid = lower + 0.5 * (upper - lower);
    if (mid > lower && mid < upper)
        return mid;
    throw NumericalError("truncation interval too narrow to sample");
}

template double draw_truncated_normal(double, double, double, double,
                                      RandomStream&);
template double detail::standard_truncated(double, double, FastStream&);
template double draw_truncated_normal(double, double, double, double,
                                      FastStream&);

}  // namespace teps
