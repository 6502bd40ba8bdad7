#include "teps/stats.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "teps/errors.hpp"
#include "teps/random.hpp"

using namespace teps;

namespace
{
double adaptive_simpson(std::function<double(double)> const& f, double a,
                        double b, double fa, double fm, double fb, double whole,
                        double tol, int depth)
{
    double const m = 0.5 * (a + b);
    double const lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double const flm = f(lm), frm = f(rm);
    double const left = (m - a) / 6 * (fa + 4 * flm + fm);
    double const right = (b - m) / 6 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol)
        return left + right + (left + right - whole) / 15;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1)
           + adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double integrate(std::function<double(double)> const& f, double a, double b)
{
    double const fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return adaptive_simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb),
                            1e-13, 60);
}

double chi_square_density(double x, int df)
{
    double const k = 0.5 * df;
    return std::exp((k - 1) * std::log(x) - 0.5 * x - k * std::log(2.0)
                    - std::lgamma(k));
}

// Moments of N(0,1) truncated to (a, b).
std::pair<double, double> truncated_moments(double a, double b)
{
    double const z = normal_cdf(b) - normal_cdf(a);
    double const pa = std::isinf(a) ? 0 : normal_pdf(a);
    double const pb = std::isinf(b) ? 0 : normal_pdf(b);
    double const aa = std::isinf(a) ? 0 : a * pa;
    double const bb = std::isinf(b) ? 0 : b * pb;
    double const mean = (pa - pb) / z;
    double const var = 1 + (aa - bb) / z - mean * mean;
    return {mean, var};
}
}  // namespace

TEST_CASE("chi-square survival function")
{
    CHECK(chi_square_sf(0.0, 1) == 1.0);
    CHECK(chi_square_sf(0.0, 7) == 1.0);
    CHECK(chi_square_sf(2 * std::log(20.0), 2) == doctest::Approx(0.05).epsilon(1e-12));
    double worst = 0;
    for (int j = 0; j < 100; ++j)
    {
        double const x = 0.3 * j;
        worst = std::max(worst, std::abs(chi_square_sf(x, 2) - std::exp(-x / 2)));
    }
    CHECK(worst <= 1e-10);

    // Tail integral of the df=1 density from x to far out.
    double const x = 3.8415;
    double const tail = integrate([](double t) { return chi_square_density(t, 1); },
                                  x, x + 200);
    CHECK(std::abs(chi_square_sf(x, 1) - tail) < 1e-10);
    CHECK(chi_square_sf(x, 1) == doctest::Approx(0.05).epsilon(1e-3));

    double const tail5 = integrate([](double t) { return chi_square_density(t, 5); },
                                   7.0, 300.0);
    CHECK(std::abs(chi_square_sf(7.0, 5) - tail5) < 1e-10);

    double prev = 1.0;
    for (int j = 1; j < 200; ++j)
    {
        double const s = chi_square_sf(0.25 * j, 4);
        CHECK(s < prev);
        prev = s;
    }
    CHECK_THROWS_AS(chi_square_sf(-1.0, 2), ValidationError);
    CHECK_THROWS_AS(chi_square_sf(1.0, 0), ValidationError);
}

TEST_CASE("psrf")
{
    RandomStream rng(1, {1});
    std::vector<double> a(1000);
    for (auto& v : a)
        v = rng.normal();
    std::vector<std::vector<double>> same{a, a};
    CHECK(psrf(same) == 1.0);

    int const n = 10000;
    std::vector<std::vector<double>> apart(2, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
    {
        apart[0][i] = rng.normal();
        apart[1][i] = 10 + rng.normal();
    }
    // Oracle: plug sample means and variances into the formula.
    double m0 = 0, m1 = 0, v0 = 0, v1 = 0;
    for (int i = 0; i < n; ++i)
    {
        m0 += apart[0][i] / n;
        m1 += apart[1][i] / n;
    }
    for (int i = 0; i < n; ++i)
    {
        v0 += (apart[0][i] - m0) * (apart[0][i] - m0) / n;
        v1 += (apart[1][i] - m1) * (apart[1][i] - m1) / n;
    }
    double const w = 0.5 * (v0 + v1);
    double const b_over_n = (m0 - m1) * (m0 - m1) / 2;
    double const expected = std::sqrt((w + b_over_n) / w);
    CHECK(psrf(apart) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(psrf(apart) > 1.1);

    std::vector<std::vector<double>> one{a};
    CHECK_THROWS_AS(psrf(one), ValidationError);
    std::vector<std::vector<double>> flat{{1, 1, 1}, {1, 1, 1}};
    CHECK_THROWS_AS(psrf(flat), NumericalError);
}

TEST_CASE("untruncated and half-line draws")
{
    RandomStream rng(2, {2});
    auto const inf = std::numeric_limits<double>::infinity();
    int const n = 1000000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i)
    {
        double const x = draw_truncated_normal(1.5, 4.0, -inf, inf, rng);
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n - 1.5) < 4 * 2.0 / std::sqrt(n));

    double h = 0, h2 = 0;
    for (int i = 0; i < n; ++i)
    {
        double const x = draw_truncated_normal(0.0, 1.0, 0.0, inf, rng);
        REQUIRE(x > 0.0);
        h += x;
        h2 += x * x;
    }
    double const mean = h / n;
    double const se = std::sqrt((h2 / n - mean * mean) / n);
    CHECK(std::abs(mean - std::sqrt(2 / std::numbers::pi)) < 4 * se);
}

TEST_CASE("truncated moments across regimes")
{
    RandomStream rng(3, {3});
    auto const inf = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> const intervals{
        {-0.3, 0.2}, {-3, 4}, {0.1, 0.4}, {0.1, inf}, {0.5, inf}, {2, 2.5},
        {3, inf},    {6, 6.7}, {-inf, -4}, {-2.2, -1.9}, {1, 10}, {-inf, 0.3}};
    int const n = 200000;
    for (auto [a, b] : intervals)
    {
        auto const [mu, var] = truncated_moments(a, b);
        double s = 0, s2 = 0;
        for (int i = 0; i < n; ++i)
        {
            double const x = draw_truncated_normal(0.0, 1.0, a, b, rng);
            REQUIRE(x > a);
            REQUIRE(x < b);
            s += x;
            s2 += x * x;
        }
        double const mean = s / n;
        double const v = s2 / n - mean * mean;
        INFO("interval (" << a << ", " << b << ")");
        CHECK(std::abs(mean - mu) < 4 * std::sqrt(var / n));
        CHECK(v == doctest::Approx(var).epsilon(0.03));
    }
}

TEST_CASE("narrow intervals deep in the tail stay inside")
{
    RandomStream rng(4, {4});
    for (double a : {5.0, 12.0, 40.0, -40.0})
    {
        for (int i = 0; i < 1000; ++i)
        {
            double const x = draw_truncated_normal(0.0, 1.0, a, a + 1e-3, rng);
            CHECK(x > a);
            CHECK(x < a + 1e-3);
        }
    }
    // Shifted and scaled.
    double const x = draw_truncated_normal(100.0, 0.01, 101.0, 101.0000001, rng);
    CHECK(x > 101.0);
    CHECK(x < 101.0000001);
    CHECK_THROWS_AS(draw_truncated_normal(0, 1, 1, 1, rng), ValidationError);
    CHECK_THROWS_AS(draw_truncated_normal(0, 1, 2, 1, rng), ValidationError);
    CHECK_THROWS_AS(draw_truncated_normal(0, 0, 0, 1, rng), ValidationError);
}
