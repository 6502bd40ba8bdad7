#include "teps/selection.hpp"

#include <cmath>

#include <Eigen/LU>

#include "doctest.h"
#include "teps/errors.hpp"
#include "teps/random.hpp"

using namespace teps;

namespace
{
EstimateSummary summary(std::string label, Eigen::VectorXd beta,
                        Eigen::MatrixXd cov)
{
    return {std::move(label), std::move(beta), std::move(cov)};
}

EstimateSummary scalar(std::string label, double b, double v)
{
    return summary(std::move(label), Eigen::VectorXd::Constant(1, b),
                   Eigen::MatrixXd::Constant(1, 1, v));
}

// Chi-square(1) survival: P(|Z| > sqrt(x)).
double sf1(double x)
{
    return std::erfc(std::sqrt(0.5 * x));
}
}  // namespace

TEST_CASE("identical summaries give a zero statistic")
{
    Eigen::VectorXd b(3);
    b << 0.3, 2.0, -1.0;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(3, 3) * 0.04;
    auto const s = summary("a", b, v);
    auto const r = wald_statistic(s, s);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
}

TEST_CASE("scalar comparison")
{
    auto const r = wald_statistic(scalar("top", 2.0, 1.5), scalar("WTT", 0.0, 0.5));
    CHECK(r.statistic == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(r.df == 1);
    CHECK(r.p_value == doctest::Approx(sf1(4.0)).epsilon(1e-10));
    CHECK(r.p_value == doctest::Approx(0.0455).epsilon(1e-3));
}

TEST_CASE("full-rank difference matches a direct solve")
{
    RandomStream rng(11, {tag(StreamTag::generic)});
    for (int rep = 0; rep < 50; ++rep)
    {
        int const p = 1 + static_cast<int>(rng.below(6));
        Eigen::MatrixXd a(p, p), c(p, p);
        Eigen::VectorXd d(p);
        for (int i = 0; i < p; ++i)
        {
            d[i] = rng.normal();
            for (int j = 0; j < p; ++j)
            {
                a(i, j) = rng.normal();
                c(i, j) = rng.normal();
            }
        }
        Eigen::MatrixXd const m = a * a.transpose() + Eigen::MatrixXd::Identity(p, p);
        Eigen::MatrixXd const ve = c * c.transpose() + 0.1 * Eigen::MatrixXd::Identity(p, p);
        auto const robust = summary("r", d, ve + m);
        auto const efficient = summary("e", Eigen::VectorXd::Zero(p), ve);
        auto const r = wald_statistic(robust, efficient);
        double const direct = d.dot(m.fullPivLu().solve(d));
        CHECK(r.statistic == doctest::Approx(direct).epsilon(1e-9));
        CHECK(r.df == p);
    }
}

TEST_CASE("indefinite difference is projected to its positive part")
{
    Eigen::VectorXd d(2);
    d << 3.0, 5.0;
    Eigen::MatrixXd m(2, 2);
    m << 2.0, 0.0, 0.0, -1.0;
    auto const robust = summary("r", d, m + Eigen::MatrixXd::Identity(2, 2) * 4.0);
    auto const efficient
        = summary("e", Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2) * 4.0);
    auto const r = wald_statistic(robust, efficient);
    CHECK(r.statistic == doctest::Approx(4.5));
    CHECK(r.df == 1);
    CHECK(r.statistic >= 0.0);

    auto const nominal = wald_statistic(robust, efficient, {1e-8, true});
    CHECK(nominal.df == 2);
    CHECK(nominal.statistic == r.statistic);

    // Equal covariances leave nothing to test.
    auto const zero = wald_statistic(efficient, summary("e2", d, efficient.covariance));
    CHECK(zero.df == 0);
    CHECK(zero.p_value == 1.0);
}

TEST_CASE("dimension mismatch")
{
    auto const a = scalar("a", 1, 1);
    auto const b = summary("b", Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    CHECK_THROWS_AS(wald_statistic(a, b), ValidationError);
}

TEST_CASE("selection ladder")
{
    std::vector<double> const grid{20, 40, 60, 80, 100};
    auto const top = scalar("TEPS^top", 2.0, 2.0);
    // Difference variance is 1 for every rung, so stat = d^2.
    auto build = [&](double wtt, double all, double t80, double t60, double t40,
                     double t20) {
        std::map<std::string, EstimateSummary> m;
        m["WTT"] = scalar("WTT", 2.0 - wtt, 1.0);
        m["TEPS^all"] = scalar("TEPS^all", 2.0 - all, 1.0);
        m["TEPS^80"] = scalar("TEPS^80", 2.0 - t80, 1.0);
        m["TEPS^60"] = scalar("TEPS^60", 2.0 - t60, 1.0);
        m["TEPS^40"] = scalar("TEPS^40", 2.0 - t40, 1.0);
        m["TEPS^20"] = scalar("TEPS^20", 2.0 - t20, 1.0);
        return m;
    };

    SUBCASE("WTT accepted at once")
    {
        // |d| = 0.8416 gives p = 0.40
        auto const r = select_model(build(0.8416, 5, 5, 5, 5, 5), top, grid);
        CHECK(r.chosen == "WTT");
        REQUIRE(r.ladder.size() == 1);
        CHECK(r.ladder[0].test.p_value == doctest::Approx(0.40).epsilon(1e-3));
        CHECK_FALSE(r.ladder[0].rejected);
    }
    SUBCASE("descends to the first non-rejected tau")
    {
        auto const r = select_model(build(5, 5, 1.0, 0, 0, 0), top, grid);
        CHECK(r.chosen == "TEPS^80");
        REQUIRE(r.ladder.size() == 3);
        CHECK(r.ladder[0].efficient == "WTT");
        CHECK(r.ladder[1].efficient == "TEPS^all");
        CHECK(r.ladder[2].efficient == "TEPS^80");
        CHECK(r.ladder[1].rejected);
        CHECK(r.ladder[2].test.p_value == doctest::Approx(sf1(1.0)));
    }
    SUBCASE("exhaustion falls back to top")
    {
        auto const r = select_model(build(5, 5, 5, 5, 5, 5), top, grid);
        CHECK(r.chosen == "TEPS^top");
        CHECK(r.ladder.size() == 6);
        for (auto const& s : r.ladder)
            CHECK(s.rejected);
    }
    SUBCASE("TEPS-only ladder")
    {
        auto const r = select_model(build(0, 5, 0, 0, 0, 0), top, grid, 0.05, {}, "");
        CHECK(r.chosen == "TEPS^80");
        CHECK(r.ladder.front().efficient == "TEPS^all");
    }
    SUBCASE("missing label")
    {
        auto m = build(5, 5, 5, 5, 5, 5);
        m.erase("TEPS^60");
        CHECK_THROWS_AS(select_model(m, top, grid), ValidationError);
    }
    SUBCASE("empty tau grid")
    {
        std::map<std::string, EstimateSummary> m;
        m["WTT"] = scalar("WTT", 2.0, 0.0);
        auto const r = select_model(m, scalar("TEPS^top", 2.0, 1.0), {}, 0.05);
        CHECK(r.chosen == "WTT");
    }
}
