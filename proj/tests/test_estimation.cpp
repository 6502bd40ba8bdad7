#include "teps/estimation.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/LU>

#include "doctest.h"
#include "teps/errors.hpp"
#include "teps/random.hpp"
#include "teps/stats.hpp"

using namespace teps;

namespace
{
// Standard error of the mean of a correlated series by batch means.
double batch_se(Eigen::VectorXd const& v, int n_batches = 50)
{
    Eigen::Index const len = v.size() / n_batches;
    Eigen::VectorXd means(n_batches);
    for (int b = 0; b < n_batches; ++b)
        means[b] = v.segment(b * len, len).mean();
    double const m = means.mean();
    double const var = (means.array() - m).square().sum() / (n_batches - 1);
    return std::sqrt(var / n_batches);
}

UtilityDesign small_design(int k, int c, int p, double scale, std::uint64_t seed)
{
    UtilityDesign d;
    d.n_students = k;
    d.n_programs = c;
    d.x.resize(k * c, p);
    RandomStream rng(seed, {tag(StreamTag::generic)});
    for (Eigen::Index r = 0; r < d.x.rows(); ++r)
        for (int j = 0; j < p; ++j)
            d.x(r, j) = scale * rng.normal();
    for (int j = 0; j < p; ++j)
        d.param_names.push_back("b" + std::to_string(j + 1));
    return d;
}

std::vector<RelationSet> empty_relations(int k, int c)
{
    return std::vector<RelationSet>(static_cast<std::size_t>(k), RelationSet(c));
}
}  // namespace

TEST_CASE("empty relations recover the prior")
{
    // Tiny regressors make the likelihood nearly flat, so beta draws are
    // close to independent and the posterior equals the N(0, 100) prior.
    auto const d = small_design(4, 3, 2, 0.01, 5);
    GibbsConfig cfg;
    cfg.n_iter = 21000;
    cfg.burn_in = 1000;
    cfg.n_chains = 3;
    cfg.seed = 17;
    auto const post = gibbs_estimate(empty_relations(4, 3), d, cfg);
    auto const pooled = post.pooled_beta();
    REQUIRE(pooled.rows() == 60000);
    for (int j = 0; j < 2; ++j)
    {
        Eigen::VectorXd const col = pooled.col(j);
        CHECK(std::abs(col.mean()) < 3 * batch_se(col));
        double const var = (col.array() - col.mean()).square().mean();
        CHECK(var == doctest::Approx(100.0).epsilon(0.10));
    }
    for (double r : post.psrf())
        CHECK(r < 1.1);
}

TEST_CASE("binary probit posterior mean matches grid integration")
{
    // Two programs, one regressor, unit variances: student i reveals
    // y_i = 1{U_i0 > U_i1}, so P(y_i = 1 | b) = Phi(dx_i b / sqrt 2).
    int const k = 60;
    auto d = small_design(k, 2, 1, 1.0, 23);
    RandomStream rng(31, {tag(StreamTag::generic)});
    double const truth = 0.8;
    std::vector<RelationSet> rels(k, RelationSet(2));
    std::vector<double> dx(k);
    std::vector<int> y(k);
    for (int i = 0; i < k; ++i)
    {
        dx[i] = d.x(2 * i, 0) - d.x(2 * i + 1, 0);
        double const u0 = d.x(2 * i, 0) * truth + rng.normal();
        double const u1 = d.x(2 * i + 1, 0) * truth + rng.normal();
        y[i] = u0 > u1;
        if (y[i])
            rels[i].add(0, 1);
        else
            rels[i].add(1, 0);
    }

    // Oracle: posterior mean on a fine grid with the N(0, 100) prior.
    double num = 0, den = 0;
    double log_max = -std::numeric_limits<double>::infinity();
    std::vector<double> logs;
    double const lo = -10, hi = 10, h = 1e-4;
    for (double b = lo; b <= hi; b += h)
    {
        double lp = -0.5 * 0.01 * b * b;
        for (int i = 0; i < k; ++i)
        {
            double const z = dx[i] * b / std::numbers::sqrt2;
            lp += std::log(y[i] ? normal_cdf(z) : normal_cdf(-z));
        }
        logs.push_back(lp);
        log_max = std::max(log_max, lp);
    }
    double b = lo;
    for (double lp : logs)
    {
        double const w = std::exp(lp - log_max);
        num += w * b;
        den += w;
        b += h;
    }
    double const oracle = num / den;

    GibbsConfig cfg;
    cfg.n_iter = 20000;
    cfg.burn_in = 2000;
    cfg.n_chains = 3;
    cfg.seed = 99;
    auto const post = gibbs_estimate(rels, d, cfg);
    Eigen::VectorXd const draws = post.pooled_beta().col(0);
    double const se = batch_se(draws);
    CHECK(std::abs(draws.mean() - oracle) < 3 * se);
    CHECK(se < 0.05);
}

TEST_CASE("heteroskedastic types with runtime checks")
{
    int const k = 30, c = 4;
    auto d = small_design(k, c, 2, 1.0, 41);
    d.program_type = {0, 0, 1, 1};
    d.pinned_type = 0;
    std::vector<RelationSet> rels;
    for (int i = 0; i < k; ++i)
    {
        RelationSet r(c);
        r.add(i % c, (i + 1) % c);
        r.add((i + 1) % c, (i + 2) % c);
        rels.push_back(transitive_closure(r));
    }
    GibbsConfig cfg;
    cfg.n_iter = 400;
    cfg.burn_in = 100;
    cfg.n_chains = 2;
    cfg.validate_draws = true;
    cfg.whitening_check_every = 1;
    auto const post = gibbs_estimate(rels, d, cfg);
    REQUIRE(post.n_types == 2);
    for (auto const& s : post.sigma2)
    {
        CHECK((s.col(0).array() == 1.0).all());
        CHECK((s.col(1).array() > 0.0).all());
    }
    CHECK(post.psrf().size() == 3);
}

TEST_CASE("draws are reproducible and thread-invariant")
{
    auto const d = small_design(10, 3, 2, 1.0, 3);
    std::vector<RelationSet> rels;
    for (int i = 0; i < 10; ++i)
    {
        RelationSet r(3);
        r.add(i % 3, (i + 1) % 3);
        rels.push_back(r);
    }
    GibbsConfig cfg;
    cfg.n_iter = 300;
    cfg.burn_in = 100;
    cfg.thin = 2;
    cfg.seed = 8;
    auto const a = gibbs_estimate(rels, d, cfg);
    cfg.threads = 3;
    auto const b = gibbs_estimate(rels, d, cfg);
    REQUIRE(a.n_chains() == 3);
    CHECK(a.n_draws_per_chain() == 100);
    for (int ch = 0; ch < 3; ++ch)
        CHECK(a.beta[ch] == b.beta[ch]);
    CHECK(a.beta[0] != a.beta[1]);
    cfg.seed = 9;
    CHECK(gibbs_estimate(rels, d, cfg).beta[0] != a.beta[0]);
}

TEST_CASE("invalid Gibbs input")
{
    auto const d = small_design(2, 3, 1, 1.0, 1);
    std::vector<RelationSet> rels(2, RelationSet(3));
    rels[1].add(0, 1);
    rels[1].add(1, 2);
    rels[1].add(2, 0);
    CHECK_THROWS_AS(gibbs_estimate(rels, d, {}), CycleError);

    auto const ok = empty_relations(2, 3);
    GibbsConfig cfg;
    cfg.burn_in = cfg.n_iter;
    CHECK_THROWS_AS(gibbs_estimate(ok, d, cfg), ValidationError);
    CHECK_THROWS_AS(gibbs_estimate(empty_relations(3, 3), d, {}), ValidationError);

    auto bad = d;
    bad.x(0, 0) = std::nan("");
    CHECK_THROWS_AS(validate_design(bad), ValidationError);
    bad = d;
    bad.program_type = {0, 2, 2};
    CHECK_THROWS_AS(validate_design(bad), ValidationError);
}

//---------------------------------------------------------------------------//

TEST_CASE("ranking pairs")
{
    std::vector<int> const ranking{2, 0, 1};
    auto const pairs = pairs_from_ranking(ranking);
    std::vector<RankedPair> const expected{{2, 0}, {2, 1}, {0, 1}};
    CHECK(pairs == expected);
}

TEST_CASE("pairwise logit likelihood and fit")
{
    int const n = 500;
    RandomStream rng(77, {tag(StreamTag::generic)});
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i)
    {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    Eigen::Vector2d const truth(1.0, -0.5);
    Eigen::VectorXd const v = x * truth;
    std::vector<RankedPair> pairs;
    for (int r = 0; r < 4000; ++r)
    {
        int const a = static_cast<int>(rng.below(n));
        int b = static_cast<int>(rng.below(n - 1));
        b += b >= a;
        double const p = 1.0 / (1.0 + std::exp(-(v[a] - v[b])));
        if (rng.uniform() < p)
            pairs.emplace_back(a, b);
        else
            pairs.emplace_back(b, a);
    }

    CHECK(pairwise_loglik(pairs, x, Eigen::Vector2d::Zero())
          == doctest::Approx(4000 * std::log(0.5)));

    auto const fit = fit_priority_logit(pairs, x);
    for (int j = 0; j < 2; ++j)
        CHECK(std::abs(fit.beta[j] - truth[j]) < 3 * fit.se[j]);
    CHECK(fit.loglik == doctest::Approx(pairwise_loglik(pairs, x, fit.beta)));

    // Central differences of the likelihood vanish at the optimum.
    for (int j = 0; j < 2; ++j)
    {
        Eigen::VectorXd up = fit.beta, dn = fit.beta;
        up[j] += 1e-5;
        dn[j] -= 1e-5;
        double const g = (pairwise_loglik(pairs, x, up) - pairwise_loglik(pairs, x, dn)) / 2e-5;
        CHECK(std::abs(g) < 1e-4);
    }

    // Inverse observed information from a finite-difference Hessian.
    Eigen::Matrix2d h;
    double const e = 1e-4;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
        {
            auto f = [&](double da, double db) {
                Eigen::VectorXd t = fit.beta;
                t[a] += da;
                t[b] += db;
                return pairwise_loglik(pairs, x, t);
            };
            h(a, b) = (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4 * e * e);
        }
    Eigen::Matrix2d const cov = (-h).inverse();
    for (int j = 0; j < 2; ++j)
        CHECK(fit.se[j] == doctest::Approx(std::sqrt(cov(j, j))).epsilon(1e-3));
    CHECK(fit.scores.size() == n);
}

TEST_CASE("separated rankings need a ridge penalty")
{
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 1.0, 2.0, 3.0;
    std::vector<int> const ranking{3, 2, 1, 0};
    auto const pairs = pairs_from_ranking(ranking);
    CHECK_THROWS_AS(fit_priority_logit(pairs, x), NumericalError);

    auto const fit = fit_priority_logit(pairs, x, {.ridge = 1.0});
    CHECK(fit.beta[0] > 0.0);
    // Penalized score equation: sum (1 - p) dx = ridge * beta.
    double g = 0;
    for (auto [w, l] : pairs)
    {
        double const z = fit.beta[0] * (x(w, 0) - x(l, 0));
        g += (x(w, 0) - x(l, 0)) / (1.0 + std::exp(z));
    }
    CHECK(g == doctest::Approx(fit.beta[0]).epsilon(1e-7));

    std::vector<RankedPair> const bad{{0, 0}};
    CHECK_THROWS_AS(fit_priority_logit(bad, x), ValidationError);
}

TEST_CASE("score percentiles use mid-ranks")
{
    Eigen::VectorXd s(4);
    s << 3.0, 1.0, 2.0, 2.0;
    auto const p = score_percentiles(s);
    CHECK(p[0] == doctest::Approx(0.875));
    CHECK(p[1] == doctest::Approx(0.125));
    CHECK(p[2] == doctest::Approx(0.5));
    CHECK(p[3] == doctest::Approx(0.5));
}
