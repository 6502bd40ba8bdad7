#include "teps/estimation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>

#include "teps/errors.hpp"
#include "teps/parallel.hpp"
#include "teps/random.hpp"
#include "teps/stats.hpp"

namespace teps
{
int UtilityDesign::n_types() const
{
    if (program_type.empty())
        return 1;
    return 1 + *std::max_element(program_type.begin(), program_type.end());
}

void validate_design(UtilityDesign const& d)
{
    if (d.n_students < 0 || d.n_programs < 1 || d.n_programs > kMaxPrograms)
        throw ValidationError("design needs between 1 and "
                              + std::to_string(kMaxPrograms) + " programs");
    if (d.x.rows() != static_cast<Eigen::Index>(d.n_students) * d.n_programs)
        throw ValidationError("design has " + std::to_string(d.x.rows())
                              + " rows, expected students x programs = "
                              + std::to_string(d.n_students * d.n_programs));
    if (d.x.cols() < 1)
        throw ValidationError("design needs at least one regressor");
    if (!d.param_names.empty()
        && d.param_names.size() != static_cast<std::size_t>(d.x.cols()))
        throw ValidationError("parameter names do not match regressor count");
    if (!d.x.allFinite())
        throw ValidationError("non-finite covariate in design");
    if (!d.program_type.empty())
    {
        if (d.program_type.size() != static_cast<std::size_t>(d.n_programs))
            throw ValidationError("program types do not cover every program");
        std::vector<int> seen(static_cast<std::size_t>(d.n_types()), 0);
        for (int t : d.program_type)
        {
            if (t < 0)
                throw ValidationError("negative program type");
            seen[t] = 1;
        }
        if (std::find(seen.begin(), seen.end(), 0) != seen.end())
            throw ValidationError("program types must be dense");
    }
    if (d.pinned_type < 0 || d.pinned_type >= d.n_types())
        throw ValidationError("pinned variance type out of range");
}

//---------------------------------------------------------------------------//

Eigen::MatrixXd PosteriorDraws::pooled_beta() const
{
    Eigen::Index rows = 0;
    for (auto const& b : beta)
        rows += b.rows();
    Eigen::MatrixXd out(rows, beta.empty() ? 0 : beta[0].cols());
    Eigen::Index at = 0;
    for (auto const& b : beta)
    {
        out.middleRows(at, b.rows()) = b;
        at += b.rows();
    }
    return out;
}

Eigen::MatrixXd PosteriorDraws::pooled_sigma2() const
{
    Eigen::Index rows = 0;
    for (auto const& s : sigma2)
        rows += s.rows();
    Eigen::MatrixXd out(rows, sigma2.empty() ? 0 : sigma2[0].cols());
    Eigen::Index at = 0;
    for (auto const& s : sigma2)
    {
        out.middleRows(at, s.rows()) = s;
        at += s.rows();
    }
    return out;
}

Eigen::VectorXd PosteriorDraws::mean() const
{
    return pooled_beta().colwise().mean().transpose();
}

Eigen::MatrixXd PosteriorDraws::covariance() const
{
    auto const all = pooled_beta();
    if (all.rows() < 2)
        throw NumericalError("posterior covariance needs two or more draws");
    Eigen::MatrixXd const centered = all.rowwise() - all.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(all.rows() - 1);
}

std::vector<double> PosteriorDraws::psrf() const
{
    auto column = [](std::vector<Eigen::MatrixXd> const& chains, Eigen::Index j) {
        std::vector<std::vector<double>> out;
        for (auto const& m : chains)
        {
            out.emplace_back(m.rows());
            Eigen::VectorXd::Map(out.back().data(), m.rows()) = m.col(j);
        }
        return out;
    };
    std::vector<double> out;
    for (Eigen::Index j = 0; j < (beta.empty() ? 0 : beta[0].cols()); ++j)
        out.push_back(teps::psrf(column(beta, j)));
    for (int t = 0; t < n_types; ++t)
    {
        if (t != pinned_type)
            out.push_back(teps::psrf(column(sigma2, t)));
    }
    return out;
}

//---------------------------------------------------------------------------//

namespace
{
std::uint64_t bit(int c)
{
    return std::uint64_t{1} << c;
}

// Per student-program neighbor lists: immediate inferior and superior
// programs (transitive reduction) plus the full closed masks.
struct Constraints
{
    int n_programs = 0;
    std::vector<std::uint64_t> worse;   // (i, c) -> closed worse mask
    std::vector<std::uint64_t> better;  // (i, c) -> closed better mask
    std::vector<std::uint32_t> lo_begin, hi_begin;
    std::vector<std::uint8_t> lo, hi;

    Constraints(std::span<RelationSet const> relations, int n_programs_)
        : n_programs(n_programs_)
    {
        std::size_t const k = relations.size();
        auto const n = static_cast<std::size_t>(n_programs);
        worse.assign(k * n, 0);
        better.assign(k * n, 0);
        lo_begin.assign(k * n + 1, 0);
        hi_begin.assign(k * n + 1, 0);
        for (std::size_t i = 0; i < k; ++i)
        {
            if (relations[i].n_nodes() != n_programs)
                throw ValidationError("relation set of student "
                                      + std::to_string(i) + " covers "
                                      + std::to_string(relations[i].n_nodes())
                                      + " programs, expected "
                                      + std::to_string(n_programs));
            RelationSet const closed = transitive_closure(relations[i]);
            for (int c = 0; c < n_programs; ++c)
            {
                worse[i * n + c] = closed.worse(c);
                for (std::uint64_t m = closed.worse(c); m; m &= m - 1)
                    better[i * n + std::countr_zero(m)] |= bit(c);
            }
        }
        for (std::size_t i = 0; i < k; ++i)
        {
            for (std::size_t c = 0; c < n; ++c)
            {
                auto const r = i * n + c;
                std::uint64_t lo_cover = worse[r];
                for (std::uint64_t m = worse[r]; m; m &= m - 1)
                    lo_cover &= ~worse[i * n + std::countr_zero(m)];
                std::uint64_t hi_cover = better[r];
                for (std::uint64_t m = better[r]; m; m &= m - 1)
                    hi_cover &= ~better[i * n + std::countr_zero(m)];
                for (std::uint64_t m = lo_cover; m; m &= m - 1)
                    lo.push_back(static_cast<std::uint8_t>(std::countr_zero(m)));
                for (std::uint64_t m = hi_cover; m; m &= m - 1)
                    hi.push_back(static_cast<std::uint8_t>(std::countr_zero(m)));
                lo_begin[r + 1] = static_cast<std::uint32_t>(lo.size());
                hi_begin[r + 1] = static_cast<std::uint32_t>(hi.size());
            }
        }
    }
};

class Chain
{
  public:
    Chain(UtilityDesign const& d, Constraints const& cons, GibbsConfig const& cfg,
          int chain)
        : d_(d)
        , cons_(cons)
        , cfg_(cfg)
        , rng_(RandomStream(cfg.seed, {tag(StreamTag::gibbs_chain),
                                       static_cast<std::uint64_t>(chain)}))
        , k_(d.n_students)
        , n_(d.n_programs)
        , p_(d.n_params())
        , t_(d.n_types())
    {
        type_.assign(static_cast<std::size_t>(n_), 0);
        if (!d.program_type.empty())
            type_ = d.program_type;
        count_.assign(static_cast<std::size_t>(t_), 0);
        for (int c = 0; c < n_; ++c)
            ++count_[type_[c]];
        nu_ = cfg.nu;
        v0_ = cfg.v0;
        if (nu_.empty())
            for (int t = 0; t < t_; ++t)
                nu_.push_back(3.0 + count_[t]);
        if (v0_.empty())
            for (int t = 0; t < t_; ++t)
                v0_.push_back(3.0 + count_[t]);
        if (nu_.size() != static_cast<std::size_t>(t_)
            || v0_.size() != static_cast<std::size_t>(t_))
            throw ValidationError("variance prior needs one value per type");
        for (int t = 0; t < t_; ++t)
        {
            if (!(nu_[t] > 0.0 && v0_[t] > 0.0))
                throw ValidationError("variance prior parameters must be positive");
        }

        // Per-type Gram matrices G_t = sum over programs of type t of x'x.
        gram_.assign(static_cast<std::size_t>(t_), Eigen::MatrixXd::Zero(p_, p_));
        for (int i = 0; i < k_; ++i)
            for (int c = 0; c < n_; ++c)
            {
                auto const row = d.x.row(static_cast<Eigen::Index>(i) * n_ + c);
                gram_[type_[c]].noalias() += row.transpose() * row;
            }

        u_.resize(static_cast<std::size_t>(k_) * n_);
        xb_.resize(u_.size());
        scaled_.resize(u_.size());
        inv_var_.resize(static_cast<std::size_t>(n_));
        sigma2_.assign(static_cast<std::size_t>(t_), 1.0);
        beta_ = Eigen::VectorXd::Zero(p_);
    }

    void run(Eigen::MatrixXd& beta_out, Eigen::MatrixXd& sigma_out)
    {
        int const kept = (cfg_.n_iter - cfg_.burn_in) / cfg_.thin;
        beta_out.resize(kept, p_);
        sigma_out.resize(kept, t_);

        initialize();
        int row = 0;
        for (int r = 1; r <= cfg_.n_iter; ++r)
        {
            update_utilities();
            update_beta(r);
            update_variances();
            int const since = r - cfg_.burn_in;
            if (since > 0 && since % cfg_.thin == 0 && row < kept)
            {
                if (cfg_.validate_draws)
                    check_draws(r);
                beta_out.row(row) = beta_.transpose();
                for (int t = 0; t < t_; ++t)
                    sigma_out(row, t) = sigma2_[t];
                ++row;
            }
        }
    }

  private:
    double draw_inverse_gamma(double shape, double scale)
    {
        return scale / rng_.gamma(shape);
    }

    void compute_xb()
    {
        Eigen::Map<Eigen::VectorXd> xb(xb_.data(), static_cast<Eigen::Index>(xb_.size()));
        xb.noalias() = d_.x * beta_;
    }

    void initialize()
    {
        for (int t = 0; t < t_; ++t)
        {
            sigma2_[t] = t == d_.pinned_type
                             ? 1.0
                             : draw_inverse_gamma(0.5 * nu_[t], 0.5 * v0_[t]);
        }
        double const prior_sd = 1.0 / std::sqrt(cfg_.prior_precision);
        for (int j = 0; j < p_; ++j)
            beta_[j] = prior_sd * rng_.normal();
        compute_xb();

        auto const inf = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k_; ++i)
        {
            std::size_t const base = static_cast<std::size_t>(i) * n_;
            for (int c = 0; c < n_; ++c)
            {
                // only programs already drawn (lower index) bound this one
                std::uint64_t const drawn = bit(c) - 1;
                double lo = -inf;
                double hi = inf;
                for (std::uint64_t m = cons_.worse[base + c] & drawn; m; m &= m - 1)
                    lo = std::max(lo, u_[base + std::countr_zero(m)]);
                for (std::uint64_t m = cons_.better[base + c] & drawn; m; m &= m - 1)
                    hi = std::min(hi, u_[base + std::countr_zero(m)]);
                u_[base + c] = draw_truncated_normal(
                    xb_[base + c], sigma2_[type_[c]], lo, hi, rng_);
            }
        }
    }

    // In-place sweep: lower-index programs already hold this iteration's
    // draws. Every current value satisfies all relations, so the bound over
    // the immediate neighbors equals the bound over the full closed sets.
    void update_utilities()
    {
        auto const inf = std::numeric_limits<double>::infinity();
        std::vector<double> sd(static_cast<std::size_t>(t_));
        std::vector<double> inv_sd(static_cast<std::size_t>(t_));
        for (int t = 0; t < t_; ++t)
        {
            sd[t] = std::sqrt(sigma2_[t]);
            inv_sd[t] = 1.0 / sd[t];
        }
        for (int i = 0; i < k_; ++i)
        {
            std::size_t const base = static_cast<std::size_t>(i) * n_;
            double* u = u_.data() + base;
            for (int c = 0; c < n_; ++c)
            {
                std::size_t const r = base + c;
                std::uint32_t const lb = cons_.lo_begin[r], le = cons_.lo_begin[r + 1];
                std::uint32_t const hb = cons_.hi_begin[r], he = cons_.hi_begin[r + 1];
                double const mean = xb_[r];
                int const t = type_[c];
                if (lb == le && hb == he)
                {
                    u[c] = mean + sd[t] * rng_.normal();
                    continue;
                }
                double lo = -inf;
                double hi = inf;
                for (auto j = lb; j < le; ++j)
                    lo = std::max(lo, u[cons_.lo[j]]);
                for (auto j = hb; j < he; ++j)
                    hi = std::min(hi, u[cons_.hi[j]]);
                double const x
                    = mean
                      + sd[t]
                            * detail::standard_truncated((lo - mean) * inv_sd[t],
                                                         (hi - mean) * inv_sd[t],
                                                         rng_);
                // rounding can land on a bound; the checked path redraws
                u[c] = (x > lo && x < hi)
                           ? x
                           : draw_truncated_normal(mean, sigma2_[t], lo, hi, rng_);
            }
        }
    }

    void update_beta(int iteration)
    {
        // Whitening by Sigma^{-1/2} scales program-c rows by 1/sigma_c, so
        // X*'X* = sum_t G_t / sigma2_t and X*'U* = X' (U / sigma2).
        Eigen::MatrixXd precision
            = cfg_.prior_precision * Eigen::MatrixXd::Identity(p_, p_);
        for (int t = 0; t < t_; ++t)
            precision += gram_[t] / sigma2_[t];
        for (int c = 0; c < n_; ++c)
            inv_var_[c] = 1.0 / sigma2_[type_[c]];
        for (std::size_t r = 0; r < u_.size(); ++r)
            scaled_[r] = u_[r] * inv_var_[r % n_];
        Eigen::Map<Eigen::VectorXd const> w(scaled_.data(),
                                            static_cast<Eigen::Index>(scaled_.size()));
        Eigen::VectorXd const rhs = d_.x.transpose() * w;

        if (cfg_.whitening_check_every > 0
            && iteration % cfg_.whitening_check_every == 0)
            check_whitening(precision);

        Eigen::LLT<Eigen::MatrixXd> llt(precision);
        if (llt.info() != Eigen::Success)
            throw NumericalError("posterior precision is not positive definite");
        Eigen::VectorXd const mean = llt.solve(rhs);
        Eigen::VectorXd z(p_);
        for (int j = 0; j < p_; ++j)
            z[j] = rng_.normal();
        // P = L L' so beta = mean + L'^{-1} z has covariance P^{-1}.
        beta_ = mean + llt.matrixU().solve(z);
        compute_xb();
    }

    void update_variances()
    {
        std::vector<double> ss(static_cast<std::size_t>(t_), 0.0);
        for (int i = 0; i < k_; ++i)
            for (int c = 0; c < n_; ++c)
            {
                auto const r = static_cast<std::size_t>(i) * n_ + c;
                double const e = u_[r] - xb_[r];
                ss[type_[c]] += e * e;
            }
        for (int t = 0; t < t_; ++t)
        {
            if (t == d_.pinned_type)
                continue;
            double const shape = 0.5 * (nu_[t] + static_cast<double>(k_) * count_[t]);
            double const scale = 0.5 * (v0_[t] + ss[t]);
            sigma2_[t] = draw_inverse_gamma(shape, scale);
        }
    }

    void check_whitening(Eigen::MatrixXd const& precision) const
    {
        Eigen::MatrixXd xs = d_.x;
        for (Eigen::Index r = 0; r < xs.rows(); ++r)
            xs.row(r) /= std::sqrt(sigma2_[type_[r % n_]]);
        Eigen::MatrixXd const explicit_gram = xs.transpose() * xs;
        Eigen::MatrixXd const formula
            = precision - cfg_.prior_precision * Eigen::MatrixXd::Identity(p_, p_);
        double const scale = std::max(1.0, explicit_gram.cwiseAbs().maxCoeff());
        if ((explicit_gram - formula).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw NumericalError("whitened cross-product disagrees with the "
                                 "per-type formula");
    }

    void check_draws(int iteration) const
    {
        for (int i = 0; i < k_; ++i)
        {
            std::size_t const base = static_cast<std::size_t>(i) * n_;
            for (int c = 0; c < n_; ++c)
            {
                for (std::uint64_t m = cons_.worse[base + c]; m; m &= m - 1)
                {
                    if (!(u_[base + c] > u_[base + std::countr_zero(m)]))
                        throw NumericalError(
                            "utility draw violates a relation of student "
                            + std::to_string(i) + " at iteration "
                            + std::to_string(iteration));
                }
            }
        }
    }

    UtilityDesign const& d_;
    Constraints const& cons_;
    GibbsConfig const& cfg_;
    FastStream rng_;
    int k_, n_, p_, t_;
    std::vector<int> type_;
    std::vector<int> count_;
    std::vector<double> nu_, v0_;
    std::vector<Eigen::MatrixXd> gram_;
    std::vector<double> u_, xb_, scaled_, inv_var_, sigma2_;
    Eigen::VectorXd beta_;
};
}  // namespace

PosteriorDraws gibbs_estimate(std::span<RelationSet const> relations,
                              UtilityDesign const& design,
                              GibbsConfig const& config)
{
    validate_design(design);
    if (relations.size() != static_cast<std::size_t>(design.n_students))
        throw ValidationError("relation sets do not match student count");
    if (config.n_iter < 1 || config.burn_in < 0 || config.thin < 1
        || config.burn_in >= config.n_iter)
        throw ValidationError("Gibbs settings need 0 <= burn_in < n_iter and "
                              "thin >= 1");
    if (config.n_chains < 1)
        throw ValidationError("Gibbs needs at least one chain");
    if (!(config.prior_precision > 0.0))
        throw ValidationError("prior precision must be positive");

    Constraints const cons(relations, design.n_programs);

    PosteriorDraws out;
    out.param_names = design.param_names;
    out.n_types = design.n_types();
    out.pinned_type = design.pinned_type;
    out.beta.resize(static_cast<std::size_t>(config.n_chains));
    out.sigma2.resize(static_cast<std::size_t>(config.n_chains));
    parallel_for(out.beta.size(), config.threads, [&](std::size_t chain) {
        Chain ch(design, cons, config, static_cast<int>(chain));
        ch.run(out.beta[chain], out.sigma2[chain]);
    });
    return out;
}

//---------------------------------------------------------------------------//

std::vector<RankedPair> pairs_from_ranking(std::span<int const> ranking)
{
    std::vector<RankedPair> out;
    for (std::size_t a = 0; a < ranking.size(); ++a)
        for (std::size_t b = a + 1; b < ranking.size(); ++b)
            out.emplace_back(ranking[a], ranking[b]);
    return out;
}

namespace
{
double log_sigmoid(double z)
{
    return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double sigmoid(double z)
{
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

void validate_pairs(std::span<RankedPair const> pairs, Eigen::MatrixXd const& x)
{
    if (pairs.empty())
        throw ValidationError("priority logit needs at least one ranked pair");
    if (!x.allFinite())
        throw ValidationError("non-finite covariate in priority logit");
    for (auto [w, l] : pairs)
    {
        if (w < 0 || l < 0 || w >= x.rows() || l >= x.rows() || w == l)
            throw ValidationError("ranked pair (" + std::to_string(w) + ", "
                                  + std::to_string(l) + ") is invalid");
    }
}
}  // namespace

double pairwise_loglik(std::span<RankedPair const> pairs,
                       Eigen::MatrixXd const& x, Eigen::VectorXd const& beta)
{
    validate_pairs(pairs, x);
    Eigen::VectorXd const v = x * beta;
    double ll = 0.0;
    for (auto [w, l] : pairs)
        ll += log_sigmoid(v[w] - v[l]);
    return ll;
}

LogitFit fit_priority_logit(std::span<RankedPair const> pairs,
                            Eigen::MatrixXd const& x,
                            LogitOptions const& options)
{
    validate_pairs(pairs, x);
    if (options.ridge < 0.0)
        throw ValidationError("ridge penalty must be non-negative");
    auto const q = x.cols();

    auto objective = [&](Eigen::VectorXd const& b) {
        return pairwise_loglik(pairs, x, b) - 0.5 * options.ridge * b.squaredNorm();
    };

    LogitFit fit;
    fit.beta = Eigen::VectorXd::Zero(q);
    double f = objective(fit.beta);
    Eigen::MatrixXd hess(q, q);
    // Saturated fits beyond this norm mean the likelihood has no maximum.
    double const divergence = 1e4;
    for (int it = 1; it <= options.max_iter; ++it)
    {
        Eigen::VectorXd const v = x * fit.beta;
        Eigen::VectorXd grad = -options.ridge * fit.beta;
        hess = -options.ridge * Eigen::MatrixXd::Identity(q, q);
        // If every pair is already ordered correctly, scaling beta up raises
        // the likelihood forever.
        double min_margin = std::numeric_limits<double>::infinity();
        for (auto [w, l] : pairs)
            min_margin = std::min(min_margin, v[w] - v[l]);
        if (options.ridge == 0.0 && min_margin > 0.0)
            throw NumericalError(
                "priority logit diverges: the rankings are completely "
                "separated by the covariates; set a ridge penalty");
        for (auto [w, l] : pairs)
        {
            Eigen::VectorXd const dx = x.row(w) - x.row(l);
            double const p = sigmoid(v[w] - v[l]);
            grad += (1.0 - p) * dx;
            hess.noalias() -= p * (1.0 - p) * dx * dx.transpose();
        }
        fit.iterations = it;
        if (grad.lpNorm<Eigen::Infinity>() <= options.tolerance)
            break;

        Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
        Eigen::VectorXd step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()
            && ldlt.vectorD().minCoeff() > 1e-300)
            step = ldlt.solve(grad);
        else
            step = grad;
        double t = 1.0;
        Eigen::VectorXd next = fit.beta + step;
        double fn = objective(next);
        while (!(fn >= f) && t > 1e-12)
        {
            t *= 0.5;
            next = fit.beta + t * step;
            fn = objective(next);
        }
        if (!(fn >= f))
            break;  // no ascent possible at machine precision
        fit.beta = next;
        f = fn;
        if (fit.beta.lpNorm<Eigen::Infinity>() > divergence)
            throw NumericalError(
                "priority logit diverges: the rankings are completely "
                "separated by the covariates; set a ridge penalty");
        if (it == options.max_iter)
            throw NumericalError("priority logit did not converge within "
                                 + std::to_string(options.max_iter)
                                 + " iterations");
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()
        || ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError("priority logit information matrix is singular; "
                             "covariates may be constant or collinear");
    Eigen::MatrixXd const cov = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
    fit.se = cov.diagonal().cwiseSqrt();
    fit.loglik = pairwise_loglik(pairs, x, fit.beta);
    fit.scores = x * fit.beta;
    return fit;
}

std::vector<double> score_percentiles(Eigen::VectorXd const& scores)
{
    auto const n = static_cast<std::size_t>(scores.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    std::vector<double> out(n);
    for (std::size_t a = 0; a < n;)
    {
        std::size_t b = a;
        while (b < n && scores[order[b]] == scores[order[a]])
            ++b;
        double const mid = 0.5 * static_cast<double>(a + b);  // mid-rank
        for (std::size_t j = a; j < b; ++j)
            out[order[j]] = mid / static_cast<double>(n);
        a = b;
    }
    return out;
}

}  // namespace teps
