#include "teps/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "teps/errors.hpp"
#include "teps/inference.hpp"
#include "teps/parallel.hpp"

namespace teps
{
namespace
{
std::uint64_t u64(int v)
{
    return static_cast<std::uint64_t>(v);
}

// Seed for a sub-task, derived from the master seed and a stream path.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
{
    return RandomStream(seed, path)();
}

constexpr int kQuality = 0;
constexpr int kA = 1;
constexpr int kSmall = 2;
}  // namespace

std::string to_string(Dgp dgp)
{
    switch (dgp)
    {
    case Dgp::tt: return "TT";
    case Dgp::mis_irr: return "MIS-IRR";
    case Dgp::mis_rel: return "MIS-REL";
    }
    return "?";
}

Dgp parse_dgp(std::string const& name)
{
    for (Dgp d : {Dgp::tt, Dgp::mis_irr, Dgp::mis_rel})
    {
        if (to_string(d) == name)
            return d;
    }
    throw ValidationError("unknown DGP '" + name + "' (TT, MIS-IRR or MIS-REL)");
}

void McConfig::validate() const
{
    int const c = static_cast<int>(capacities.size());
    if (c < 1 || c > kMaxPrograms)
        throw ValidationError("between 1 and 64 programs are supported");
    if (n_students < 1)
        throw ValidationError("n_students must be positive");
    if (std::any_of(capacities.begin(), capacities.end(), [](int v) { return v < 0; }))
        throw ValidationError("capacities must be non-negative");
    if (beta.size() != 4)
        throw ValidationError("beta needs four coefficients");
    if (sigma2.size() != capacities.size())
        throw ValidationError("one error variance per program is required");
    if (std::any_of(sigma2.begin(), sigma2.end(), [](double v) { return !(v > 0); }))
        throw ValidationError("error variances must be positive");
    if (n_groups < 1)
        throw ValidationError("n_groups must be positive");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(p_disadvantaged) || !prob(p_skip_disadvantaged) || !prob(p_skip_other)
        || !prob(rel_threshold))
        throw ValidationError("probabilities must lie in [0, 1]");
    if (n_samples < 1 || n_cutoff_draws < 1 || n_pool_samples < 1 || n_pool_draws < 1
        || n_behavior_draws < 0)
        throw ValidationError("sample and draw counts must be positive");
    if (threads < 1)
        throw ValidationError("threads must be positive");
}

Eigen::VectorXd SyntheticEconomy::disadvantaged() const
{
    return economy.covariates.col(0);
}

Economy::RowMatrix program_positions(int n_programs)
{
    Economy::RowMatrix out(n_programs, 2);
    for (int c = 0; c < n_programs; ++c)
    {
        double const angle = 2.0 * std::numbers::pi * c / n_programs;
        out(c, 0) = 0.5 * std::cos(angle);
        out(c, 1) = 0.5 * std::sin(angle);
    }
    return out;
}

SyntheticEconomy generate_economy(McConfig const& cfg, std::uint64_t sample,
                                  StreamTag stream)
{
    cfg.validate();
    int const k = cfg.n_students;
    int const n_c = static_cast<int>(cfg.capacities.size());
    RandomStream rng(cfg.seed, {tag(stream), sample});

    SyntheticEconomy out;
    Economy& e = out.economy;
    e.attribute_names = {"quality", "A", "small"};
    for (int c = 0; c < n_c; ++c)
    {
        Program p;
        p.id = c;
        p.school_id = c;
        p.capacity = cfg.capacities[c];
        p.mode = PriorityMode::lottery_coarse;
        p.n_groups = cfg.n_groups;
        p.attributes = {static_cast<double>(c + 1), (c + 1) % 2 == 1 ? 1.0 : 0.0,
                        cfg.capacities[c] == 50 ? 1.0 : 0.0};
        e.programs.push_back(p);
    }
    e.tiebreak = TieBreak::stb;
    e.intrinsic.resize(k, n_c);
    e.covariate_names = {"D"};
    e.covariates.resize(k, 1);
    out.position.resize(k, 2);
    out.distance.resize(k, n_c);
    out.utility.resize(k, n_c);
    out.sigma2 = cfg.sigma2;

    auto const where = program_positions(n_c);
    auto const& b = cfg.beta;
    for (int i = 0; i < k; ++i)
    {
        // uniform on the unit disc
        double const r = std::sqrt(rng.uniform());
        double const theta = 2.0 * std::numbers::pi * rng.uniform();
        out.position(i, 0) = r * std::cos(theta);
        out.position(i, 1) = r * std::sin(theta);
        for (int c = 0; c < n_c; ++c)
            e.intrinsic(i, c) = static_cast<double>(rng.below(u64(cfg.n_groups)));
        double const d = e.intrinsic(i, 0) == 0.0 && rng.bernoulli(cfg.p_disadvantaged)
                             ? 1.0
                             : 0.0;
        e.covariates(i, 0) = d;
        for (int c = 0; c < n_c; ++c)
        {
            double const dist = std::hypot(out.position(i, 0) - where(c, 0),
                                           out.position(i, 1) - where(c, 1));
            out.distance(i, c) = dist;
            auto const& a = e.programs[c].attributes;
            out.utility(i, c) = b[0] * a[kQuality] + b[1] * d * a[kA] + b[2] * dist
                                + b[3] * a[kSmall]
                                + std::sqrt(cfg.sigma2[c]) * rng.normal();
        }
    }
    return out;
}

UtilityDesign make_design(SyntheticEconomy const& s)
{
    auto const& e = s.economy;
    int const k = e.n_students();
    int const n_c = e.n_programs();
    UtilityDesign d;
    d.n_students = k;
    d.n_programs = n_c;
    d.param_names = {"quality", "DxA", "distance", "small"};
    d.x.resize(static_cast<Eigen::Index>(k) * n_c, 4);
    for (int i = 0; i < k; ++i)
    {
        double const di = e.covariates(i, 0);
        for (int c = 0; c < n_c; ++c)
        {
            auto const& a = e.programs[c].attributes;
            auto const r = static_cast<Eigen::Index>(i) * n_c + c;
            d.x(r, 0) = a[kQuality];
            d.x(r, 1) = di * a[kA];
            d.x(r, 2) = s.distance(i, c);
            d.x(r, 3) = a[kSmall];
        }
    }
    // Programs sharing the first program's variance form the pinned type.
    std::vector<double> levels;
    for (double v : s.sigma2)
    {
        if (std::find(levels.begin(), levels.end(), v) == levels.end())
            levels.push_back(v);
    }
    for (double v : s.sigma2)
        d.program_type.push_back(static_cast<int>(
            std::find(levels.begin(), levels.end(), v) - levels.begin()));
    d.pinned_type = 0;
    return d;
}

std::vector<Rol> truthful_rols(Economy::RowMatrix const& utility)
{
    std::vector<Rol> out(static_cast<std::size_t>(utility.rows()));
    for (Eigen::Index i = 0; i < utility.rows(); ++i)
    {
        Rol& r = out[i];
        r.resize(static_cast<std::size_t>(utility.cols()));
        std::iota(r.begin(), r.end(), 0);
        std::stable_sort(r.begin(), r.end(), [&](ProgramId a, ProgramId b) {
            return utility(i, a) > utility(i, b);
        });
    }
    return out;
}

//---------------------------------------------------------------------------//

std::vector<std::vector<double>> simulate_cutoff_pool(McConfig const& cfg)
{
    cfg.validate();
    std::vector<std::vector<double>> pool;
    pool.reserve(static_cast<std::size_t>(cfg.n_pool_samples) * cfg.n_pool_draws);
    for (int s = 0; s < cfg.n_pool_samples; ++s)
    {
        auto const econ = generate_economy(cfg, u64(s), StreamTag::cutoff_pool);
        auto const rols = truthful_rols(econ.utility);
        auto draws = simulate_cutoff_distribution(
            econ.economy, rols, cfg.n_pool_draws,
            derive_seed(cfg.seed, {tag(StreamTag::cutoff_pool), u64(s), 1}),
            cfg.threads);
        for (auto& d : draws)
            pool.push_back(std::move(d));
    }
    return pool;
}

SkipProbabilities skip_probabilities(SyntheticEconomy const& s,
                                     std::span<std::vector<double> const> pool,
                                     int n_draws, std::uint64_t seed, int threads)
{
    auto const& e = s.economy;
    if (pool.empty())
        throw ValidationError("cutoff pool is empty");
    int const k = e.n_students();
    int const n_c = e.n_programs();
    for (auto const& v : pool)
    {
        if (static_cast<int>(v.size()) != n_c)
            throw ValidationError("cutoff pool vectors do not match program count");
    }
    if (e.tiebreak != TieBreak::stb)
        throw ValidationError("skip probabilities assume single tie-breaking");
    bool const resample = n_draws > 0;
    int const n = resample ? n_draws : static_cast<int>(pool.size());

    SkipProbabilities out;
    out.assignment = Economy::RowMatrix::Zero(k, n_c);
    out.admission = Economy::RowMatrix::Zero(k, n_c);
    parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t i) {
        RandomStream rng(seed, {tag(StreamTag::own_score), i});
        std::vector<double> score(static_cast<std::size_t>(n_c));
        auto const ii = static_cast<Eigen::Index>(i);
        for (int j = 0; j < n; ++j)
        {
            double const lot = rng.uniform();
            double const exam = rng.uniform();
            auto const& cut = pool[resample ? rng.below(pool.size())
                                            : static_cast<std::size_t>(j)];
            detail::student_scores(e, static_cast<int>(i), {&lot, 1}, exam, score);
            int best = -1;
            for (int c = 0; c < n_c; ++c)
            {
                if (score[c] >= cut[c])
                {
                    out.admission(ii, c) += 1.0;
                    if (best < 0 || s.utility(ii, c) > s.utility(ii, best))
                        best = c;
                }
            }
            if (best >= 0)
                out.assignment(ii, best) += 1.0;
        }
    });
    out.assignment /= n;
    out.admission /= n;
    return out;
}

std::vector<char> stable_students(SyntheticEconomy const& s,
                                  std::span<Rol const> rols,
                                  LotteryDraw const& draw)
{
    auto const scores = realize_scores(s.economy, draw);
    auto const m = run_da(rols, scores, s.economy.programs);
    int const k = s.economy.n_students();
    int const n_c = s.economy.n_programs();
    std::vector<char> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
    {
        int best = kUnassigned;
        for (int c = 0; c < n_c; ++c)
        {
            if (is_feasible(m, scores, i, c)
                && (best == kUnassigned || s.utility(i, c) > s.utility(i, best)))
                best = c;
        }
        out[i] = m.assignment[i] == best;
    }
    return out;
}

Behavior apply_behavior(SyntheticEconomy const& s, Dgp dgp,
                        SkipProbabilities const& probs, McConfig const& cfg,
                        std::uint64_t behavior_seed, LotteryDraw const& observed)
{
    int const k = s.economy.n_students();
    int const n_c = s.economy.n_programs();
    if (probs.assignment.rows() != k || probs.assignment.cols() != n_c
        || probs.admission.rows() != k || probs.admission.cols() != n_c)
        throw ValidationError("skip probabilities do not match the economy");

    auto const truth = truthful_rols(s.utility);
    Behavior out;
    out.rols.resize(static_cast<std::size_t>(k));
    out.skipper.assign(static_cast<std::size_t>(k), 0);
    out.fallback.assign(static_cast<std::size_t>(k), 0);
    std::size_t total_length = 0;
    int wtt = 0, mistakes = 0;
    for (int i = 0; i < k; ++i)
    {
        RandomStream rng(behavior_seed, {tag(StreamTag::behavior), u64(i)});
        double const p = s.economy.covariates(i, 0) == 1.0 ? cfg.p_skip_disadvantaged
                                                            : cfg.p_skip_other;
        out.skipper[i] = rng.bernoulli(p);

        Rol const& full = truth[i];
        Rol& rol = out.rols[i];
        if (dgp == Dgp::tt || !out.skipper[i])
            rol = full;
        else
        {
            for (ProgramId c : full)
            {
                bool keep = probs.assignment(i, c) > 0.0;
                if (dgp == Dgp::mis_rel)
                    keep = keep
                           && (cfg.rel_on_admission ? probs.admission(i, c)
                                                    : probs.assignment(i, c))
                                  >= cfg.rel_threshold;
                if (keep)
                    rol.push_back(c);
            }
            if (rol.empty())
            {
                // keep the single most likely assignment
                Eigen::Index best = 0;
                probs.assignment.row(i).maxCoeff(&best);
                rol.push_back(static_cast<ProgramId>(best));
                out.fallback[i] = 1;
            }
            // flip: a skipped favorite goes back at the end
            if (std::find(rol.begin(), rol.end(), full[0]) == rol.end())
                rol.push_back(full[0]);
        }

        total_length += rol.size();
        wtt += std::equal(rol.begin(), rol.end(), full.begin());
        mistakes += rol != full;
    }

    auto const stable = stable_students(s, out.rols, observed);
    out.stats.mean_rol_length = static_cast<double>(total_length) / k;
    out.stats.wtt_share = static_cast<double>(wtt) / k;
    out.stats.mistake_share = static_cast<double>(mistakes) / k;
    out.stats.stable_share
        = static_cast<double>(std::count(stable.begin(), stable.end(), 1)) / k;
    out.stats.n_fallback
        = static_cast<int>(std::count(out.fallback.begin(), out.fallback.end(), 1));
    return out;
}

//---------------------------------------------------------------------------//

std::string to_string(Policy policy)
{
    switch (policy)
    {
    case Policy::none: return "NONE";
    case Policy::no_screening: return "NO_SCREENING";
    case Policy::no_zoning: return "NO_ZONING";
    case Policy::no_priorities: return "NO_PRIORITIES";
    }
    return "?";
}

Policy parse_policy(std::string const& name)
{
    for (Policy p : {Policy::none, Policy::no_screening, Policy::no_zoning,
                     Policy::no_priorities})
    {
        if (to_string(p) == name)
            return p;
    }
    throw ValidationError("unknown policy '" + name + "'");
}

Economy apply_policy(Economy const& economy, Policy policy)
{
    Economy out = economy;
    auto to_lottery = [&](int c) {
        Program& p = out.programs[c];
        if (p.mode == PriorityMode::lottery_coarse)
            return;
        p.mode = PriorityMode::lottery_coarse;
        p.n_groups = 1;
        out.intrinsic.col(c).setZero();
        if (out.zone.size() > 0)
            out.zone.col(c).setZero();
    };
    switch (policy)
    {
    case Policy::none: break;
    case Policy::no_screening:
        for (int c = 0; c < out.n_programs(); ++c)
            to_lottery(c);
        break;
    case Policy::no_zoning: out.zone.resize(0, 0); break;
    case Policy::no_priorities:
        for (int c = 0; c < out.n_programs(); ++c)
            to_lottery(c);
        out.intrinsic.setZero();
        out.zone.resize(0, 0);
        out.tiebreak = TieBreak::stb;
        break;
    }
    return out;
}

SyntheticEconomy apply_policy(SyntheticEconomy const& economy, Policy policy)
{
    SyntheticEconomy out = economy;
    out.economy = apply_policy(economy.economy, policy);
    return out;
}

double SegregationReport::gap_of(std::string const& metric) const
{
    auto const it = std::find(metrics.begin(), metrics.end(), metric);
    if (it == metrics.end())
        throw ValidationError("unknown segregation metric '" + metric + "'");
    return gap[it - metrics.begin()];
}

SegregationReport assignment_outcomes(Economy const& economy,
                                      std::span<std::vector<Rol> const> profiles,
                                      std::vector<double> const& group,
                                      int n_lottery_draws, std::uint64_t seed,
                                      int threads)
{
    validate_economy(economy);
    int const k = economy.n_students();
    int const n_c = economy.n_programs();
    if (static_cast<int>(group.size()) != k)
        throw ValidationError("group vector does not match student count");
    if (profiles.empty() || n_lottery_draws < 1)
        throw ValidationError("need at least one ROL profile and one lottery draw");
    for (auto const& p : profiles)
    {
        if (static_cast<int>(p.size()) != k)
            throw ValidationError("ROL profile does not match student count");
        validate_rols(p, n_c);
    }

    SegregationReport out;
    std::set<double> const distinct(group.begin(), group.end());
    out.groups.assign(distinct.begin(), distinct.end());
    std::size_t const n_g = out.groups.size();
    std::vector<int> gid(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        gid[i] = static_cast<int>(
            std::lower_bound(out.groups.begin(), out.groups.end(), group[i])
            - out.groups.begin());
    out.metrics = economy.attribute_names;
    int const n_attr = static_cast<int>(out.metrics.size());
    out.metrics.push_back("peer_share");
    auto const n_m = static_cast<Eigen::Index>(out.metrics.size());
    int const top = static_cast<int>(n_g) - 1;

    std::size_t const n_runs = profiles.size() * static_cast<std::size_t>(n_lottery_draws);
    std::vector<Eigen::MatrixXd> run_means(n_runs);
    parallel_for(n_runs, threads, [&](std::size_t r) {
        std::size_t const p = r / n_lottery_draws;
        std::size_t const l = r % n_lottery_draws;
        RandomStream rng(seed, {tag(StreamTag::cf_lottery), p, l});
        auto const scores = realize_scores(economy, draw_lottery(economy, rng));
        auto const m = run_da(profiles[p], scores, economy.programs);

        std::vector<double> at(static_cast<std::size_t>(n_c), 0.0), top_at(at);
        for (int i = 0; i < k; ++i)
        {
            if (m.assignment[i] != kUnassigned)
            {
                at[m.assignment[i]] += 1.0;
                top_at[m.assignment[i]] += gid[i] == top;
            }
        }
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_g), n_m);
        std::vector<double> count(n_g, 0.0);
        for (int i = 0; i < k; ++i)
        {
            int const c = m.assignment[i];
            if (c == kUnassigned)
                continue;
            auto const& a = economy.programs[c].attributes;
            for (int j = 0; j < n_attr; ++j)
                sum(gid[i], j) += a[j];
            sum(gid[i], n_attr) += top_at[c] / at[c];
            count[gid[i]] += 1.0;
        }
        for (std::size_t g = 0; g < n_g; ++g)
        {
            if (count[g] > 0)
                sum.row(static_cast<Eigen::Index>(g)) /= count[g];
            else
                sum.row(static_cast<Eigen::Index>(g)).setConstant(std::nan(""));
        }
        run_means[r] = std::move(sum);
    });

    out.n_runs = static_cast<int>(n_runs);
    out.group_mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_g), n_m);
    for (auto const& m : run_means)
        out.group_mean += m;
    out.group_mean /= static_cast<double>(n_runs);
    out.gap = out.group_mean.row(top).transpose() - out.group_mean.row(0).transpose();
    out.gap_sd = Eigen::VectorXd::Zero(n_m);
    if (n_runs > 1)
    {
        for (auto const& m : run_means)
        {
            Eigen::VectorXd const g = m.row(top).transpose() - m.row(0).transpose();
            out.gap_sd += (g - out.gap).cwiseAbs2();
        }
        out.gap_sd = (out.gap_sd / static_cast<double>(n_runs - 1)).cwiseSqrt();
    }
    return out;
}

SegregationReport evaluate_counterfactual(Economy const& economy,
                                          UtilityDesign const& design,
                                          PosteriorDraws const& posterior,
                                          CounterfactualOptions const& o)
{
    validate_design(design);
    int const k = economy.n_students();
    int const n_c = economy.n_programs();
    if (design.n_students != k || design.n_programs != n_c)
        throw ValidationError("design does not match the economy");
    if (o.n_pref_draws < 1)
        throw ValidationError("need at least one preference draw");
    auto const col = std::find(economy.covariate_names.begin(),
                               economy.covariate_names.end(), o.group_by);
    if (col == economy.covariate_names.end())
        throw ValidationError("unknown group covariate '" + o.group_by + "'");
    auto const gcol = col - economy.covariate_names.begin();
    std::vector<double> group(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        group[i] = economy.covariates(i, gcol);

    auto const beta = posterior.pooled_beta();
    auto const sigma2 = posterior.pooled_sigma2();
    if (beta.rows() < 1 || beta.cols() != design.n_params())
        throw ValidationError("posterior does not match the design");
    auto const n = beta.rows();

    std::vector<std::vector<Rol>> profiles(static_cast<std::size_t>(o.n_pref_draws));
    parallel_for(profiles.size(), o.threads, [&](std::size_t j) {
        // evenly spaced retained draws
        Eigen::Index const idx = static_cast<Eigen::Index>(
            (2 * static_cast<double>(j) + 1) * static_cast<double>(n)
            / (2.0 * o.n_pref_draws));
        Eigen::VectorXd const b = beta.row(idx).transpose();
        RandomStream rng(o.seed, {tag(StreamTag::pref_draw), j});
        Economy::RowMatrix u(k, n_c);
        for (int i = 0; i < k; ++i)
        {
            for (int c = 0; c < n_c; ++c)
            {
                int const t = design.program_type.empty() ? 0 : design.program_type[c];
                auto const r = static_cast<Eigen::Index>(i) * n_c + c;
                u(i, c) = design.x.row(r).dot(b)
                          + std::sqrt(sigma2(idx, t)) * rng.normal();
            }
        }
        profiles[j] = truthful_rols(u);
    });
    return assignment_outcomes(apply_policy(economy, o.policy), profiles, group,
                               o.n_lottery_draws, o.seed, o.threads);
}

//---------------------------------------------------------------------------//

std::vector<SampleResult const*> MonteCarloResult::of(Dgp dgp) const
{
    std::vector<SampleResult const*> out;
    for (auto const& s : samples)
    {
        if (s.dgp == dgp)
            out.push_back(&s);
    }
    return out;
}

std::vector<std::string> method_labels(std::vector<double> const& tau_grid)
{
    std::vector<std::string> out{kWttLabel, teps_label(0.0)};
    std::vector<double> taus = tau_grid;
    std::sort(taus.begin(), taus.end());
    for (double t : taus)
    {
        if (t > 0.0)
            out.push_back(teps_label(t));
    }
    return out;
}

namespace
{
EstimateSummary summarize(std::string const& label, PosteriorDraws const& post)
{
    return {label, post.mean(), post.covariance()};
}

double max_of(std::vector<double> const& v)
{
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}
}  // namespace

MonteCarloResult run_monte_carlo(McConfig const& cfg, McOptions const& opt)
{
    cfg.validate();
    for (double t : opt.tau_grid)
    {
        if (!(t > 0.0 && t <= 100.0))
            throw ValidationError("tau grid values must lie in (0, 100]");
    }
    auto log = [&](std::string const& msg) {
        if (opt.log)
            opt.log(msg);
    };

    MonteCarloResult result;
    result.config = cfg;
    result.param_names = {"quality", "DxA", "distance", "small"};
    auto const methods = method_labels(opt.tau_grid);
    auto const taus = [&] {
        std::vector<double> t{0.0};
        for (auto const& m : methods)
        {
            if (m == kWttLabel || m == teps_label(0.0))
                continue;
            t.push_back(m == teps_label(100.0) ? 100.0 : std::stod(m.substr(5)));
        }
        return t;
    }();
    int const n_c = static_cast<int>(cfg.capacities.size());

    log("simulating truthful cutoff pool");
    auto const pool = simulate_cutoff_pool(cfg);

    for (int s = 0; s < cfg.n_samples; ++s)
    {
        auto const econ = generate_economy(cfg, u64(s));
        auto const design = make_design(econ);
        RandomStream lot_rng(cfg.seed, {tag(StreamTag::observed_lottery), u64(s)});
        auto const observed = draw_lottery(econ.economy, lot_rng);
        auto const probs = skip_probabilities(
            econ, pool, cfg.n_behavior_draws,
            derive_seed(cfg.seed, {tag(StreamTag::own_score), u64(s)}), cfg.threads);
        std::uint64_t const behavior_seed
            = derive_seed(cfg.seed, {tag(StreamTag::behavior), u64(s)});

        for (Dgp dgp : opt.dgps)
        {
            auto const d = static_cast<std::uint64_t>(dgp);
            SampleResult res;
            res.dgp = dgp;
            res.sample = s;
            res.methods = methods;
            auto const behavior
                = apply_behavior(econ, dgp, probs, cfg, behavior_seed, observed);
            res.behavior = behavior.stats;
            if (!opt.estimate)
            {
                res.methods.clear();
                result.samples.push_back(std::move(res));
                continue;
            }

            PartitionOptions popt;
            popt.mode = PartitionMode::joint;
            popt.n_draws = cfg.n_cutoff_draws;
            popt.seed = derive_seed(cfg.seed, {tag(StreamTag::lottery), d, u64(s)});
            popt.threads = cfg.threads;
            auto const partition
                = build_feasible_partition(econ.economy, behavior.rols, popt);

            GibbsConfig gcfg = opt.gibbs;
            gcfg.seed = derive_seed(opt.gibbs.seed ^ cfg.seed,
                                    {tag(StreamTag::gibbs_chain), d, u64(s)});
            gcfg.threads = std::max(gcfg.threads, cfg.threads);

            std::vector<std::vector<RelationSet>> method_rels;
            std::map<std::string, PosteriorDraws> posts;
            for (std::size_t m = 0; m < methods.size(); ++m)
            {
                std::vector<RelationSet> rels(static_cast<std::size_t>(cfg.n_students));
                for (int i = 0; i < cfg.n_students; ++i)
                {
                    rels[i] = m == 0 ? wtt_infer(behavior.rols[i], n_c)
                                     : teps_infer(partition[i], behavior.rols[i],
                                                  taus[m - 1], n_c);
                }
                // Same relations and seed give the same posterior.
                auto const same = std::find(method_rels.begin(), method_rels.end(), rels);
                if (same != method_rels.end())
                    posts[methods[m]] = posts[methods[same - method_rels.begin()]];
                else
                {
                    log(to_string(dgp) + " sample " + std::to_string(s + 1) + "/"
                        + std::to_string(cfg.n_samples) + ": " + methods[m]);
                    posts[methods[m]] = gibbs_estimate(rels, design, gcfg);
                }
                method_rels.push_back(std::move(rels));
                res.estimates[methods[m]] = summarize(methods[m], posts[methods[m]]);
                res.max_psrf[methods[m]] = max_of(posts[methods[m]].psrf());
            }

            auto const& top = res.estimates.at(teps_label(0.0));
            res.selection = select_model(res.estimates, top, opt.tau_grid, opt.alpha,
                                         opt.wald, kWttLabel);

            if (std::find(opt.counterfactual_dgps.begin(), opt.counterfactual_dgps.end(),
                          dgp)
                != opt.counterfactual_dgps.end())
            {
                auto const teps_only = select_model(res.estimates, top, opt.tau_grid,
                                                    opt.alpha, opt.wald, "");
                CounterfactualOptions co = opt.counterfactual;
                co.seed = derive_seed(cfg.seed ^ opt.counterfactual.seed,
                                      {tag(StreamTag::pref_draw), d, u64(s)});
                co.threads = std::max(co.threads, cfg.threads);
                auto effect = [&](PosteriorDraws const& post) {
                    CounterfactualOptions base = co;
                    base.policy = Policy::none;
                    double const before = evaluate_counterfactual(econ.economy, design,
                                                                  post, base)
                                              .gap_of(opt.counterfactual_metric);
                    double const after = evaluate_counterfactual(econ.economy, design,
                                                                 post, co)
                                             .gap_of(opt.counterfactual_metric);
                    return after - before;
                };
                res.has_counterfactual = true;
                res.counterfactual.teps_label = teps_only.chosen;
                res.counterfactual.wtt_effect = effect(posts.at(kWttLabel));
                res.counterfactual.teps_effect = effect(posts.at(teps_only.chosen));
            }
            result.samples.push_back(std::move(res));
        }
    }
    return result;
}

//---------------------------------------------------------------------------//

std::vector<std::pair<Dgp, BehaviorStats>> behavior_table(MonteCarloResult const& r)
{
    std::vector<std::pair<Dgp, BehaviorStats>> out;
    for (Dgp dgp : {Dgp::tt, Dgp::mis_irr, Dgp::mis_rel})
    {
        auto const rows = r.of(dgp);
        if (rows.empty())
            continue;
        BehaviorStats avg;
        for (auto const* s : rows)
        {
            avg.mean_rol_length += s->behavior.mean_rol_length;
            avg.wtt_share += s->behavior.wtt_share;
            avg.stable_share += s->behavior.stable_share;
            avg.mistake_share += s->behavior.mistake_share;
            avg.n_fallback += s->behavior.n_fallback;
        }
        double const n = static_cast<double>(rows.size());
        avg.mean_rol_length /= n;
        avg.wtt_share *= 100.0 / n;
        avg.stable_share *= 100.0 / n;
        avg.mistake_share *= 100.0 / n;
        out.emplace_back(dgp, avg);
    }
    return out;
}

std::vector<MethodSummary> estimate_table(MonteCarloResult const& r)
{
    std::vector<MethodSummary> out;
    auto const& truth = r.config.beta;
    for (Dgp dgp : {Dgp::tt, Dgp::mis_irr, Dgp::mis_rel})
    {
        auto const rows = r.of(dgp);
        if (rows.empty() || rows.front()->methods.empty())
            continue;
        auto labels = rows.front()->methods;
        labels.push_back("Selected");
        for (auto const& label : labels)
        {
            for (std::size_t j = 0; j < r.param_names.size(); ++j)
            {
                std::vector<double> v;
                for (auto const* s : rows)
                {
                    auto const& key = label == "Selected" ? s->selection.chosen : label;
                    v.push_back(s->estimates.at(key).beta[static_cast<Eigen::Index>(j)]);
                }
                double const n = static_cast<double>(v.size());
                double const mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
                double ss = 0, se = 0;
                for (double x : v)
                {
                    ss += (x - mean) * (x - mean);
                    se += (x - truth[j]) * (x - truth[j]);
                }
                out.push_back({dgp, label, r.param_names[j], mean,
                               v.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0,
                               std::sqrt(se / n)});
            }
        }
    }
    return out;
}

std::vector<std::tuple<Dgp, std::string, int>> selection_table(MonteCarloResult const& r)
{
    std::vector<std::tuple<Dgp, std::string, int>> out;
    for (Dgp dgp : {Dgp::tt, Dgp::mis_irr, Dgp::mis_rel})
    {
        auto const rows = r.of(dgp);
        if (rows.empty())
            continue;
        for (auto const& label : rows.front()->methods)
        {
            int const n = static_cast<int>(std::count_if(
                rows.begin(), rows.end(),
                [&](SampleResult const* s) { return s->selection.chosen == label; }));
            out.emplace_back(dgp, label, n);
        }
    }
    return out;
}

std::vector<std::filesystem::path> write_tables(MonteCarloResult const& r,
                                                std::filesystem::path const& dir,
                                                std::string const& header)
{
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto open = [&](std::string const& name) {
        auto path = dir / name;
        std::ofstream f(path);
        if (!f)
            throw ValidationError("cannot write " + path.string());
        f << header << '\n' << std::setprecision(10);
        written.push_back(path);
        return f;
    };

    {
        auto f = open("table_c1.csv");
        f << "dgp,mean_rol_length,wtt_pct,stable_pct,mistakes_pct,n_fallback\n";
        for (auto const& [dgp, b] : behavior_table(r))
            f << to_string(dgp) << ',' << b.mean_rol_length << ',' << b.wtt_share << ','
              << b.stable_share << ',' << b.mistake_share << ',' << b.n_fallback << '\n';
    }
    {
        auto f = open("table_c2.csv");
        f << "dgp,method,param,mean,sd,rmse\n";
        for (auto const& m : estimate_table(r))
            f << to_string(m.dgp) << ',' << m.method << ',' << m.param << ',' << m.mean
              << ',' << m.sd << ',' << m.rmse << '\n';
    }
    {
        auto f = open("table_c3.csv");
        f << "dgp,chosen,count,share\n";
        for (auto const& [dgp, label, n] : selection_table(r))
            f << to_string(dgp) << ',' << label << ',' << n << ','
              << static_cast<double>(n) / r.of(dgp).size() << '\n';
    }
    {
        auto f = open("samples.csv");
        f << "dgp,sample,method,param,estimate,sd,max_psrf,chosen\n";
        for (auto const& s : r.samples)
        {
            for (auto const& label : s.methods)
            {
                auto const& e = s.estimates.at(label);
                for (std::size_t j = 0; j < r.param_names.size(); ++j)
                {
                    auto const jj = static_cast<Eigen::Index>(j);
                    f << to_string(s.dgp) << ',' << s.sample << ',' << label << ','
                      << r.param_names[j] << ',' << e.beta[jj] << ','
                      << std::sqrt(e.covariance(jj, jj)) << ',' << s.max_psrf.at(label)
                      << ',' << (s.selection.chosen == label) << '\n';
                }
            }
        }
    }
    if (std::any_of(r.samples.begin(), r.samples.end(),
                    [](SampleResult const& s) { return s.has_counterfactual; }))
    {
        auto f = open("counterfactual.csv");
        f << "dgp,sample,selected_teps,wtt_effect,teps_effect\n";
        for (auto const& s : r.samples)
        {
            if (s.has_counterfactual)
                f << to_string(s.dgp) << ',' << s.sample << ','
                  << s.counterfactual.teps_label << ',' << s.counterfactual.wtt_effect
                  << ',' << s.counterfactual.teps_effect << '\n';
        }
    }
    return written;
}

}  // namespace teps
