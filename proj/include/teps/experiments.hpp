#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "teps/estimation.hpp"
#include "teps/random.hpp"
#include "teps/selection.hpp"
#include "teps/uncertainty.hpp"

namespace teps
{
//---------------------------------------------------------------------------//
// Synthetic school-choice economies
//---------------------------------------------------------------------------//

enum class Dgp
{
    tt,       //!< truthful full ROLs
    mis_irr,  //!< skip never-matched programs
    mis_rel,  //!< additionally skip programs with low admission chances
};

std::string to_string(Dgp dgp);
Dgp parse_dgp(std::string const& name);

struct McConfig
{
    int n_students = 1000;
    std::vector<int> capacities{110, 50, 100, 100, 50, 100, 100, 50, 100, 100, 50, 100};
    //! Quality (program index), D x A interaction, distance, small program.
    std::vector<double> beta{0.3, 2.0, -1.0, 0.0};
    //! Error variance per program; the first value's programs are pinned.
    std::vector<double> sigma2{1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2};
    int n_groups = 4;
    //! P(D = 1) among students in the lowest group at the first program.
    double p_disadvantaged = 2.0 / 3.0;

    int n_samples = 20;
    //! DA draws per estimation sample for feasible-set partitions.
    int n_cutoff_draws = 2000;
    //! Truth-telling cutoff pool: economies x lottery draws each.
    int n_pool_samples = 100;
    int n_pool_draws = 1000;
    //! Own-lottery draws per student when scoring skip decisions
    //! (0: one per pool vector).
    int n_behavior_draws = 0;

    //! Potential-skipper probability by student type.
    double p_skip_disadvantaged = 0.956;
    double p_skip_other = 0.701;
    //! MIS-REL drops programs whose chance of being matched (or of being
    //! admitted, with rel_on_admission) is below this.
    double rel_threshold = 0.10;
    bool rel_on_admission = false;

    std::uint64_t seed = 20240601;
    int threads = 1;

    void validate() const;
};

/*!
 * One synthetic economy. Programs carry the attributes "quality"
 * (1-based index), "A" (odd index) and "small" (capacity 50); students carry
 * the covariate "D".
 */
struct SyntheticEconomy
{
    Economy economy;
    Economy::RowMatrix position;  //!< student x/y, k x 2
    Economy::RowMatrix distance;  //!< k x C
    Economy::RowMatrix utility;   //!< true utilities, k x C
    std::vector<double> sigma2;   //!< per-program error variance

    Eigen::VectorXd disadvantaged() const;
};

//! Sample `sample` of the economy stream (cfg.seed, stream, sample).
SyntheticEconomy generate_economy(McConfig const& cfg, std::uint64_t sample,
                                  StreamTag stream = StreamTag::economy);

//! Program positions on the radius-1/2 circle.
Economy::RowMatrix program_positions(int n_programs);

//! Regressors (quality, D x A, distance, small) and variance types
//! (programs with the first variance value pinned, the rest free).
UtilityDesign make_design(SyntheticEconomy const& economy);

//! Programs sorted by descending utility.
std::vector<Rol> truthful_rols(Economy::RowMatrix const& utility);

//---------------------------------------------------------------------------//
// Behavior
//---------------------------------------------------------------------------//

struct BehaviorStats
{
    double mean_rol_length = 0.0;
    double wtt_share = 0.0;
    double stable_share = 0.0;
    double mistake_share = 0.0;
    int n_fallback = 0;  //!< students whose candidate ROL was empty
};

//! Per-student assignment and admission probabilities under truth-telling,
//! scored against a pool of cutoff vectors.
struct SkipProbabilities
{
    Economy::RowMatrix assignment;  //!< k x C
    Economy::RowMatrix admission;   //!< k x C
};

//! Cutoff vectors from `n_pool_samples` fresh truthful economies.
std::vector<std::vector<double>> simulate_cutoff_pool(McConfig const& cfg);

SkipProbabilities skip_probabilities(SyntheticEconomy const& economy,
                                     std::span<std::vector<double> const> pool,
                                     int n_draws, std::uint64_t seed,
                                     int threads = 1);

struct Behavior
{
    std::vector<Rol> rols;
    std::vector<char> skipper;
    std::vector<char> fallback;
    BehaviorStats stats;
};

/*!
 * Submitted ROLs under `dgp`. Potential skippers are drawn per student from
 * `behavior_seed` and are the same across DGPs. Stable share is measured
 * with one DA run on `observed` lotteries.
 */
Behavior apply_behavior(SyntheticEconomy const& economy, Dgp dgp,
                        SkipProbabilities const& probs, McConfig const& cfg,
                        std::uint64_t behavior_seed, LotteryDraw const& observed);

//! Whether each student holds the truly preferred feasible program.
std::vector<char> stable_students(SyntheticEconomy const& economy,
                                  std::span<Rol const> rols,
                                  LotteryDraw const& draw);

//---------------------------------------------------------------------------//
// Counterfactual policies
//---------------------------------------------------------------------------//

enum class Policy
{
    none,
    no_screening,
    no_zoning,
    no_priorities,
};

std::string to_string(Policy policy);
Policy parse_policy(std::string const& name);

Economy apply_policy(Economy const& economy, Policy policy);
SyntheticEconomy apply_policy(SyntheticEconomy const& economy, Policy policy);

/*!
 * Group means of assigned-program attributes. Metrics are the program
 * attributes followed by "peer_share", the share of the highest group among
 * students at the assigned program. Gaps are highest minus lowest group.
 */
struct SegregationReport
{
    std::vector<double> groups;
    std::vector<std::string> metrics;
    Eigen::MatrixXd group_mean;  //!< groups x metrics
    Eigen::VectorXd gap;
    Eigen::VectorXd gap_sd;      //!< across runs
    int n_runs = 0;

    double gap_of(std::string const& metric) const;
};

//! DA outcomes for each ROL profile over `n_lottery_draws` lotteries.
SegregationReport assignment_outcomes(Economy const& economy,
                                      std::span<std::vector<Rol> const> profiles,
                                      std::vector<double> const& group,
                                      int n_lottery_draws, std::uint64_t seed,
                                      int threads = 1);

struct CounterfactualOptions
{
    Policy policy = Policy::no_priorities;
    int n_pref_draws = 20;
    int n_lottery_draws = 20;
    std::string group_by = "D";
    std::uint64_t seed = 0;
    int threads = 1;
};

//! Truthful ROLs from posterior preference draws, run under the policy.
SegregationReport evaluate_counterfactual(Economy const& economy,
                                          UtilityDesign const& design,
                                          PosteriorDraws const& posterior,
                                          CounterfactualOptions const& options);

//---------------------------------------------------------------------------//
// Monte Carlo harness
//---------------------------------------------------------------------------//

struct McOptions
{
    std::vector<Dgp> dgps{Dgp::tt, Dgp::mis_irr, Dgp::mis_rel};
    std::vector<double> tau_grid{20, 40, 60, 80, 100};
    //! False stops each sample after the behavior statistics.
    bool estimate = true;
    GibbsConfig gibbs;
    double alpha = 0.05;
    WaldOptions wald;
    //! DGPs on which to compare WTT with selected-TEPS policy effects.
    std::vector<Dgp> counterfactual_dgps{Dgp::mis_irr};
    CounterfactualOptions counterfactual;
    std::string counterfactual_metric = "peer_share";
    //! Progress messages; may be empty.
    std::function<void(std::string const&)> log;
};

struct CounterfactualComparison
{
    std::string teps_label;
    double wtt_effect = 0.0;
    double teps_effect = 0.0;
};

struct SampleResult
{
    Dgp dgp = Dgp::tt;
    int sample = 0;
    BehaviorStats behavior;
    std::vector<std::string> methods;
    std::map<std::string, EstimateSummary> estimates;
    std::map<std::string, double> max_psrf;
    SelectionResult selection;
    bool has_counterfactual = false;
    CounterfactualComparison counterfactual;
};

struct MonteCarloResult
{
    McConfig config;
    std::vector<std::string> param_names;
    std::vector<SampleResult> samples;

    std::vector<SampleResult const*> of(Dgp dgp) const;
};

//! Method labels in table order: WTT, TEPS^top, then TEPS^tau ascending.
std::vector<std::string> method_labels(std::vector<double> const& tau_grid);

MonteCarloResult run_monte_carlo(McConfig const& cfg, McOptions const& options);

struct MethodSummary
{
    Dgp dgp;
    std::string method;
    std::string param;
    double mean = 0.0;
    double sd = 0.0;
    double rmse = 0.0;
};

//! Behavior averages per DGP (shares in percent).
std::vector<std::pair<Dgp, BehaviorStats>> behavior_table(MonteCarloResult const& r);
//! Cross-sample mean, sd and root-MSE of posterior means, plus "Selected".
std::vector<MethodSummary> estimate_table(MonteCarloResult const& r);
//! Selection counts per DGP and label.
std::vector<std::tuple<Dgp, std::string, int>> selection_table(MonteCarloResult const& r);

//! table_c1.csv, table_c2.csv, table_c3.csv, samples.csv and, when present,
//! counterfactual.csv. Every file starts with `header`.
std::vector<std::filesystem::path> write_tables(MonteCarloResult const& r,
                                                std::filesystem::path const& dir,
                                                std::string const& header);

}  // namespace teps
