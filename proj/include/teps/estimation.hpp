#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "teps/inference.hpp"

namespace teps
{
//---------------------------------------------------------------------------//
/*!
 * Linear random-utility design: U(i, c) = x(i, c) . beta + e(i, c) with
 * e(i, c) ~ N(0, sigma2[type(c)]).
 *
 * Row i * n_programs + c of `x` holds the regressors of student i at
 * program c. The variance of `pinned_type` is fixed at 1.
 */
struct UtilityDesign
{
    using RowMatrix
        = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    int n_students = 0;
    int n_programs = 0;
    RowMatrix x;
    std::vector<std::string> param_names;
    std::vector<int> program_type;  //!< empty: a single pinned type
    int pinned_type = 0;

    int n_params() const { return static_cast<int>(x.cols()); }
    int n_types() const;
};

void validate_design(UtilityDesign const& design);

struct GibbsConfig
{
    int n_iter = 20000;
    int burn_in = 15000;
    int thin = 1;
    int n_chains = 3;
    //! Prior beta ~ N(0, (prior_precision * I)^-1).
    double prior_precision = 0.01;
    //! Inverse-gamma prior per type; empty means 3 + (programs of the type).
    std::vector<double> nu;
    std::vector<double> v0;
    std::uint64_t seed = 0;
    int threads = 1;
    //! Assert every retained utility draw satisfies its relations.
    bool validate_draws = false;
    //! Compare the explicit whitened cross-product with the per-type
    //! formula every this many iterations (0 disables).
    int whitening_check_every = 0;
};

struct PosteriorDraws
{
    std::vector<std::string> param_names;
    int n_types = 1;
    int pinned_type = 0;
    //! Per chain: retained draws x n_params.
    std::vector<Eigen::MatrixXd> beta;
    //! Per chain: retained draws x n_types (pinned column identically 1).
    std::vector<Eigen::MatrixXd> sigma2;

    int n_chains() const { return static_cast<int>(beta.size()); }
    Eigen::Index n_draws_per_chain() const
    {
        return beta.empty() ? 0 : beta[0].rows();
    }
    //! Pooled beta draws (all chains stacked).
    Eigen::MatrixXd pooled_beta() const;
    Eigen::MatrixXd pooled_sigma2() const;
    Eigen::VectorXd mean() const;
    Eigen::MatrixXd covariance() const;
    //! PSRF per beta coordinate followed by each free variance type.
    std::vector<double> psrf() const;
};

//! Gibbs sampler for the truncated multinomial-probit posterior.
//! `relations[i]` constrains student i's utilities; cycles raise CycleError.
PosteriorDraws gibbs_estimate(std::span<RelationSet const> relations,
                              UtilityDesign const& design,
                              GibbsConfig const& config);

//---------------------------------------------------------------------------//
// Pairwise rank logit for latent priority scores
//---------------------------------------------------------------------------//

//! (winner, loser): the program ranked `winner` above `loser`.
using RankedPair = std::pair<int, int>;

//! All ordered pairs implied by a best-first ranking of students.
std::vector<RankedPair> pairs_from_ranking(std::span<int const> ranking);

struct LogitOptions
{
    double ridge = 0.0;  //!< l2 penalty weight; 0 disables
    double tolerance = 1e-8;
    int max_iter = 200;
};

struct LogitFit
{
    Eigen::VectorXd beta;
    Eigen::VectorXd se;      //!< inverse-Hessian standard errors
    Eigen::VectorXd scores;  //!< fitted latent score per student
    double loglik = 0.0;
    int iterations = 0;
};

//! Log-likelihood of sum over pairs log sigmoid(v_w - v_l), v = X beta.
double pairwise_loglik(std::span<RankedPair const> pairs,
                       Eigen::MatrixXd const& x, Eigen::VectorXd const& beta);

//! Newton ascent to gradient inf-norm <= tolerance. Raises NumericalError on
//! complete separation unless a ridge penalty is set.
LogitFit fit_priority_logit(std::span<RankedPair const> pairs,
                            Eigen::MatrixXd const& x,
                            LogitOptions const& options = {});

//! Map latent scores to mid-rank percentiles in (0, 1).
std::vector<double> score_percentiles(Eigen::VectorXd const& scores);

}  // namespace teps
