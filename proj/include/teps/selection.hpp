#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace teps
{
//! Point estimate and covariance of one estimator.
struct EstimateSummary
{
    std::string label;
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;
};

struct WaldResult
{
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
};

struct WaldOptions
{
    //! Eigenvalues of V_r - V_e below tol * lambda_max are treated as zero.
    double tolerance = 1e-8;
    //! Use df = dim(beta) instead of the rank of the projected difference.
    bool nominal_df = false;
};

//! Hausman-type statistic d' M^+ d with d = beta_r - beta_e and
//! M = V_r - V_e projected onto its positive semidefinite part.
WaldResult wald_statistic(EstimateSummary const& robust,
                          EstimateSummary const& efficient,
                          WaldOptions const& options = {});

struct LadderStep
{
    std::string robust;
    std::string efficient;
    WaldResult test;
    bool rejected = false;
};

struct SelectionResult
{
    std::string chosen;
    double alpha = 0.05;
    std::vector<LadderStep> ladder;
};

/*!
 * Test `top` against WTT, then against each TEPS^tau in descending tau, and
 * choose the first estimator whose null is not rejected. TEPS^top is chosen
 * when every test rejects.
 *
 * `estimates` must hold the WTT label and teps_label(tau) for every tau.
 * Pass an empty `wtt_label` to run the ladder over the TEPS labels only.
 */
SelectionResult select_model(std::map<std::string, EstimateSummary> const& estimates,
                             EstimateSummary const& top,
                             std::vector<double> const& tau_grid,
                             double alpha = 0.05,
                             WaldOptions const& options = {},
                             std::string const& wtt_label = "WTT");

}  // namespace teps
