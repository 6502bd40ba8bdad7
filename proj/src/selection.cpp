#include "teps/selection.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "teps/errors.hpp"
#include "teps/inference.hpp"
#include "teps/stats.hpp"

namespace teps
{
WaldResult wald_statistic(EstimateSummary const& robust,
                          EstimateSummary const& efficient,
                          WaldOptions const& options)
{
    auto const p = robust.beta.size();
    if (efficient.beta.size() != p || robust.covariance.rows() != p
        || robust.covariance.cols() != p || efficient.covariance.rows() != p
        || efficient.covariance.cols() != p)
        throw ValidationError("estimate dimensions do not match: "
                              + robust.label + " vs " + efficient.label);
    if (p == 0)
        throw ValidationError("cannot test empty estimates");

    Eigen::VectorXd const d = robust.beta - efficient.beta;
    Eigen::MatrixXd m = robust.covariance - efficient.covariance;
    m = 0.5 * (m + m.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of the covariance difference failed");
    Eigen::VectorXd const& lambda = eig.eigenvalues();
    double const lambda_max = lambda.maxCoeff();

    WaldResult out;
    if (lambda_max > 0.0)
    {
        double const cut = options.tolerance * lambda_max;
        Eigen::VectorXd const proj = eig.eigenvectors().transpose() * d;
        for (Eigen::Index j = 0; j < p; ++j)
        {
            if (lambda[j] > cut)
            {
                out.statistic += proj[j] * proj[j] / lambda[j];
                ++out.df;
            }
        }
    }
    if (options.nominal_df)
        out.df = static_cast<int>(p);
    // A zero-rank difference carries no evidence against the null.
    out.p_value = out.df == 0 ? 1.0 : chi_square_sf(out.statistic, out.df);
    return out;
}

SelectionResult select_model(std::map<std::string, EstimateSummary> const& estimates,
                             EstimateSummary const& top,
                             std::vector<double> const& tau_grid,
                             double alpha, WaldOptions const& options,
                             std::string const& wtt_label)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ValidationError("significance level must lie in (0, 1)");

    std::vector<std::string> order;
    if (!wtt_label.empty())
        order.push_back(wtt_label);
    std::vector<double> taus = tau_grid;
    std::sort(taus.begin(), taus.end(), std::greater<>());
    for (double tau : taus)
    {
        if (tau > 0.0)
            order.push_back(teps_label(tau));
    }
    for (auto const& label : order)
    {
        if (!estimates.contains(label))
            throw ValidationError("missing estimate for " + label);
    }

    SelectionResult out;
    out.alpha = alpha;
    for (auto const& label : order)
    {
        auto const& efficient = estimates.at(label);
        LadderStep step{top.label, label, wald_statistic(top, efficient, options)};
        step.rejected = step.test.p_value < alpha;
        out.ladder.push_back(step);
        if (!step.rejected)
        {
            out.chosen = label;
            return out;
        }
    }
    out.chosen = teps_label(0.0);
    return out;
}

}  // namespace teps
