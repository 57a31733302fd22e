#pragma once

#include "occlab/rule.hpp"
#include "occlab/types.hpp"

#include <optional>
#include <string>

namespace occlab::models {

/// Contact-based spreading process with reaction matrix R = (r_ij).
///
/// Either a dense R is stored, or the mean-field case r_ij = r (i != j) is
/// kept implicitly so that n can be large.
struct SpreadingModel
{
    std::size_t n = 0;
    Matrix R;                       ///< empty in the implicit mean-field case
    std::optional<double> uniform_r; ///< r_ij = r off the diagonal
    double mu = 0.5;
    bool reinfection = false;

    static SpreadingModel dense(Matrix R, double mu, bool reinfection = false);
    /// r_ij = rbar / n for i != j.
    static SpreadingModel mean_field(std::size_t n, double rbar, double mu, bool reinfection = false);
    /// r_ij = kappa (1 - (1 - w_ij / sum_j w_ij)^lambda_i). kappa defaults to
    /// the value giving max r_ij = 0.9.
    static SpreadingModel weighted_graph(const Matrix &W, const Vector &lambda, double mu,
                                         bool reinfection = false,
                                         std::optional<double> kappa = std::nullopt);

    double r(std::size_t i, std::size_t j) const;
    /// Dense R (materialised for the mean-field case).
    Matrix reaction_matrix() const;
    void validate() const;
};

enum class SpreadingForm
{
    product,     ///< C_i = 1 - prod_j (1 - r_ij x_j)
    exponential, ///< C_i = 1 - exp(-sum_j |log(1 - r_ij)| x_j)
};

RulePtr spreading_rule(const SpreadingModel &model, SpreadingForm form = SpreadingForm::product);

/// Closed-form coefficients. Product form: alpha = ||R||_1, beta = psi =
/// ||R||_F / sqrt(n), Gamma = max element of (R+I)^T(R+I) - I, gamma = delta = 0.
CoefficientSet spreading_coefficients(const SpreadingModel &model,
                                      SpreadingForm form = SpreadingForm::product);

struct ThresholdReport
{
    double r_R = 0.0;
    double mu = 0.0;
    bool extinction = false; ///< r(R) <= mu
    std::string verdict;
    double sup_at_horizon = 0.0; ///< ||p_T||_inf from p_0 = 1
    int horizon = 0;
    std::optional<Vector> p_inf; ///< positive equilibrium when one was found
    double residual = 0.0;
    double r_J_inf = 0.0;
};

/// Compares r(R) with mu and checks the verdict numerically: the trajectory
/// from p_0 = 1 is run for `horizon` steps and, when it does not die out,
/// iterated to a fixed point.
ThresholdReport epidemic_threshold(const SpreadingModel &model, int horizon = 500);

} // namespace occlab::models
