#pragma once

#include "occlab/gaussian.hpp"
#include "occlab/rule.hpp"
#include "occlab/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace occlab {

/// One evaluated bound. The universal constant C is set to 1 throughout, so
/// every value is "bound modulo universal constant".
struct BoundReport
{
    double value = 0.0;
    std::string formula_id;
    std::map<std::string, double> inputs;
    std::string coefficient_provenance = "analytic";
    bool lower_estimate_inputs = false; ///< some coefficient was sampled
    bool vacuous = false;               ///< probability bound clamped to 1
    std::vector<std::string> caveats;

    nlohmann::json to_json() const;
};

/// ||A||_{q,r}: row-wise l^q then l^r over rows if q >= r, otherwise
/// column-wise l^r then l^q over columns. Pass INFINITY for q or r = inf.
double matrix_qr_norm(const Matrix &A, double q, double r);

/// Induced l^1 operator norm (max column sum of |a_ij|).
double induced_l1_norm(const Matrix &A);

/// CLT rate for <zeta_t,h> against <xi_t,h> in L^q:
/// ||h||^{4-1/q} sqrt((1+log n)/n) sum_{s<t} kappa_s e^{(4-1/q) alpha_{s,t}} / sigma_{s+1}^{4-2/q}[D_{s+1,t} h].
BoundReport clt_rate_bound(const CoefficientSequence &coeffs, const Vector &h, double q,
                           const GaussianApprox &approx, int t);

/// Sup-norm derivative summaries of a functional f = (f_1..f_m).
struct FunctionalNorms
{
    double Df_1 = 0.0;   ///< ||Df||_1 (induced)
    double Df_2q = 0.0;  ///< ||Df||_{2,q}
    double D2f_1q = 0.0; ///< ||D^(2) f||_{1,q}
};

/// Norms from the matrices of sup-norms (|d_j f_i|) and (|d_j^2 f_i|), m x n.
FunctionalNorms functional_norms(const Matrix &Df_sup, const Matrix &D2f_sup, double q);

/// Functional error in L^{q,r}:
/// 6 sqrt(pi) n r^{3/2} ||Df||_1 sum_{s<t} (1/n + psi_s) e^{4 r alpha_{s,t}}
///   + sqrt(pi (q + r)) ||Df||_{2,q} + ||D^(2) f||_{1,q} / 2.
BoundReport lqr_error_bound(const FunctionalNorms &norms, const CoefficientSequence &coeffs, double q,
                            double r, int t, std::size_t n);

/// ||Jbar_t||_q <= 2q sum_{s<t} (2/n + 3 beta_s sqrt(pi q) + gamma_s) e^{4 q alpha_{s,t}}.
BoundReport jbar_moment_bound(const CoefficientSequence &coeffs, double q, int t, std::size_t n);

/// Psi_t = 12 sqrt(pi) (1/n + max_{s<=t} psi_s).
double concentration_psi(const CoefficientSequence &coeffs, int t, std::size_t n);

/// Deviation level H t Psi_t x + Rad(H) of the concentration event.
double concentration_threshold(const CoefficientSequence &coeffs, double H, double rad, int t,
                               std::size_t n, double x);

/// P(sup_h |<Xbar_t - pbar_t, h>| > H t Psi_t x + Rad) <=
///   e^{-n t^2 x^2 Psi_t^2 / 2} + sum_{s=1}^t exp[-4 alpha_{0,s} (log x)^2 / (1 + 4 alpha_{0,t})^2 + 4 alpha_{0,s}],
/// clamped to 1 (flagged vacuous). The threshold is echoed in inputs.
BoundReport concentration_bound(const CoefficientSequence &coeffs, double H, double rad, int t,
                                std::size_t n, double x);

struct MonteCarloEstimate
{
    double value = 0.0;
    double standard_error = 0.0;
};

/// E sup_h n^-1 sum_i h_i sigma_i over R Rademacher draws.
MonteCarloEstimate rademacher_mc(const std::vector<Vector> &H_set, std::size_t R, std::uint64_t seed);

/// Exact value by enumerating all 2^n sign patterns (n <= 24).
double rademacher_exact(const std::vector<Vector> &H_set);

/// Massart finite-class bound H sqrt(2 log|H| / n).
double massart_bound(double H, std::size_t class_size, std::size_t n);

/// Second/third derivative summaries for the linearisation bound.
struct LinearizationNorms
{
    double max_second = 0.0;         ///< max_{j,k} ||d_j d_k f||
    double max_third_row_sum = 0.0;  ///< max_j sum_k ||d_j d_k^2 f||
};

/// E|f(X_t) - f(p_t) - <zeta_t, sqrt(n) grad f(p_t)>| <=
///   sqrt(1 + log n) [1 + sum_{s<t} (1/n + n psi_s^2) t e^{16 alpha_{s,t}}]
///   [n max ||d_j d_k f|| + sqrt(n) max_j sum_k ||d_j d_k^2 f||].
BoundReport linearization_error_bound(const LinearizationNorms &norms, const CoefficientSequence &coeffs,
                                      int t, std::size_t n);

/// Degenerate-sigma threshold used by clt_rate_bound.
inline constexpr double kSigmaFloor = 1e-14;

} // namespace occlab
