#pragma once

#include "occlab/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace occlab {

enum class Provenance
{
    analytic,
    sampled,
};

const char *to_string(Provenance p);

/// Derivative sup-norm summaries of a rule at one time step.
///
/// alpha  max_j sum_{i != j} |d_j P_i|
/// beta   sqrt(n^-1 sum_{i != j} |d_j P_i|^2)
/// Gamma  max_{j,k} sum_i |d_j d_k P_i|
/// gamma  n^-1 sum_{i,j} |d_j^2 P_i|
/// delta  max_j sum_{i,k} |d_j d_k^2 P_i|
/// psi    beta + gamma
struct CoefficientSet
{
    double alpha = 0.0;
    double beta = 0.0;
    double Gamma = 0.0;
    double gamma = 0.0;
    double delta = 0.0;
    double psi = 0.0;
    Provenance provenance = Provenance::analytic;

    /// Builds a set with psi = beta + gamma; rejects negative or non-finite entries.
    static CoefficientSet make(double alpha, double beta, double Gamma, double gamma, double delta,
                               Provenance provenance);
};

using CoefficientSequence = std::vector<CoefficientSet>;

/// alpha_{s,t} = sum_{r=s+1}^{t-1} alpha_r (zero when the range is empty).
double alpha_window(const CoefficientSequence &coeffs, int s, int t);

/// True when any entry in [0, upto] was estimated by sampling.
bool any_sampled(const CoefficientSequence &coeffs, int upto);

/// A global rule P_t = (P_{1,t}, ..., P_{n,t}) extended to [0,1]^n.
///
/// Implementations must be pure functions of (x, t): the simulator calls
/// them concurrently from several threads.
class OccupancyRule
{
public:
    virtual ~OccupancyRule() = default;

    virtual std::size_t size() const = 0;
    virtual std::string name() const = 0;

    /// Raw evaluation without domain checks; out has length n.
    virtual void evaluate(const Vector &x, int t, Vector &out) const = 0;

    virtual bool has_split() const { return false; }

    /// Survival and colonization functions; S_i and C_i do not depend on x_i.
    virtual void split(const Vector &x, int t, Vector &survival, Vector &colonization) const;

    /// Jacobian (i,j) = d_j P_{i,t}(x), when known in closed form.
    virtual std::optional<Matrix> analytic_jacobian(const Vector &x, int t) const;

    /// Closed-form coefficient set, when known.
    virtual std::optional<CoefficientSet> analytic_coefficients(int t) const;

    virtual bool homogeneous() const { return true; }
};

using RulePtr = std::shared_ptr<const OccupancyRule>;

/// Rule assembled from callables. If only `split` is given, evaluation is
/// derived from it as x_i S_i + (1 - x_i) C_i.
struct FunctionRuleSpec
{
    std::size_t n = 0;
    std::string name = "function";
    std::function<void(const Vector &, int, Vector &)> evaluate;
    std::function<void(const Vector &, int, Vector &, Vector &)> split;
    std::function<Matrix(const Vector &, int)> jacobian;
    std::function<CoefficientSet(int)> coefficients;
    bool homogeneous = true;
};

class FunctionRule : public OccupancyRule
{
public:
    explicit FunctionRule(FunctionRuleSpec spec);

    std::size_t size() const override { return spec_.n; }
    std::string name() const override { return spec_.name; }
    void evaluate(const Vector &x, int t, Vector &out) const override;
    bool has_split() const override { return static_cast<bool>(spec_.split); }
    void split(const Vector &x, int t, Vector &survival, Vector &colonization) const override;
    std::optional<Matrix> analytic_jacobian(const Vector &x, int t) const override;
    std::optional<CoefficientSet> analytic_coefficients(int t) const override;
    bool homogeneous() const override { return spec_.homogeneous; }

private:
    FunctionRuleSpec spec_;
};

/// P_i(x) = c_i for every x.
RulePtr make_constant_rule(Vector c);

/// P(x) = A x with nonnegative A whose row sums are at most one.
RulePtr make_linear_rule(Matrix A);

/// Prepends a constant step P_{i,0} = p0_i and delegates to `base` with its
/// clock shifted by one; this turns a fixed X_0 into an independent
/// Bernoulli(p0) start at t = 1.
RulePtr make_iid_start_rule(RulePtr base, Vector p0);

/// Tolerance for values that leave [0,1] through rounding only.
inline constexpr double kCubeTolerance = 1e-12;

/// Validated evaluation: x must lie in [0,1]^n (within 1e-12) and the result
/// is clamped to [0,1] when the excursion is rounding-sized.
Vector evaluate_rule(const OccupancyRule &rule, const Vector &x, int t);

/// Finite-difference step used by `jacobian`.
inline constexpr double kJacobianStep = 1e-6;

/// Central differences with step h, one-sided at the faces of the cube.
Matrix finite_difference_jacobian(const OccupancyRule &rule, const Vector &x, int t,
                                  double h = kJacobianStep);

/// Analytic Jacobian if the rule supplies one, otherwise finite differences.
Matrix jacobian(const OccupancyRule &rule, const Vector &x, int t);

/// Sampled lower estimate of the coefficient set at time t, from
/// `budget` Latin-hypercube points plus the corners of a random
/// min(n,10)-dimensional sub-cube.
CoefficientSet estimate_coefficients(const OccupancyRule &rule, int t, std::size_t budget,
                                     std::uint64_t seed = 0);

/// Analytic coefficients when available, otherwise `estimate_coefficients`.
CoefficientSet coefficients(const OccupancyRule &rule, int t, std::size_t budget,
                            std::uint64_t seed = 0);

/// Coefficients for t = 0..T.
CoefficientSequence coefficient_sequence(const OccupancyRule &rule, int T, std::size_t budget,
                                         std::uint64_t seed = 0);

/// kappa_t = (1 + alpha_t + n Gamma_t + n^{1/2} delta_t)
///           * sum_{s<t} [1 + psi_s n^{1/2} (1 + psi_s n^{1/2})] t e^{16 alpha_{s,t}}.
double kappa(const CoefficientSequence &coeffs, int t, std::size_t n);

struct SplitDiagnostics
{
    double max_decomposition_error = 0.0; ///< max |P_i - x_i S_i - (1-x_i) C_i|
    double max_self_curvature = 0.0;      ///< max |d_i^2 P_i| by second differences
    std::size_t samples = 0;
};

/// Checks the survival/colonization identity and d_i^2 P_i = 0 at random points.
SplitDiagnostics validate_split(const OccupancyRule &rule, int t, std::size_t samples,
                                std::uint64_t seed = 0);

} // namespace occlab
