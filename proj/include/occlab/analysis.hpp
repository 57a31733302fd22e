#pragma once

#include "occlab/gaussian.hpp"
#include "occlab/io.hpp"
#include "occlab/rule.hpp"
#include "occlab/simulator.hpp"
#include "occlab/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace occlab {

/// <zeta_t, h> = n^{-1/2} sum_i h_i (X_{i,t} - p_{i,t}) for every replicate.
std::vector<double> project(const BinaryEnsemble &ens, std::span<const Vector> p_traj, const Vector &h,
                            int t);

/// Projections collected while simulating, without storing the ensemble:
/// values[k][t][r] for test vector k.
struct ProjectionSamples
{
    std::vector<std::vector<std::vector<double>>> values;
    const std::vector<double> &at(std::size_t k, int t) const
    {
        return values.at(k).at(static_cast<std::size_t>(t));
    }
};

ProjectionSamples simulate_projections(const OccupancyRule &rule, const BitState &x0, int T,
                                       std::size_t R, std::uint64_t seed, std::span<const Vector> p_traj,
                                       const std::vector<Vector> &hs, unsigned workers = 0);

struct NormalTarget
{
    double mean = 0.0;
    double variance = 1.0; ///< 0 means a point mass at `mean`
};

struct DistanceReport
{
    std::string metric; ///< kolmogorov | wasserstein1
    std::size_t size = 0;
    std::string target;
    double value = 0.0;
    double standard_error = 0.0; ///< bootstrap, 200 resamples by default
};

inline constexpr std::size_t kBootstrapResamples = 200;

/// Raw statistics (no bootstrap).
double ks_statistic(std::vector<double> sample, const NormalTarget &target);
double ks_statistic(std::vector<double> a, std::vector<double> b);
double w1_statistic(std::vector<double> sample, const NormalTarget &target);
double w1_statistic(std::vector<double> a, std::vector<double> b);

DistanceReport ks_distance(std::span<const double> sample, const NormalTarget &target,
                           std::uint64_t seed = 0, std::size_t resamples = kBootstrapResamples);
DistanceReport ks_distance(std::span<const double> a, std::span<const double> b, std::uint64_t seed = 0,
                           std::size_t resamples = kBootstrapResamples);
DistanceReport wasserstein1(std::span<const double> sample, const NormalTarget &target,
                            std::uint64_t seed = 0, std::size_t resamples = kBootstrapResamples);
DistanceReport wasserstein1(std::span<const double> a, std::span<const double> b, std::uint64_t seed = 0,
                            std::size_t resamples = kBootstrapResamples);

double sample_mean(std::span<const double> x);
double sample_variance(std::span<const double> x);

/// Bootstrap standard error of an arbitrary statistic.
double bootstrap_se(std::span<const double> x, const std::function<double(std::span<const double>)> &stat,
                    std::uint64_t seed, std::size_t resamples = kBootstrapResamples);

/// Quantiles (0.5, 0.9, 0.95, 0.99) of the KS statistic of `size` standard
/// normal draws against N(0,1), over `reps` simulated samples. Cached as CSV
/// under $OCCLAB_CACHE when that variable is set.
std::vector<double> ks_null_quantiles(std::size_t size, std::size_t reps = 500, std::uint64_t seed = 0);

/// Header contract of sweep tables.
Table sweep_table();

/// One member of a model family indexed by n.
struct FamilyMember
{
    RulePtr rule;
    BitState x0;
    Vector h;
};

using ModelFamily = std::function<FamilyMember(std::size_t n)>;

struct CltSweepOptions
{
    std::string model_id = "model";
    int t = 3;
    std::vector<std::size_t> ns;
    std::size_t R = 10000;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    std::size_t coefficient_budget = 64;
    bool null_calibration = false;
    /// Noise model of the Gaussian target; the bound columns always use the printed one.
    NoiseModel noise = NoiseModel::marginal;
};

struct CltSweepPoint
{
    std::size_t n = 0;
    double variance = 0.0; ///< V_t[h] from the Gaussian approximation
    double empirical_variance = 0.0;
    DistanceReport ks;
    DistanceReport w1;
    double bound_ks = NAN; ///< C = 1 bound at q = inf
    double bound_w1 = NAN; ///< C = 1 bound at q = 1
};

struct CltSweepResult
{
    std::vector<CltSweepPoint> points;
    double ks_slope = NAN; ///< least squares slope of log KS on log n
    double w1_slope = NAN;
    bool ks_decreasing = false;
    bool w1_decreasing = false;
    Table table;
};

CltSweepResult clt_sweep(const ModelFamily &family, const CltSweepOptions &options);

/// Least-squares slope of log y on log x.
double loglog_slope(const std::vector<double> &x, const std::vector<double> &y);

/// A finite class H_n of test vectors; evaluation only touches `support`.
struct TestClass
{
    std::string descriptor;
    std::vector<Vector> vectors;
    std::vector<std::size_t> support; ///< union of nonzero coordinates
    double H = 0.0;                   ///< max_h ||h||_inf
};

inline constexpr std::size_t kMaxClassSize = 1000000;

/// Builds a class from explicit vectors (TooLarge beyond 10^6 members).
TestClass make_test_class(std::vector<Vector> vectors, std::string descriptor = "explicit");

/// All 2^k sign vectors on the first k coordinates (k = coords.size()) of R^n.
TestClass sign_vector_class(std::size_t n, const std::vector<std::size_t> &coords);

/// Rad(H) = E sup_h n^{-1} sum_i h_i sigma_i, exact on supports of at most 24 coordinates.
double class_rademacher(const TestClass &H, std::size_t n, std::uint64_t seed = 0);

struct LlnSweepOptions
{
    std::string model_id = "model";
    int t = 3;
    std::vector<std::size_t> ns;
    std::size_t R = 1000;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    double x = 7.38905609893065; ///< e^2
    std::size_t coefficient_budget = 64;
};

struct LlnSweepPoint
{
    std::size_t n = 0;
    double q50 = 0.0, q90 = 0.0, q99 = 0.0, mean = 0.0;
    double threshold = 0.0;   ///< H t Psi x + Rad
    double exceedance = 0.0;  ///< fraction of replicates above the threshold
    double exceedance_se = 0.0;
    double bound = 0.0;       ///< clamped concentration bound
    double bound_unclamped = 0.0;
    double rademacher = 0.0;
};

struct LlnSweepResult
{
    std::vector<LlnSweepPoint> points;
    Table table;
};

using ClassFamily = std::function<TestClass(std::size_t n)>;

LlnSweepResult lln_sweep(const ModelFamily &family, const ClassFamily &classes, const LlnSweepOptions &options);

/// sup_{h in H} |n^{-1} sum_i h_i d_i| for one deviation vector d.
double class_sup(const TestClass &H, const Vector &d);

} // namespace occlab
