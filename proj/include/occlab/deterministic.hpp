#pragma once

#include "occlab/rule.hpp"
#include "occlab/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace occlab {

struct Equilibrium
{
    Vector p;
    bool converged = false;
    std::size_t iterations = 0;
    double residual = 0.0; ///< ||P(p) - p||_inf
};

/// p_0..p_T with optional Jacobians DP_t(p_t) and equilibrium data.
struct DeterministicTrajectory
{
    std::vector<Vector> p;
    std::vector<Matrix> jacobians; ///< DP_t(p_t) for t = 0..T-1 when requested
    std::optional<Equilibrium> equilibrium;
    std::optional<Matrix> J0;
    std::optional<Matrix> J_inf;
    double r_J0 = 0.0;
    double r_J_inf = 0.0;

    int horizon() const { return static_cast<int>(p.size()) - 1; }
    std::size_t size() const { return p.empty() ? 0 : static_cast<std::size_t>(p.front().size()); }
};

DeterministicTrajectory det_trajectory(const OccupancyRule &rule, const Vector &p0, int T,
                                       bool with_jacobians = false);

/// Fixed-point iteration; stops when the sup-norm step is <= tol.
Equilibrium find_equilibrium(const OccupancyRule &rule, const Vector &p0, double tol = 1e-12,
                             std::size_t max_iter = 1000000);

struct MultiStartReport
{
    std::vector<Equilibrium> runs;
    bool all_converged = false;
    double max_disagreement = 0.0; ///< max_k ||p_k - p_0||_inf over runs
};

/// Runs find_equilibrium from each start (concurrently) and reports agreement.
MultiStartReport multi_start_equilibrium(const OccupancyRule &rule, const std::vector<Vector> &starts,
                                         double tol = 1e-12, std::size_t max_iter = 1000000,
                                         unsigned workers = 0);

/// `count` starts uniform on (0,1)^n.
std::vector<Vector> random_starts(std::size_t n, std::size_t count, std::uint64_t seed);

struct SpectralRadius
{
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    std::string method;
};

/// Power iteration on A + I with Collatz-Wielandt bracketing for nonnegative A
/// (dense eigen-decomposition as the fallback and for signed matrices).
SpectralRadius spectral_radius_report(const Matrix &A, double tol = 1e-10,
                                      std::size_t max_iter = 100000);

double spectral_radius(const Matrix &A, double tol = 1e-10);

/// Sampled evidence for the hypotheses of Smith's equilibrium theorem.
struct SmithReport
{
    bool positivity = true;             ///< d_j P_i(x) > 0 at all sampled x
    bool jacobian_monotonicity = true;  ///< DP(x) >= DP(y), != , for sampled x < y
    bool not_all_absorbing = false;     ///< P_i(1) != 1 for some i
    Matrix J0;                          ///< DP(eps 1), eps = 1e-8
    double r_J0 = 0.0;
    std::size_t pairs_checked = 0;
    std::size_t positivity_violations = 0;
    std::size_t monotonicity_violations = 0;
};

inline constexpr double kSmithEpsilon = 1e-8;

SmithReport smith_check(const OccupancyRule &rule, std::size_t sample_budget, std::uint64_t seed = 0);

/// Fills equilibrium, J0 and J_inf (with spectral radii) of a trajectory.
void attach_equilibrium(DeterministicTrajectory &traj, const OccupancyRule &rule, double tol = 1e-12,
                        std::size_t max_iter = 1000000);

} // namespace occlab
