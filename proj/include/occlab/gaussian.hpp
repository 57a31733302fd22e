#pragma once

#include "occlab/deterministic.hpp"
#include "occlab/rule.hpp"
#include "occlab/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace occlab {

/// sigma[h,h'] = n^-1 sum_i h_i h'_i p_i (1 - p_i).
double sigma_form(const Vector &p, const Vector &h, const Vector &h2);

/// Variance injected at each step of the Gaussian companion.
enum class NoiseModel
{
    /// V_t = diag(p_t(1 - p_t)), the marginal Bernoulli variance (the printed model).
    marginal,
    /// V_t = diag(p S(1-S) + (1-p) C(1-C)) with p, S, C at time t-1: the
    /// conditional variance of a node given its own previous state. Differs
    /// from `marginal` by p(1-p)(S-C)^2, which the propagation through the
    /// diagonal of DP already carries. Needs a split rule.
    conditional,
};

const char *to_string(NoiseModel m);

/// Autoregressive Gaussian companion of the chain along p_0..p_T.
///
/// Z_0 = p_0 and Z_t - p_t = DP_{t-1}(p_{t-1}) (Z_{t-1} - p_{t-1}) + noise with
/// covariance V_t (diag(p_t(1 - p_t)) by default), so Cov Z_t = Sigma_t with
/// Sigma_0 = 0, Sigma_{t+1} = J_t Sigma_t J_t^T + V_{t+1}.
class GaussianApprox
{
public:
    GaussianApprox(const OccupancyRule &rule, const Vector &p0, int T, bool store_sigma = false,
                   NoiseModel noise = NoiseModel::marginal);

    /// From a trajectory that already carries its Jacobians.
    explicit GaussianApprox(DeterministicTrajectory base, bool store_sigma = false);

    const DeterministicTrajectory &base() const { return base_; }
    int horizon() const { return base_.horizon(); }
    std::size_t size() const { return base_.size(); }

    const Vector &p(int t) const;
    /// Diagonal of the noise covariance added at step t.
    const Vector &V(int t) const;
    NoiseModel noise() const { return noise_model_; }

    /// D_t = DP_t(p_t)^T.
    Matrix D(int t) const;

    /// Jacobian DP_t(p_t) (untransposed).
    const Matrix &J(int t) const;

    /// D_{s,t} = D_s ... D_{t-1}; identity when s == t.
    Matrix propagator(int s, int t) const;

    /// D_{s,t} h without forming the product.
    Vector propagate(int s, int t, const Vector &h) const;

    bool has_sigma() const { return !sigma_.empty(); }
    const Matrix &Sigma(int t) const;

private:
    void build_sigma();
    void check_time(int t) const;

    DeterministicTrajectory base_;
    NoiseModel noise_model_ = NoiseModel::marginal;
    std::vector<Vector> noise_;
    std::vector<Matrix> sigma_;
};

/// V_t[h] = sum_{r=1}^t sigma_r^2[D_{r,t} h], with sigma_r built from the
/// approximation's noise model.
double projected_variance(const GaussianApprox &approx, const Vector &h, int t);

/// sum_{r=1}^{s^t} sigma_r[D_{r,s} h, D_{r,t} h'].
double cross_covariance(const GaussianApprox &approx, int s, int t, const Vector &h, const Vector &h2);

/// R Gaussian paths Z_0..Z_T.
struct GaussianEnsemble
{
    std::size_t n = 0;
    int T = 0;
    std::size_t R = 0;
    std::vector<double> paths; ///< [(r*(T+1) + t)*n + i]

    const double *path(std::size_t r, int t) const
    {
        return paths.data() + (r * static_cast<std::size_t>(T + 1) + static_cast<std::size_t>(t)) * n;
    }
};

/// Streams Gaussian paths to `observer(r, t, Z_t)`; replicate r draws its
/// noise from the gaussian stream keyed (seed, r).
void for_each_gaussian_path(const GaussianApprox &approx, std::size_t R, std::uint64_t seed,
                            unsigned workers,
                            const std::function<void(std::size_t, int, const Vector &)> &observer);

GaussianEnsemble simulate_gaussian(const GaussianApprox &approx, std::size_t R, std::uint64_t seed,
                                   unsigned workers = 0);

enum class LyapunovMethod
{
    automatic,
    direct,
    iterative,
};

struct LyapunovResult
{
    Matrix Q;
    double residual = 0.0; ///< ||Q - J Q J^T - V||_max
    double spectral_radius = 0.0;
    std::size_t iterations = 0;
    std::string method;
};

/// Direct-solve threshold on n (the vectorised system has n^2 unknowns).
inline constexpr Eigen::Index kLyapunovDirectMax = 64;

/// Solves Q = J Q J^T + V. `V` is either an n-vector (diagonal) or n x n.
LyapunovResult lyapunov_solve(const Matrix &J, const Matrix &V,
                              LyapunovMethod method = LyapunovMethod::automatic);

} // namespace occlab
