#include "occlab/deterministic.hpp"

#include "occlab/errors.hpp"
#include "occlab/parallel.hpp"
#include "occlab/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace occlab {

namespace {

void check_state(const Vector &p, std::size_t n)
{
    if (static_cast<std::size_t>(p.size()) != n)
        throw DomainError("state length does not match the rule size");
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (!(p[i] >= -kCubeTolerance && p[i] <= 1.0 + kCubeTolerance))
            throw DomainError("state entries must lie in [0,1]");
    }
}

} // namespace

DeterministicTrajectory det_trajectory(const OccupancyRule &rule, const Vector &p0, int T,
                                       bool with_jacobians)
{
    check_state(p0, rule.size());
    if (T < 0)
        throw DomainError("horizon must be nonnegative");
    DeterministicTrajectory traj;
    traj.p.reserve(static_cast<std::size_t>(T + 1));
    traj.p.push_back(p0.cwiseMax(0.0).cwiseMin(1.0));
    for (int t = 0; t < T; ++t) {
        if (with_jacobians)
            traj.jacobians.push_back(jacobian(rule, traj.p.back(), t));
        traj.p.push_back(evaluate_rule(rule, traj.p.back(), t));
    }
    return traj;
}

Equilibrium find_equilibrium(const OccupancyRule &rule, const Vector &p0, double tol,
                             std::size_t max_iter)
{
    check_state(p0, rule.size());
    if (!rule.homogeneous())
        throw DomainError("equilibrium search needs a time-homogeneous rule");
    Equilibrium eq;
    Vector p = p0.cwiseMax(0.0).cwiseMin(1.0);
    for (std::size_t k = 0; k < max_iter; ++k) {
        Vector next = evaluate_rule(rule, p, 0);
        const double step = (next - p).cwiseAbs().maxCoeff();
        p.swap(next);
        if (step <= tol) {
            eq.converged = true;
            eq.iterations = k + 1;
            break;
        }
        eq.iterations = k + 1;
    }
    eq.p = p;
    eq.residual = (evaluate_rule(rule, p, 0) - p).cwiseAbs().maxCoeff();
    return eq;
}

MultiStartReport multi_start_equilibrium(const OccupancyRule &rule, const std::vector<Vector> &starts,
                                         double tol, std::size_t max_iter, unsigned workers)
{
    if (starts.empty())
        throw DomainError("multi-start search needs at least one start");
    MultiStartReport rep;
    rep.runs.resize(starts.size());
    parallel_for(starts.size(), workers,
                 [&](std::size_t k) { rep.runs[k] = find_equilibrium(rule, starts[k], tol, max_iter); });
    rep.all_converged = true;
    for (const auto &run : rep.runs) {
        rep.all_converged = rep.all_converged && run.converged;
        rep.max_disagreement =
            std::max(rep.max_disagreement, (run.p - rep.runs.front().p).cwiseAbs().maxCoeff());
    }
    return rep;
}

std::vector<Vector> random_starts(std::size_t n, std::size_t count, std::uint64_t seed)
{
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const CounterRng rng(seed, k, Stream::auxiliary);
        Vector v(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            v[static_cast<Eigen::Index>(i)] = rng.uniform(0, i);
        out.push_back(std::move(v));
    }
    return out;
}

namespace {

SpectralRadius dense_radius(const Matrix &A)
{
    SpectralRadius out;
    out.method = "eigen-decomposition";
    if (A.size() == 0)
        return out;
    Eigen::EigenSolver<Matrix> es(A, false);
    if (es.info() != Eigen::Success) {
        out.converged = false;
        return out;
    }
    out.value = es.eigenvalues().cwiseAbs().maxCoeff();
    out.converged = true;
    return out;
}

} // namespace

SpectralRadius spectral_radius_report(const Matrix &A, double tol, std::size_t max_iter)
{
    if (A.rows() != A.cols())
        throw DomainError("spectral radius needs a square matrix");
    if (!A.allFinite())
        throw DomainError("spectral radius needs finite entries");
    const Eigen::Index n = A.rows();
    if (n == 0)
        return {0.0, true, 0, "empty"};
    if ((A.array() < 0.0).any())
        return dense_radius(A);

    // Perron root of B = A + I is r(A) + 1; B x stays positive for x > 0, so
    // the Collatz-Wielandt ratios bracket it.
    SpectralRadius out;
    out.method = "power-iteration";
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 2; ++attempt) {
        Vector x(n);
        if (attempt == 0) {
            x.setOnes();
        } else {
            const CounterRng rng(0x5eed, 0, Stream::auxiliary);
            for (Eigen::Index i = 0; i < n; ++i)
                x[i] = 0.5 + rng.uniform(0, static_cast<std::uint64_t>(i));
        }
        x /= x.norm();
        double best_gap = INFINITY;
        std::size_t last_improvement = 0;
        for (std::size_t k = 0; k < max_iter; ++k) {
            Vector y = A * x + x;
            const Vector ratio = y.cwiseQuotient(x);
            const double lo = ratio.minCoeff(), hi = ratio.maxCoeff();
            ++out.iterations;
            if (hi - lo <= tol * scale) {
                out.value = std::max(0.0, 0.5 * (lo + hi) - 1.0);
                out.converged = true;
                return out;
            }
            if (hi - lo < 0.999 * best_gap) {
                best_gap = hi - lo;
                last_improvement = k;
            } else if (k - last_improvement > 2000) {
                break; // stagnation
            }
            x = y / y.norm();
            if (x.minCoeff() <= 0.0)
                break;
        }
    }
    // Slow or reducible cases (e.g. nilpotent blocks): dense fallback.
    SpectralRadius dense = dense_radius(A);
    dense.iterations = out.iterations;
    return dense;
}

double spectral_radius(const Matrix &A, double tol)
{
    const auto rep = spectral_radius_report(A, tol);
    if (!rep.converged)
        throw NotConverged("spectral radius did not converge");
    return rep.value;
}

SmithReport smith_check(const OccupancyRule &rule, std::size_t sample_budget, std::uint64_t seed)
{
    if (!rule.homogeneous())
        throw DomainError("Smith check needs a time-homogeneous rule");
    const std::size_t n = rule.size();
    const auto N = static_cast<Eigen::Index>(n);
    SmithReport rep;
    // analytic Jacobians compare exactly; finite differences need slack
    const bool analytic = rule.analytic_jacobian(Vector::Constant(N, 0.5), 0).has_value();
    const double slack = analytic ? 1e-12 : 1e-6;

    for (std::size_t k = 0; k < sample_budget; ++k) {
        const CounterRng rng(seed, k, Stream::sampling);
        Vector x(N), y(N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto ii = static_cast<std::uint64_t>(i);
            x[i] = rng.uniform(0, ii);
            y[i] = x[i] + (1.0 - x[i]) * rng.uniform(1, ii);
        }
        const Matrix Dx = jacobian(rule, x, 0);
        const Matrix Dy = jacobian(rule, y, 0);
        if ((Dx.array() <= 0.0).any()) {
            rep.positivity = false;
            ++rep.positivity_violations;
        }
        const Matrix diff = Dx - Dy;
        const bool ordered = (diff.array() >= -slack).all();
        const bool strict = (diff.array() > slack).any();
        if (!(ordered && strict)) {
            rep.jacobian_monotonicity = false;
            ++rep.monotonicity_violations;
        }
        ++rep.pairs_checked;
    }
    const Vector ones = evaluate_rule(rule, Vector::Ones(N), 0);
    rep.not_all_absorbing = ((ones.array() - 1.0).abs() > kCubeTolerance).any();
    rep.J0 = jacobian(rule, Vector::Constant(N, kSmithEpsilon), 0);
    rep.r_J0 = spectral_radius_report(rep.J0).value;
    return rep;
}

void attach_equilibrium(DeterministicTrajectory &traj, const OccupancyRule &rule, double tol,
                        std::size_t max_iter)
{
    if (traj.p.empty())
        throw DomainError("trajectory is empty");
    const auto N = static_cast<Eigen::Index>(rule.size());
    traj.equilibrium = find_equilibrium(rule, traj.p.back(), tol, max_iter);
    traj.J0 = jacobian(rule, Vector::Constant(N, kSmithEpsilon), 0);
    traj.r_J0 = spectral_radius_report(*traj.J0).value;
    traj.J_inf = jacobian(rule, traj.equilibrium->p, 0);
    traj.r_J_inf = spectral_radius_report(*traj.J_inf).value;
}

} // namespace occlab
