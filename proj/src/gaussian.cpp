#include "occlab/gaussian.hpp"

#include "occlab/errors.hpp"
#include "occlab/parallel.hpp"
#include "occlab/rng.hpp"

#include <Eigen/LU>

#include <cmath>

namespace occlab {

double sigma_form(const Vector &p, const Vector &h, const Vector &h2)
{
    if (p.size() != h.size() || p.size() != h2.size())
        throw DomainError("sigma form needs vectors of equal length");
    if (p.size() == 0)
        return 0.0;
    const Vector var = p.array() * (1.0 - p.array());
    return (h.array() * h2.array() * var.array()).sum() / static_cast<double>(p.size());
}

const char *to_string(NoiseModel m)
{
    return m == NoiseModel::marginal ? "marginal" : "conditional";
}

namespace {

Vector bernoulli_variance(const Vector &p)
{
    return p.array() * (1.0 - p.array());
}

} // namespace

GaussianApprox::GaussianApprox(const OccupancyRule &rule, const Vector &p0, int T, bool store_sigma,
                               NoiseModel noise)
    : GaussianApprox(det_trajectory(rule, p0, T, true), false)
{
    if (noise == NoiseModel::conditional) {
        if (!rule.has_split())
            throw SplitRequired("conditional noise needs a survival/colonization split");
        noise_model_ = noise;
        const auto n = static_cast<Eigen::Index>(size());
        Vector S(n), C(n);
        for (int t = 1; t <= horizon(); ++t) {
            const Vector &q = p(t - 1);
            rule.split(q, t - 1, S, C);
            noise_[static_cast<std::size_t>(t)] =
                q.array() * S.array() * (1.0 - S.array()) + (1.0 - q.array()) * C.array() * (1.0 - C.array());
        }
    }
    if (store_sigma)
        build_sigma();
}

GaussianApprox::GaussianApprox(DeterministicTrajectory base, bool store_sigma) : base_(std::move(base))
{
    if (base_.p.empty())
        throw DomainError("Gaussian approximation needs a nonempty trajectory");
    if (base_.jacobians.size() < static_cast<std::size_t>(base_.horizon()))
        throw DomainError("trajectory was computed without Jacobians");
    for (const auto &q : base_.p)
        noise_.push_back(bernoulli_variance(q));
    if (store_sigma)
        build_sigma();
}

void GaussianApprox::check_time(int t) const
{
    if (t < 0 || t > horizon())
        throw DomainError("time index outside 0..T");
}

const Vector &GaussianApprox::p(int t) const
{
    check_time(t);
    return base_.p[static_cast<std::size_t>(t)];
}

const Vector &GaussianApprox::V(int t) const
{
    check_time(t);
    return noise_[static_cast<std::size_t>(t)];
}

const Matrix &GaussianApprox::J(int t) const
{
    if (t < 0 || t >= horizon())
        throw DomainError("Jacobian index outside 0..T-1");
    return base_.jacobians[static_cast<std::size_t>(t)];
}

Matrix GaussianApprox::D(int t) const { return J(t).transpose(); }

Matrix GaussianApprox::propagator(int s, int t) const
{
    check_time(s);
    check_time(t);
    if (s > t)
        throw DomainError("propagator needs s <= t");
    const auto n = static_cast<Eigen::Index>(size());
    Matrix out = Matrix::Identity(n, n);
    for (int r = s; r < t; ++r)
        out = out * J(r).transpose();
    return out;
}

Vector GaussianApprox::propagate(int s, int t, const Vector &h) const
{
    check_time(s);
    check_time(t);
    if (s > t)
        throw DomainError("propagator needs s <= t");
    if (static_cast<std::size_t>(h.size()) != size())
        throw DomainError("projection vector has the wrong length");
    Vector g = h;
    for (int r = t - 1; r >= s; --r)
        g = J(r).transpose() * g;
    return g;
}

void GaussianApprox::build_sigma()
{
    const auto n = static_cast<Eigen::Index>(size());
    sigma_.assign(static_cast<std::size_t>(horizon() + 1), Matrix::Zero(n, n));
    for (int t = 0; t < horizon(); ++t) {
        const Matrix &Jt = J(t);
        Matrix next = Jt * sigma_[static_cast<std::size_t>(t)] * Jt.transpose();
        next.diagonal() += V(t + 1);
        sigma_[static_cast<std::size_t>(t + 1)] = 0.5 * (next + next.transpose());
    }
}

const Matrix &GaussianApprox::Sigma(int t) const
{
    check_time(t);
    if (!has_sigma())
        throw DomainError("covariances were not stored; construct with store_sigma");
    return sigma_[static_cast<std::size_t>(t)];
}

double projected_variance(const GaussianApprox &approx, const Vector &h, int t)
{
    if (t < 0 || t > approx.horizon())
        throw DomainError("time index outside 0..T");
    if (static_cast<std::size_t>(h.size()) != approx.size())
        throw DomainError("projection vector has the wrong length");
    double total = 0.0;
    Vector g = h; // D_{r,t} h for r = t, t-1, ...
    for (int r = t; r >= 1; --r) {
        total += (g.array().square() * approx.V(r).array()).sum() / static_cast<double>(g.size());
        g = approx.J(r - 1).transpose() * g;
    }
    return total;
}

double cross_covariance(const GaussianApprox &approx, int s, int t, const Vector &h, const Vector &h2)
{
    const int m = std::min(s, t);
    if (m < 0 || std::max(s, t) > approx.horizon())
        throw DomainError("time index outside 0..T");
    double total = 0.0;
    for (int r = 1; r <= m; ++r)
        total += (approx.propagate(r, s, h).array() * approx.propagate(r, t, h2).array() * approx.V(r).array()).sum() /
                 static_cast<double>(h.size());
    return total;
}

void for_each_gaussian_path(const GaussianApprox &approx, std::size_t R, std::uint64_t seed,
                            unsigned workers,
                            const std::function<void(std::size_t, int, const Vector &)> &observer)
{
    const int T = approx.horizon();
    const auto n = static_cast<Eigen::Index>(approx.size());
    std::vector<Vector> sd(static_cast<std::size_t>(T + 1));
    for (int t = 0; t <= T; ++t)
        sd[static_cast<std::size_t>(t)] = approx.V(t).cwiseSqrt();
    parallel_for(R, workers, [&](std::size_t r) {
        const CounterRng rng(seed, r, Stream::gaussian);
        Vector dev = Vector::Zero(n); // Z_t - p_t
        Vector z = approx.p(0);
        observer(r, 0, z);
        for (int t = 1; t <= T; ++t) {
            dev = approx.J(t - 1) * dev;
            const Vector &s = sd[static_cast<std::size_t>(t)];
            for (Eigen::Index i = 0; i < n; ++i)
                dev[i] += s[i] * rng.normal(static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i));
            z = approx.p(t) + dev;
            observer(r, t, z);
        }
    });
}

GaussianEnsemble simulate_gaussian(const GaussianApprox &approx, std::size_t R, std::uint64_t seed,
                                   unsigned workers)
{
    GaussianEnsemble ens;
    ens.n = approx.size();
    ens.T = approx.horizon();
    ens.R = R;
    ens.paths.resize(R * static_cast<std::size_t>(ens.T + 1) * ens.n);
    for_each_gaussian_path(approx, R, seed, workers, [&](std::size_t r, int t, const Vector &z) {
        double *dst = ens.paths.data() +
                      (r * static_cast<std::size_t>(ens.T + 1) + static_cast<std::size_t>(t)) * ens.n;
        for (std::size_t i = 0; i < ens.n; ++i)
            dst[i] = z[static_cast<Eigen::Index>(i)];
    });
    return ens;
}

namespace {

double lyapunov_residual(const Matrix &J, const Matrix &V, const Matrix &Q)
{
    return (Q - J * Q * J.transpose() - V).cwiseAbs().maxCoeff();
}

LyapunovResult solve_direct(const Matrix &J, const Matrix &V)
{
    const Eigen::Index n = J.rows();
    const Eigen::Index m = n * n;
    // column-major vec: vec(J Q J^T) = (J kron J) vec Q
    Matrix K = Matrix::Identity(m, m);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            const double jab = J(a, b);
            if (jab == 0.0)
                continue;
            K.block(a * n, b * n, n, n) -= jab * J;
        }
    }
    Eigen::PartialPivLU<Matrix> lu(K);
    if (!(lu.rcond() > 1e-13))
        throw Singular("I - J kron J is numerically singular (an eigenvalue product equals one)");
    const Vector vecV = Eigen::Map<const Vector>(V.data(), m);
    const Vector vecQ = lu.solve(vecV);
    LyapunovResult res;
    res.Q = Eigen::Map<const Matrix>(vecQ.data(), n, n);
    res.Q = 0.5 * (res.Q + res.Q.transpose());
    res.method = "direct";
    res.iterations = 1;
    return res;
}

LyapunovResult solve_iterative(const Matrix &J, const Matrix &V, double radius)
{
    if (!(radius < 1.0))
        throw NotConverged("fixed-point Lyapunov iteration needs r(J) < 1");
    // Doubling form of Q_{k+1} = J Q_k J^T + V: after k rounds Q holds the
    // first 2^k terms of sum_j J^j V J^jT.
    LyapunovResult res;
    res.method = "iterative";
    Matrix Q = V;
    Matrix A = J;
    const double scale = std::max(1.0, V.cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < 200; ++k) {
        const Matrix inc = A * Q * A.transpose();
        Q += inc;
        A = A * A;
        res.iterations = k + 1;
        if (inc.cwiseAbs().maxCoeff() <= 1e-16 * scale || A.cwiseAbs().maxCoeff() == 0.0) {
            res.Q = 0.5 * (Q + Q.transpose());
            // a few plain sweeps polish the rounding
            for (int s = 0; s < 3; ++s) {
                res.Q = J * res.Q * J.transpose() + V;
                res.Q = 0.5 * (res.Q + res.Q.transpose());
            }
            if (lyapunov_residual(J, V, res.Q) > 1e-12 * scale)
                throw NotConverged("Lyapunov iteration stalled above the 1e-12 residual target");
            return res;
        }
    }
    throw NotConverged("Lyapunov iteration did not converge");
}

} // namespace

LyapunovResult lyapunov_solve(const Matrix &J, const Matrix &V, LyapunovMethod method)
{
    if (J.rows() != J.cols())
        throw DomainError("Lyapunov solve needs a square J");
    const Eigen::Index n = J.rows();
    Matrix Vm;
    if (V.rows() == n && V.cols() == n)
        Vm = V;
    else if ((V.cols() == 1 && V.rows() == n) || (V.rows() == 1 && V.cols() == n))
        Vm = Eigen::Map<const Vector>(V.data(), n).asDiagonal();
    else
        throw DomainError("V must be n x n or a length-n diagonal");
    if (!J.allFinite() || !Vm.allFinite())
        throw DomainError("Lyapunov inputs must be finite");

    const double radius = spectral_radius_report(J).value;
    if (method == LyapunovMethod::automatic)
        method = n <= kLyapunovDirectMax ? LyapunovMethod::direct : LyapunovMethod::iterative;
    LyapunovResult res = method == LyapunovMethod::direct ? solve_direct(J, Vm)
                                                          : solve_iterative(J, Vm, radius);
    res.spectral_radius = radius;
    res.residual = lyapunov_residual(J, Vm, res.Q);
    return res;
}

} // namespace occlab
