#include "occlab/rule.hpp"

#include "occlab/errors.hpp"
#include "occlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace occlab {

const char *to_string(Provenance p)
{
    return p == Provenance::analytic ? "analytic" : "sampled";
}

CoefficientSet CoefficientSet::make(double alpha, double beta, double Gamma, double gamma,
                                    double delta, Provenance provenance)
{
    for (double v : {alpha, beta, Gamma, gamma, delta}) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw DomainError("coefficient entries must be finite and nonnegative");
    }
    CoefficientSet c;
    c.alpha = alpha;
    c.beta = beta;
    c.Gamma = Gamma;
    c.gamma = gamma;
    c.delta = delta;
    c.psi = beta + gamma;
    c.provenance = provenance;
    return c;
}

double alpha_window(const CoefficientSequence &coeffs, int s, int t)
{
    double sum = 0.0;
    for (int r = s + 1; r <= t - 1; ++r)
        sum += coeffs.at(static_cast<std::size_t>(r)).alpha;
    return sum;
}

bool any_sampled(const CoefficientSequence &coeffs, int upto)
{
    for (int s = 0; s <= upto && s < static_cast<int>(coeffs.size()); ++s) {
        if (coeffs[static_cast<std::size_t>(s)].provenance == Provenance::sampled)
            return true;
    }
    return false;
}

void OccupancyRule::split(const Vector &, int, Vector &, Vector &) const
{
    throw SplitRequired("rule '" + name() + "' has no survival/colonization split");
}

std::optional<Matrix> OccupancyRule::analytic_jacobian(const Vector &, int) const
{
    return std::nullopt;
}

std::optional<CoefficientSet> OccupancyRule::analytic_coefficients(int) const
{
    return std::nullopt;
}

// ---------------------------------------------------------------------------

FunctionRule::FunctionRule(FunctionRuleSpec spec) : spec_(std::move(spec))
{
    if (spec_.n == 0)
        throw DomainError("rule must have at least one node");
    if (!spec_.evaluate && !spec_.split)
        throw DomainError("function rule needs an evaluate or split callable");
}

void FunctionRule::evaluate(const Vector &x, int t, Vector &out) const
{
    if (spec_.evaluate) {
        spec_.evaluate(x, t, out);
        return;
    }
    Vector S(x.size()), C(x.size());
    spec_.split(x, t, S, C);
    out = x.cwiseProduct(S) + (Vector::Ones(x.size()) - x).cwiseProduct(C);
}

void FunctionRule::split(const Vector &x, int t, Vector &survival, Vector &colonization) const
{
    if (!spec_.split)
        OccupancyRule::split(x, t, survival, colonization);
    spec_.split(x, t, survival, colonization);
}

std::optional<Matrix> FunctionRule::analytic_jacobian(const Vector &x, int t) const
{
    if (!spec_.jacobian)
        return std::nullopt;
    return spec_.jacobian(x, t);
}

std::optional<CoefficientSet> FunctionRule::analytic_coefficients(int t) const
{
    if (!spec_.coefficients)
        return std::nullopt;
    return spec_.coefficients(t);
}

RulePtr make_constant_rule(Vector c)
{
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (!(c[i] >= 0.0 && c[i] <= 1.0))
            throw DomainError("constant rule values must lie in [0,1]");
    }
    FunctionRuleSpec spec;
    spec.n = static_cast<std::size_t>(c.size());
    spec.name = "constant";
    spec.split = [c](const Vector &, int, Vector &S, Vector &C) {
        S = c;
        C = c;
    };
    spec.jacobian = [n = c.size()](const Vector &, int) { return Matrix::Zero(n, n).eval(); };
    spec.coefficients = [](int) {
        return CoefficientSet::make(0, 0, 0, 0, 0, Provenance::analytic);
    };
    return std::make_shared<FunctionRule>(std::move(spec));
}

RulePtr make_linear_rule(Matrix A)
{
    if (A.rows() != A.cols() || A.rows() == 0)
        throw DomainError("linear rule needs a nonempty square matrix");
    if ((A.array() < 0.0).any())
        throw DomainError("linear rule matrix must be nonnegative");
    if ((A.rowwise().sum().array() > 1.0 + kCubeTolerance).any())
        throw DomainError("linear rule row sums must not exceed one");
    const Eigen::Index n = A.rows();

    Matrix off = A;
    off.diagonal().setZero();
    const Vector abs_col = off.colwise().sum().transpose();
    const double alpha = abs_col.maxCoeff();
    const double beta = std::sqrt(off.squaredNorm() / static_cast<double>(n));

    FunctionRuleSpec spec;
    spec.n = static_cast<std::size_t>(n);
    spec.name = "linear";
    spec.split = [A, off](const Vector &x, int, Vector &S, Vector &C) {
        C = off * x;
        S = C + A.diagonal();
    };
    spec.evaluate = [A](const Vector &x, int, Vector &out) { out = A * x; };
    spec.jacobian = [A](const Vector &, int) { return A; };
    spec.coefficients = [alpha, beta](int) {
        return CoefficientSet::make(alpha, beta, 0, 0, 0, Provenance::analytic);
    };
    return std::make_shared<FunctionRule>(std::move(spec));
}

namespace {

class IidStartRule : public OccupancyRule
{
public:
    IidStartRule(RulePtr base, Vector p0) : base_(std::move(base)), p0_(std::move(p0))
    {
        if (static_cast<std::size_t>(p0_.size()) != base_->size())
            throw DomainError("iid start vector length must match the rule size");
        if ((p0_.array() < 0.0).any() || (p0_.array() > 1.0).any())
            throw DomainError("iid start probabilities must lie in [0,1]");
    }

    std::size_t size() const override { return base_->size(); }
    std::string name() const override { return base_->name() + "+iid-start"; }
    bool homogeneous() const override { return false; }
    bool has_split() const override { return base_->has_split(); }

    void evaluate(const Vector &x, int t, Vector &out) const override
    {
        if (t == 0)
            out = p0_;
        else
            base_->evaluate(x, t - 1, out);
    }

    void split(const Vector &x, int t, Vector &S, Vector &C) const override
    {
        if (t == 0) {
            S = p0_;
            C = p0_;
        } else {
            base_->split(x, t - 1, S, C);
        }
    }

    std::optional<Matrix> analytic_jacobian(const Vector &x, int t) const override
    {
        if (t == 0)
            return Matrix::Zero(x.size(), x.size()).eval();
        return base_->analytic_jacobian(x, t - 1);
    }

    std::optional<CoefficientSet> analytic_coefficients(int t) const override
    {
        if (t == 0)
            return CoefficientSet::make(0, 0, 0, 0, 0, Provenance::analytic);
        return base_->analytic_coefficients(t - 1);
    }

private:
    RulePtr base_;
    Vector p0_;
};

void check_cube(const Vector &x, std::size_t n, const char *what)
{
    if (static_cast<std::size_t>(x.size()) != n) {
        std::ostringstream os;
        os << what << " has length " << x.size() << ", rule expects " << n;
        throw DomainError(os.str());
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!(x[i] >= -kCubeTolerance && x[i] <= 1.0 + kCubeTolerance)) {
            std::ostringstream os;
            os << what << "[" << i << "] = " << x[i] << " lies outside [0,1]";
            throw DomainError(os.str());
        }
    }
}

} // namespace

RulePtr make_iid_start_rule(RulePtr base, Vector p0)
{
    return std::make_shared<IidStartRule>(std::move(base), std::move(p0));
}

Vector evaluate_rule(const OccupancyRule &rule, const Vector &x, int t)
{
    check_cube(x, rule.size(), "state");
    const Vector xc = x.cwiseMax(0.0).cwiseMin(1.0);
    Vector out(xc.size());
    rule.evaluate(xc, t, out);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double v = out[i];
        if (!(v >= -kCubeTolerance && v <= 1.0 + kCubeTolerance)) {
            std::ostringstream os;
            os << "rule '" << rule.name() << "' returned P_" << i << " = " << v
               << " outside [0,1] at t = " << t;
            throw RangeError(os.str());
        }
        out[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Matrix finite_difference_jacobian(const OccupancyRule &rule, const Vector &x, int t, double h)
{
    check_cube(x, rule.size(), "state");
    const Eigen::Index n = x.size();
    Matrix J(n, n);
    Vector xp = x.cwiseMax(0.0).cwiseMin(1.0);
    Vector fp(n), fm(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double xj = xp[j];
        double lo = xj - h, hi = xj + h;
        if (lo < 0.0)
            lo = xj;
        if (hi > 1.0)
            hi = xj;
        xp[j] = hi;
        rule.evaluate(xp, t, fp);
        xp[j] = lo;
        rule.evaluate(xp, t, fm);
        xp[j] = xj;
        J.col(j) = (fp - fm) / (hi - lo);
    }
    return J;
}

Matrix jacobian(const OccupancyRule &rule, const Vector &x, int t)
{
    check_cube(x, rule.size(), "state");
    if (auto J = rule.analytic_jacobian(x, t))
        return *J;
    return finite_difference_jacobian(rule, x, t);
}

namespace {

// Steps for the higher-order difference quotients of the coefficient
// estimator. Roundoff grows like eps/h^k, so the step grows with the order.
constexpr double kFirstStep = 1e-6;
constexpr double kSecondStep = 1e-4;
constexpr double kThirdStep = 1e-3;
constexpr std::size_t kEstimatorMaxNodes = 128;

struct DerivativeMaxima
{
    explicit DerivativeMaxima(std::size_t n) : n(n), d1(n * n, 0.0), d2(n * n * n, 0.0), d3(n * n * n, 0.0)
    {
    }
    std::size_t n;
    std::vector<double> d1; // [i*n + j]        |d_j P_i|
    std::vector<double> d2; // [(i*n + j)*n + k] |d_j d_k P_i|
    std::vector<double> d3; // [(i*n + j)*n + k] |d_j d_k^2 P_i|
};

void accumulate_derivatives(const OccupancyRule &rule, int t, const Vector &x, DerivativeMaxima &m)
{
    const std::size_t n = m.n;
    const auto N = static_cast<Eigen::Index>(n);
    Vector y = x;
    Vector f0(N), a(N), b(N), c(N), d(N);
    auto eval = [&](Vector &out) { rule.evaluate(y, t, out); };
    eval(f0);

    for (std::size_t j = 0; j < n; ++j) {
        const auto J = static_cast<Eigen::Index>(j);
        const double h = kFirstStep;
        y[J] = x[J] + h;
        eval(a);
        y[J] = x[J] - h;
        eval(b);
        y[J] = x[J];
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::abs(a[static_cast<Eigen::Index>(i)] - b[static_cast<Eigen::Index>(i)]) / (2 * h);
            m.d1[i * n + j] = std::max(m.d1[i * n + j], v);
        }
    }

    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = j; k < n; ++k) {
            const auto J = static_cast<Eigen::Index>(j), K = static_cast<Eigen::Index>(k);
            const double h = kSecondStep;
            if (j == k) {
                y[J] = x[J] + h;
                eval(a);
                y[J] = x[J] - h;
                eval(b);
                y[J] = x[J];
                for (std::size_t i = 0; i < n; ++i) {
                    const auto I = static_cast<Eigen::Index>(i);
                    const double v = std::abs(a[I] - 2 * f0[I] + b[I]) / (h * h);
                    double &slot = m.d2[(i * n + j) * n + k];
                    slot = std::max(slot, v);
                }
            } else {
                y[J] = x[J] + h, y[K] = x[K] + h;
                eval(a);
                y[J] = x[J] + h, y[K] = x[K] - h;
                eval(b);
                y[J] = x[J] - h, y[K] = x[K] + h;
                eval(c);
                y[J] = x[J] - h, y[K] = x[K] - h;
                eval(d);
                y[J] = x[J], y[K] = x[K];
                for (std::size_t i = 0; i < n; ++i) {
                    const auto I = static_cast<Eigen::Index>(i);
                    const double v = std::abs(a[I] - b[I] - c[I] + d[I]) / (4 * h * h);
                    double &s1 = m.d2[(i * n + j) * n + k];
                    double &s2 = m.d2[(i * n + k) * n + j];
                    s1 = std::max(s1, v);
                    s2 = std::max(s2, v);
                }
            }
        }
    }

    // d_j d_k^2 P_i: central difference in j of the second difference in k.
    const double h = kThirdStep;
    Vector pp(N), p0(N), pm(N), mp(N), m0(N), mm(N);
    for (std::size_t j = 0; j < n; ++j) {
        const auto J = static_cast<Eigen::Index>(j);
        for (std::size_t k = 0; k < n; ++k) {
            const auto K = static_cast<Eigen::Index>(k);
            if (j == k) {
                y[J] = x[J] + 2 * h;
                eval(a);
                y[J] = x[J] + h;
                eval(b);
                y[J] = x[J] - h;
                eval(c);
                y[J] = x[J] - 2 * h;
                eval(d);
                y[J] = x[J];
                for (std::size_t i = 0; i < n; ++i) {
                    const auto I = static_cast<Eigen::Index>(i);
                    const double v = std::abs(a[I] - 2 * b[I] + 2 * c[I] - d[I]) / (2 * h * h * h);
                    double &slot = m.d3[(i * n + j) * n + k];
                    slot = std::max(slot, v);
                }
                continue;
            }
            y[J] = x[J] + h;
            y[K] = x[K] + h;
            eval(pp);
            y[K] = x[K];
            eval(p0);
            y[K] = x[K] - h;
            eval(pm);
            y[J] = x[J] - h;
            y[K] = x[K] + h;
            eval(mp);
            y[K] = x[K];
            eval(m0);
            y[K] = x[K] - h;
            eval(mm);
            y[J] = x[J];
            y[K] = x[K];
            for (std::size_t i = 0; i < n; ++i) {
                const auto I = static_cast<Eigen::Index>(i);
                const double plus = pp[I] - 2 * p0[I] + pm[I];
                const double minus = mp[I] - 2 * m0[I] + mm[I];
                const double v = std::abs(plus - minus) / (2 * h * h * h);
                double &slot = m.d3[(i * n + j) * n + k];
                slot = std::max(slot, v);
            }
        }
    }
}

} // namespace

CoefficientSet estimate_coefficients(const OccupancyRule &rule, int t, std::size_t budget,
                                     std::uint64_t seed)
{
    const std::size_t n = rule.size();
    if (budget == 0)
        throw DomainError("estimator budget must be at least one sample");
    if (n > kEstimatorMaxNodes)
        throw TooLarge("sampled coefficient estimation is limited to 128 nodes");
    const auto N = static_cast<Eigen::Index>(n);

    // Stencils reach 2*kThirdStep from the centre; keep every point inside the cube.
    const double margin = 2.0 * kThirdStep;
    const double width = 1.0 - 2.0 * margin;
    CounterRng rng(seed, static_cast<std::uint64_t>(t), Stream::sampling);

    DerivativeMaxima maxima(n);

    // Latin hypercube: coordinate j of point s falls in stratum perm_j(s).
    std::vector<std::vector<std::size_t>> perms(n, std::vector<std::size_t>(budget));
    for (std::size_t j = 0; j < n; ++j) {
        auto &perm = perms[j];
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t s = budget; s > 1; --s) {
            const std::size_t r = rng.bits(j, s) % s;
            std::swap(perm[s - 1], perm[r]);
        }
    }
    Vector x(N);
    for (std::size_t s = 0; s < budget; ++s) {
        for (std::size_t j = 0; j < n; ++j) {
            const double u = (static_cast<double>(perms[j][s]) + rng.uniform(1000 + j, s)) /
                             static_cast<double>(budget);
            x[static_cast<Eigen::Index>(j)] = margin + width * u;
        }
        accumulate_derivatives(rule, t, x, maxima);
    }

    // Corners of a random sub-cube spanned by min(n,10) coordinates.
    const std::size_t k = std::min<std::size_t>(n, 10);
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    for (std::size_t s = n; s > 1; --s) {
        const std::size_t r = rng.bits(2000, s) % s;
        std::swap(coords[s - 1], coords[r]);
    }
    coords.resize(k);
    Vector base(N);
    for (std::size_t j = 0; j < n; ++j)
        base[static_cast<Eigen::Index>(j)] = margin + width * rng.uniform(3000, j);
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
        x = base;
        for (std::size_t b = 0; b < k; ++b)
            x[static_cast<Eigen::Index>(coords[b])] = (mask >> b & 1u) ? 1.0 - margin : margin;
        accumulate_derivatives(rule, t, x, maxima);
    }

    const double nd = static_cast<double>(n);
    double alpha = 0.0, beta2 = 0.0, Gamma = 0.0, gamma = 0.0, delta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j)
                continue;
            col += maxima.d1[i * n + j];
            beta2 += maxima.d1[i * n + j] * maxima.d1[i * n + j];
        }
        alpha = std::max(alpha, col);
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += maxima.d2[(i * n + j) * n + k2];
            Gamma = std::max(Gamma, s);
        }
        for (std::size_t i = 0; i < n; ++i)
            gamma += maxima.d2[(i * n + j) * n + j];
        double s3 = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k2 = 0; k2 < n; ++k2)
                s3 += maxima.d3[(i * n + j) * n + k2];
        delta = std::max(delta, s3);
    }
    return CoefficientSet::make(alpha, std::sqrt(beta2 / nd), Gamma, gamma / nd, delta,
                                Provenance::sampled);
}

CoefficientSet coefficients(const OccupancyRule &rule, int t, std::size_t budget, std::uint64_t seed)
{
    if (auto c = rule.analytic_coefficients(t))
        return *c;
    return estimate_coefficients(rule, t, budget, seed);
}

CoefficientSequence coefficient_sequence(const OccupancyRule &rule, int T, std::size_t budget,
                                         std::uint64_t seed)
{
    CoefficientSequence seq;
    seq.reserve(static_cast<std::size_t>(T + 1));
    for (int t = 0; t <= T; ++t)
        seq.push_back(coefficients(rule, t, budget, seed));
    return seq;
}

double kappa(const CoefficientSequence &coeffs, int t, std::size_t n)
{
    if (t <= 0)
        return 0.0;
    const double rn = std::sqrt(static_cast<double>(n));
    const CoefficientSet &ct = coeffs.at(static_cast<std::size_t>(t));
    const double front = 1.0 + ct.alpha + static_cast<double>(n) * ct.Gamma + rn * ct.delta;
    double sum = 0.0;
    for (int s = 0; s < t; ++s) {
        const double psi = coeffs.at(static_cast<std::size_t>(s)).psi;
        sum += (1.0 + psi * rn * (1.0 + psi * rn)) * static_cast<double>(t) *
               std::exp(16.0 * alpha_window(coeffs, s, t));
    }
    return front * sum;
}

SplitDiagnostics validate_split(const OccupancyRule &rule, int t, std::size_t samples,
                                std::uint64_t seed)
{
    if (!rule.has_split())
        throw SplitRequired("rule '" + rule.name() + "' has no survival/colonization split");
    const auto n = static_cast<Eigen::Index>(rule.size());
    CounterRng rng(seed, static_cast<std::uint64_t>(t), Stream::sampling);
    SplitDiagnostics diag;
    diag.samples = samples;
    const double h = 1e-4;
    Vector x(n), P(n), S(n), C(n), a(n), b(n);
    for (std::size_t s = 0; s < samples; ++s) {
        for (Eigen::Index j = 0; j < n; ++j)
            x[j] = h + (1.0 - 2 * h) * rng.uniform(s, static_cast<std::uint64_t>(j));
        rule.evaluate(x, t, P);
        rule.split(x, t, S, C);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double err = std::abs(P[i] - x[i] * S[i] - (1.0 - x[i]) * C[i]);
            diag.max_decomposition_error = std::max(diag.max_decomposition_error, err);
        }
        const auto i = static_cast<Eigen::Index>(rng.bits(s, 1u << 30) % static_cast<std::uint64_t>(n));
        const double xi = x[i];
        x[i] = xi + h;
        rule.evaluate(x, t, a);
        x[i] = xi - h;
        rule.evaluate(x, t, b);
        x[i] = xi;
        diag.max_self_curvature =
            std::max(diag.max_self_curvature, std::abs(a[i] - 2 * P[i] + b[i]) / (h * h));
    }
    return diag;
}

} // namespace occlab
