#include "occlab/models/hanski.hpp"

#include "occlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace occlab::models {

double ColonizationCurve::value(double y) const
{
    return kind == Kind::rational ? b * y / (1.0 + b * y) : -std::expm1(-b * y);
}

double ColonizationCurve::d1(double y) const
{
    if (kind == Kind::rational) {
        const double u = 1.0 + b * y;
        return b / (u * u);
    }
    return b * std::exp(-b * y);
}

double ColonizationCurve::d2(double y) const
{
    if (kind == Kind::rational) {
        const double u = 1.0 + b * y;
        return -2.0 * b * b / (u * u * u);
    }
    return -b * b * std::exp(-b * y);
}

double ColonizationCurve::sup_derivative(int k) const
{
    // all derivatives peak in absolute value at y = 0
    const double factor = kind == Kind::rational ? std::tgamma(k + 1.0) : 1.0;
    return factor * std::pow(b, k);
}

double HanskiModel::kernel(const Point &u, const Point &v) const
{
    const double dx = u[0] - v[0];
    const double dy = dim == 2 ? u[1] - v[1] : 0.0;
    return std::exp(-std::sqrt(dx * dx + dy * dy) / ell);
}

void HanskiModel::validate() const
{
    if (dim != 1 && dim != 2)
        throw DomainError("Hanski model supports d = 1 or 2");
    if (z.empty())
        throw DomainError("Hanski model needs at least one patch");
    if (!(ell > 0.0))
        throw DomainError("kernel length scale must be positive");
    if (!(c.b >= 0.0))
        throw DomainError("colonization rate must be nonnegative");
    if (grid < 2)
        throw DomainError("limit grid needs at least two cells");
    if ((!a && !patch_a) || (!s && !patch_s))
        throw DomainError("Hanski model needs weight and survival functions");
    const auto n = static_cast<Eigen::Index>(z.size());
    if ((patch_a && patch_a->size() != n) || (patch_s && patch_s->size() != n))
        throw DomainError("patch table length does not match the patch count");
}

HanskiModel HanskiModel::equidistributed(std::size_t n, double a, double s, double b, double ell)
{
    HanskiModel m;
    m.z.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        m.z[i] = {(static_cast<double>(i) + 0.5) / static_cast<double>(n), 0.0};
    m.a = [a](const Point &, int) { return a; };
    m.s = [s](const Point &, int) { return s; };
    m.c.b = b;
    m.ell = ell;
    m.validate();
    return m;
}

namespace {

class HanskiRule : public OccupancyRule
{
public:
    explicit HanskiRule(HanskiModel m) : m_(std::move(m))
    {
        m_.validate();
        order_.resize(m_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (m_.dim == 1) {
            std::stable_sort(order_.begin(), order_.end(),
                             [&](std::size_t i, std::size_t j) { return m_.z[i][0] < m_.z[j][0]; });
        }
    }

    std::size_t size() const override { return m_.size(); }
    std::string name() const override { return "hanski"; }
    bool has_split() const override { return true; }
    bool homogeneous() const override { return m_.homogeneous; }

    void evaluate(const Vector &x, int t, Vector &out) const override
    {
        Vector S, C;
        split(x, t, S, C);
        out = x.cwiseProduct(S) + (Vector::Ones(x.size()) - x).cwiseProduct(C);
    }

    void split(const Vector &x, int t, Vector &S, Vector &C) const override
    {
        const auto N = static_cast<Eigen::Index>(m_.size());
        if (x.size() != N)
            throw DomainError("state length does not match the rule size");
        const Vector y = connectivity(x, t);
        S.resize(N);
        C.resize(N);
        for (Eigen::Index i = 0; i < N; ++i) {
            S[i] = survival(static_cast<std::size_t>(i), t);
            C[i] = m_.c.value(y[i]);
        }
    }

    std::optional<Matrix> analytic_jacobian(const Vector &x, int t) const override
    {
        const auto N = static_cast<Eigen::Index>(m_.size());
        const Matrix W = weights(t);
        const Vector y = W * x;
        Matrix J(N, N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const double slope = (1.0 - x[i]) * m_.c.d1(y[i]);
            J.row(i) = slope * W.row(i);
            J(i, i) = survival(static_cast<std::size_t>(i), t) - m_.c.value(y[i]);
        }
        return J;
    }

    std::optional<CoefficientSet> analytic_coefficients(int t) const override
    {
        const double c1 = m_.c.sup_derivative(1), c2 = m_.c.sup_derivative(2),
                     c3 = m_.c.sup_derivative(3);
        const Matrix W = weights(t); // w_ij = A_j D_ij, zero diagonal
        const double n = static_cast<double>(m_.size());
        const double alpha = c1 * W.colwise().sum().maxCoeff();
        const double sq = W.squaredNorm();
        const Matrix WtW = W.transpose() * W;
        double Gamma = 0.0;
        for (Eigen::Index j = 0; j < W.rows(); ++j) {
            for (Eigen::Index k = 0; k < W.rows(); ++k) {
                const double g = j == k ? c2 * WtW(j, j) : c2 * WtW(j, k) + c1 * (W(j, k) + W(k, j));
                Gamma = std::max(Gamma, g);
            }
        }
        const Vector rowsq = W.array().square().rowwise().sum().matrix();
        const Vector delta = c3 * (W.transpose() * rowsq) + c2 * rowsq;
        return CoefficientSet::make(alpha, c1 * std::sqrt(sq / n), Gamma, c2 * sq / n,
                                    delta.maxCoeff(), Provenance::analytic);
    }

private:
    double survival(std::size_t i, int t) const
    {
        return m_.patch_s ? (*m_.patch_s)[static_cast<Eigen::Index>(i)] : m_.s(m_.z[i], t);
    }

    double patch_weight(std::size_t i, int t) const
    {
        const double a = m_.patch_a ? (*m_.patch_a)[static_cast<Eigen::Index>(i)] : m_.a(m_.z[i], t);
        return a / static_cast<double>(m_.size());
    }

    Matrix weights(int t) const
    {
        const auto N = static_cast<Eigen::Index>(m_.size());
        Matrix W(N, N);
        for (Eigen::Index j = 0; j < N; ++j) {
            const double A = patch_weight(static_cast<std::size_t>(j), t);
            for (Eigen::Index i = 0; i < N; ++i)
                W(i, j) = i == j ? 0.0 : A * m_.kernel(m_.z[static_cast<std::size_t>(i)],
                                                       m_.z[static_cast<std::size_t>(j)]);
        }
        return W;
    }

    Vector connectivity(const Vector &x, int t) const
    {
        const std::size_t n = m_.size();
        Vector y = Vector::Zero(static_cast<Eigen::Index>(n));
        if (m_.dim == 1) {
            // exp(-|z_i - z_j|/ell) factorises along the sorted order: one
            // sweep from each side
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t i = order_[k];
                if (k > 0) {
                    const std::size_t p = order_[k - 1];
                    acc = std::exp(-(m_.z[i][0] - m_.z[p][0]) / m_.ell) *
                          (acc + patch_weight(p, t) * x[static_cast<Eigen::Index>(p)]);
                }
                y[static_cast<Eigen::Index>(i)] = acc;
            }
            acc = 0.0;
            for (std::size_t k = n; k-- > 0;) {
                const std::size_t i = order_[k];
                if (k + 1 < n) {
                    const std::size_t p = order_[k + 1];
                    acc = std::exp(-(m_.z[p][0] - m_.z[i][0]) / m_.ell) *
                          (acc + patch_weight(p, t) * x[static_cast<Eigen::Index>(p)]);
                }
                y[static_cast<Eigen::Index>(i)] += acc;
            }
            return y;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i && x[static_cast<Eigen::Index>(j)] != 0.0)
                    sum += patch_weight(j, t) * m_.kernel(m_.z[i], m_.z[j]) *
                           x[static_cast<Eigen::Index>(j)];
            }
            y[static_cast<Eigen::Index>(i)] = sum;
        }
        return y;
    }

    HanskiModel m_;
    std::vector<std::size_t> order_;
};

void check_density(const Vector &v, const char *what)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v[i] >= -kCubeTolerance && v[i] <= 1.0 + kCubeTolerance))
            throw DomainError(std::string(what) + " density left [0,1]");
    }
}

} // namespace

RulePtr hanski_rule(const HanskiModel &model)
{
    return std::make_shared<HanskiRule>(model);
}

HanskiGrid make_grid(int dim, std::size_t G)
{
    if (G < 2)
        throw DomainError("limit grid needs at least two cells");
    HanskiGrid grid;
    if (dim == 1) {
        for (std::size_t g = 0; g < G; ++g) {
            grid.nodes.push_back({(static_cast<double>(g) + 0.5) / static_cast<double>(G), 0.0});
            grid.weights.push_back(1.0 / static_cast<double>(G));
        }
        return grid;
    }
    if (dim != 2)
        throw DomainError("Hanski model supports d = 1 or 2");
    const auto side = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(G))));
    const double h = 1.0 / static_cast<double>(side);
    for (std::size_t a = 0; a < side; ++a) {
        for (std::size_t b = 0; b < side; ++b) {
            grid.nodes.push_back({(static_cast<double>(a) + 0.5) * h, (static_cast<double>(b) + 0.5) * h});
            grid.weights.push_back(h * h);
        }
    }
    return grid;
}

double HanskiLimit::integrate_pi(const Vector &h, int t) const
{
    const Vector &p = pi.at(static_cast<std::size_t>(t));
    if (h.size() != p.size())
        throw DomainError("test function length does not match the grid");
    double sum = 0.0;
    for (Eigen::Index g = 0; g < p.size(); ++g)
        sum += grid.weights[static_cast<std::size_t>(g)] * h[g] * p[g];
    return sum;
}

HanskiLimit hanski_limit_measure(const HanskiModel &model, const Vector &pi0, int T)
{
    if (!model.a || !model.s)
        throw DomainError("limit recursion needs weight and survival functions of z");
    if (T < 0)
        throw DomainError("horizon must be nonnegative");
    HanskiLimit out;
    out.grid = make_grid(model.dim, model.grid);
    const auto G = static_cast<Eigen::Index>(out.grid.size());
    if (pi0.size() != G)
        throw DomainError("initial density length does not match the grid");
    check_density(pi0, "initial");

    out.kernel.resize(G, G);
    for (Eigen::Index g = 0; g < G; ++g) {
        for (Eigen::Index h = 0; h < G; ++h)
            out.kernel(g, h) = model.kernel(out.grid.nodes[static_cast<std::size_t>(g)],
                                            out.grid.nodes[static_cast<std::size_t>(h)]) *
                               out.grid.weights[static_cast<std::size_t>(h)];
    }

    out.pi.push_back(pi0);
    out.sigma.push_back(Vector::Zero(G));
    for (int t = 0; t <= T; ++t) {
        const Vector &p = out.pi.back();
        Vector ap(G);
        for (Eigen::Index g = 0; g < G; ++g)
            ap[g] = model.a(out.grid.nodes[static_cast<std::size_t>(g)], t) * p[g];
        out.C.push_back(out.kernel * ap);
        if (t == T)
            break;
        const Vector &sg = out.sigma.back();
        Vector np(G), ns(G);
        for (Eigen::Index g = 0; g < G; ++g) {
            const double s = model.s(out.grid.nodes[static_cast<std::size_t>(g)], t);
            const double c = model.c.value(out.C.back()[g]);
            np[g] = s * p[g] + c * (1.0 - p[g]);
            ns[g] = s * (1.0 - s) * p[g] + c * (1.0 - c) * (1.0 - p[g]) + (s - c) * (s - c) * sg[g];
        }
        check_density(np, "occupancy");
        out.pi.push_back(std::move(np));
        out.sigma.push_back(std::move(ns));
    }
    return out;
}

Vector hanski_apply_J(const HanskiModel &model, const HanskiLimit &limit, int t, const Vector &h)
{
    const auto tt = static_cast<std::size_t>(t);
    if (t < 0 || tt >= limit.C.size())
        throw DomainError("time index outside the computed limit");
    const Vector &p = limit.pi[tt];
    const Vector &C = limit.C[tt];
    const auto G = p.size();
    if (h.size() != G)
        throw DomainError("test function length does not match the grid");
    Vector inner(G);
    for (Eigen::Index g = 0; g < G; ++g)
        inner[g] = h[g] * model.c.d1(C[g]) * (1.0 - p[g]);
    const Vector conv = limit.kernel * inner;
    Vector out(G);
    for (Eigen::Index g = 0; g < G; ++g) {
        const Point &z = limit.grid.nodes[static_cast<std::size_t>(g)];
        out[g] = (model.s(z, t) - model.c.value(C[g])) * h[g] + model.a(z, t) * conv[g];
    }
    return out;
}

BitState error_diffusion_state(const HanskiModel &model, const std::function<double(const Point &)> &pi0)
{
    const std::size_t n = model.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return model.z[i] < model.z[j];
    });
    BitState x(n, 0);
    double acc = 0.5, prev = std::floor(acc);
    for (std::size_t i : order) {
        const double v = pi0(model.z[i]);
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("initial density must lie in [0,1]");
        acc += v;
        const double f = std::floor(acc);
        x[i] = static_cast<std::uint8_t>(f > prev);
        prev = f;
    }
    return x;
}

} // namespace occlab::models
