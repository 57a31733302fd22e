#include "occlab/models/graph_dynamics.hpp"

#include "occlab/errors.hpp"
#include "occlab/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace occlab::models {

double AttachmentFn::sup_derivative(int k) const
{
    switch (k) {
    case 1:
        return std::max(std::abs(c1), std::abs(c1 + 2.0 * c2));
    case 2:
        return std::abs(2.0 * c2);
    default:
        return 0.0;
    }
}

void AttachmentFn::validate() const
{
    std::vector<double> probe{0.0, 1.0};
    if (c2 != 0.0) {
        const double u = -c1 / (2.0 * c2);
        if (u > 0.0 && u < 1.0)
            probe.push_back(u);
    }
    for (double u : probe) {
        const double v = value(u);
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("attachment function must map [0,1] into [0,1]");
    }
}

double GraphDynModel::q_at(int t) const
{
    if (q.empty())
        throw DomainError("graph model needs a retention probability");
    const auto k = std::min(static_cast<std::size_t>(std::max(t, 0)), q.size() - 1);
    return q[k];
}

void GraphDynModel::validate() const
{
    if (v < 2)
        throw DomainError("graph model needs at least two vertices");
    if (edges.empty())
        throw DomainError("host graph has no edges");
    for (const auto &[i, j] : edges) {
        if (i >= j || j >= v)
            throw DomainError("host edges must satisfy i < j < v");
    }
    for (double qt : q) {
        if (!(qt >= 0.0 && qt <= 1.0))
            throw DomainError("retention probability must lie in [0,1]");
    }
    if (q.empty())
        throw DomainError("graph model needs a retention probability");
    f.validate();
}

GraphDynModel GraphDynModel::complete(std::size_t v, double q, AttachmentFn f)
{
    GraphDynModel m;
    m.v = v;
    for (std::uint32_t i = 0; i < v; ++i) {
        for (std::uint32_t j = i + 1; j < v; ++j)
            m.edges.emplace_back(i, j);
    }
    m.q = {q};
    m.f = f;
    m.validate();
    return m;
}

Matrix GraphDynModel::host() const
{
    const auto V = static_cast<Eigen::Index>(v);
    Matrix H = Matrix::Zero(V, V);
    for (const auto &[i, j] : edges) {
        H(i, j) = 1.0;
        H(j, i) = 1.0;
    }
    return H;
}

namespace {

class GraphRule : public OccupancyRule
{
public:
    explicit GraphRule(GraphDynModel m) : m_(std::move(m))
    {
        m_.validate();
        incident_.resize(m_.v);
        for (std::size_t e = 0; e < m_.edges.size(); ++e) {
            incident_[m_.edges[e].first].push_back(e);
            incident_[m_.edges[e].second].push_back(e);
        }
    }

    std::size_t size() const override { return m_.size(); }
    std::string name() const override { return "graph-dynamics"; }
    bool has_split() const override { return true; }
    bool homogeneous() const override
    {
        return std::all_of(m_.q.begin(), m_.q.end(), [&](double x) { return x == m_.q.front(); });
    }

    void evaluate(const Vector &x, int t, Vector &out) const override
    {
        Vector S, C;
        split(x, t, S, C);
        out = x.cwiseProduct(S) + (Vector::Ones(x.size()) - x).cwiseProduct(C);
    }

    void split(const Vector &x, int t, Vector &S, Vector &C) const override
    {
        const Vector u = arguments(x);
        S = Vector::Constant(x.size(), m_.q_at(t));
        C.resize(x.size());
        for (Eigen::Index e = 0; e < x.size(); ++e)
            C[e] = m_.f.value(u[e]);
    }

    std::optional<Matrix> analytic_jacobian(const Vector &x, int t) const override
    {
        const Vector u = arguments(x);
        const auto n = static_cast<Eigen::Index>(m_.size());
        const double q = m_.q_at(t), scale = 0.5 / static_cast<double>(m_.v);
        Matrix J = Matrix::Zero(n, n);
        for (Eigen::Index e = 0; e < n; ++e) {
            const auto &[i, j] = m_.edges[static_cast<std::size_t>(e)];
            const double slope = (1.0 - x[e]) * m_.f.d1(u[e]) * scale;
            for (std::uint32_t end : {i, j}) {
                for (std::size_t k : incident_[end])
                    J(e, static_cast<Eigen::Index>(k)) = slope;
            }
            J(e, e) = q - m_.f.value(u[e]);
        }
        return J;
    }

    std::optional<CoefficientSet> analytic_coefficients(int) const override
    {
        const double v = static_cast<double>(m_.v), n = static_cast<double>(m_.size());
        const double F1 = m_.f.sup_derivative(1), F2 = m_.f.sup_derivative(2),
                     F3 = m_.f.sup_derivative(3);
        const double s1 = F1 / (2.0 * v), s2 = F2 / (4.0 * v * v), s3 = F3 / (8.0 * v * v * v);
        // adj(e): host edges sharing exactly one endpoint with e
        std::vector<double> adj(m_.size()), through(m_.v, 0.0);
        double adj_max = 0.0, adj_sum = 0.0;
        for (std::size_t e = 0; e < m_.size(); ++e) {
            const auto &[i, j] = m_.edges[e];
            adj[e] = static_cast<double>(incident_[i].size() + incident_[j].size() - 2);
            adj_max = std::max(adj_max, adj[e]);
            adj_sum += adj[e];
            through[i] += adj[e];
            through[j] += adj[e];
        }
        const Matrix H = m_.host();
        // Gamma: diagonal, adjacent pairs (i,j),(i,k), and at most 4 common
        // neighbours for disjoint pairs
        double Gamma = std::max(s2 * adj_max, 4.0 * s2);
        for (std::size_t i = 0; i < m_.v; ++i) {
            const auto &inc = incident_[i];
            if (inc.size() < 2)
                continue;
            for (std::size_t a = 0; a < inc.size(); ++a) {
                for (std::size_t b = a + 1; b < inc.size(); ++b) {
                    const auto &ea = m_.edges[inc[a]], &eb = m_.edges[inc[b]];
                    const auto j = ea.first == i ? ea.second : ea.first;
                    const auto k = eb.first == i ? eb.second : eb.first;
                    const double common = static_cast<double>(inc.size() - 2) + H(j, k);
                    Gamma = std::max(Gamma, s2 * common + 2.0 * s1);
                }
            }
        }
        double delta = 0.0;
        for (std::size_t e = 0; e < m_.size(); ++e) {
            const auto &[i, j] = m_.edges[e];
            delta = std::max(delta, s2 * adj[e] + s3 * (through[i] + through[j] - 2.0 * adj[e]));
        }
        return CoefficientSet::make(s1 * adj_max, s1 * std::sqrt(adj_sum / n), Gamma,
                                    s2 * adj_sum / n, delta, Provenance::analytic);
    }

private:
    Vector arguments(const Vector &x) const
    {
        const auto n = static_cast<Eigen::Index>(m_.size());
        if (x.size() != n)
            throw DomainError("state length does not match the rule size");
        std::vector<double> deg(m_.v, 0.0);
        for (Eigen::Index e = 0; e < n; ++e) {
            deg[m_.edges[static_cast<std::size_t>(e)].first] += x[e];
            deg[m_.edges[static_cast<std::size_t>(e)].second] += x[e];
        }
        Vector u(n);
        const double scale = 0.5 / static_cast<double>(m_.v);
        for (Eigen::Index e = 0; e < n; ++e) {
            const auto &[i, j] = m_.edges[static_cast<std::size_t>(e)];
            u[e] = (deg[i] + deg[j] - 2.0 * x[e]) * scale;
        }
        return u;
    }

    GraphDynModel m_;
    std::vector<std::vector<std::size_t>> incident_;
};

} // namespace

RulePtr graph_rule(const GraphDynModel &model)
{
    return std::make_shared<GraphRule>(model);
}

BitState graph_state_from_graphon(const GraphDynModel &model,
                                  const std::function<double(double, double)> &W0)
{
    BitState x(model.size());
    const double v = static_cast<double>(model.v);
    for (std::size_t e = 0; e < model.size(); ++e) {
        const auto &[i, j] = model.edges[e];
        x[e] = static_cast<std::uint8_t>(W0((i + 0.5) / v, (j + 0.5) / v) >= 0.5);
    }
    return x;
}

Matrix edge_matrix(const GraphDynModel &model, const Vector &x)
{
    const auto V = static_cast<Eigen::Index>(model.v);
    Matrix A = Matrix::Zero(V, V);
    for (std::size_t e = 0; e < model.size(); ++e) {
        const auto &[i, j] = model.edges[e];
        A(i, j) = A(j, i) = x[static_cast<Eigen::Index>(e)];
    }
    return A;
}

Matrix edge_matrix(const GraphDynModel &model, std::span<const std::uint8_t> x)
{
    const auto V = static_cast<Eigen::Index>(model.v);
    Matrix A = Matrix::Zero(V, V);
    for (std::size_t e = 0; e < model.size(); ++e) {
        const auto &[i, j] = model.edges[e];
        A(i, j) = A(j, i) = x[e];
    }
    return A;
}

namespace {

void check_kernel(const Matrix &W, const char *what)
{
    if (W.rows() != W.cols())
        throw DomainError(std::string(what) + " must be square");
    if ((W.array() < -kCubeTolerance).any() || (W.array() > 1.0 + kCubeTolerance).any())
        throw RangeError(std::string(what) + " left [0,1]");
}

Matrix attachment_args(const Matrix &Wt)
{
    const Vector d = Wt.rowwise().mean();
    return 0.5 * (d.replicate(1, Wt.cols()) + d.transpose().replicate(Wt.rows(), 1));
}

} // namespace

Matrix graphon_step(const Matrix &Wt, const Matrix &host, double q, const AttachmentFn &f)
{
    check_kernel(Wt, "graphon");
    check_kernel(host, "host graphon");
    if (Wt.rows() != host.rows())
        throw DomainError("graphon and host sizes differ");
    const Matrix u = attachment_args(Wt);
    Matrix next(Wt.rows(), Wt.cols());
    for (Eigen::Index x = 0; x < Wt.rows(); ++x) {
        for (Eigen::Index y = 0; y < Wt.cols(); ++y)
            next(x, y) = q * Wt(x, y) + host(x, y) * (1.0 - Wt(x, y)) * f.value(u(x, y));
    }
    check_kernel(next, "graphon");
    return next;
}

GraphonTrajectory graphon_trajectory(const Matrix &W0, const Matrix &host, const GraphDynModel &model,
                                     int T)
{
    if (T < 0)
        throw DomainError("horizon must be nonnegative");
    GraphonTrajectory traj;
    traj.host = host;
    traj.W.push_back(W0);
    traj.s.push_back(Matrix::Zero(W0.rows(), W0.cols()));
    traj.noise.push_back(Matrix::Zero(W0.rows(), W0.cols()));
    for (int t = 0; t < T; ++t) {
        const Matrix &W = traj.W.back();
        const double q = model.q_at(t);
        const Matrix u = attachment_args(W);
        Matrix s(W.rows(), W.cols()), one(W.rows(), W.cols());
        for (Eigen::Index x = 0; x < W.rows(); ++x) {
            for (Eigen::Index y = 0; y < W.cols(); ++y) {
                const double w = model.f.value(u(x, y));
                one(x, y) = q * (1.0 - q) * W(x, y) + host(x, y) * w * (1.0 - w) * (1.0 - W(x, y));
                s(x, y) = one(x, y) + (q - w) * (q - w) * traj.s.back()(x, y);
            }
        }
        traj.W.push_back(graphon_step(W, host, q, model.f));
        traj.s.push_back(std::move(s));
        traj.noise.push_back(std::move(one));
    }
    return traj;
}

Matrix triangle_kernel(const Matrix &W)
{
    return 3.0 * (W * W) / static_cast<double>(W.rows());
}

double graphon_sigma2(const GraphonTrajectory &traj, int t, const Matrix &U, NoiseModel noise)
{
    const double mass = traj.host.sum();
    if (mass <= 0.0)
        throw DomainError("host graphon is empty");
    const auto &density = noise == NoiseModel::marginal ? traj.s : traj.noise;
    return (U.array().square() * density.at(static_cast<std::size_t>(t)).array()).sum() / mass;
}

Matrix graphon_apply_J(const GraphonTrajectory &traj, const GraphDynModel &model, int t, const Matrix &U)
{
    const Matrix &W = traj.W.at(static_cast<std::size_t>(t));
    const Matrix &H = traj.host;
    if (U.rows() != W.rows() || U.cols() != W.cols())
        throw DomainError("kernel size does not match the graphon grid");
    const double q = model.q_at(t);
    const Matrix u = attachment_args(W);
    Matrix inner(W.rows(), W.cols());
    for (Eigen::Index x = 0; x < W.rows(); ++x) {
        for (Eigen::Index z = 0; z < W.cols(); ++z)
            inner(x, z) = H(x, z) * (1.0 - W(x, z)) * U(x, z) * model.f.d1(u(x, z));
    }
    const Vector I = inner.rowwise().mean();
    Matrix out(W.rows(), W.cols());
    for (Eigen::Index x = 0; x < W.rows(); ++x) {
        for (Eigen::Index y = 0; y < W.cols(); ++y)
            out(x, y) = H(x, y) * (U(x, y) * (q - model.f.value(u(x, y))) + 0.5 * (I[x] + I[y]));
    }
    return out;
}

CltFunctionals clt_functionals(const GraphonTrajectory &traj, const GraphDynModel &model, int t,
                               const Matrix &U)
{
    CltFunctionals out;
    const Matrix &W = traj.W.at(static_cast<std::size_t>(t));
    const Matrix &s = traj.s.at(static_cast<std::size_t>(t));
    out.Lambda = triangle_kernel(W);
    out.JU = graphon_apply_J(traj, model, t, U);
    const double q = model.q_at(t);
    const Matrix u = attachment_args(W);
    double sum = 0.0;
    for (Eigen::Index x = 0; x < W.rows(); ++x) {
        for (Eigen::Index y = 0; y < W.cols(); ++y) {
            const double w = model.f.value(u(x, y)), U2 = U(x, y) * U(x, y);
            sum += U2 * (q * (1.0 - q) * W(x, y) +
                         traj.host(x, y) * w * (1.0 - w) * (1.0 - W(x, y)) + (q - w) * (q - w) * s(x, y));
        }
    }
    out.sigma2_next = sum / traj.host.sum();
    return out;
}

double graphon_variance(const GraphonTrajectory &traj, const GraphDynModel &model, int t,
                        const Matrix &U, NoiseModel noise)
{
    if (t < 0 || static_cast<std::size_t>(t) >= traj.W.size())
        throw DomainError("time index outside the graphon trajectory");
    double total = 0.0;
    Matrix cur = U;
    for (int r = t; r >= 1; --r) {
        total += graphon_sigma2(traj, r, cur, noise);
        if (r > 1)
            cur = graphon_apply_J(traj, model, r - 1, cur);
    }
    return total;
}

// ---------------------------------------------------------------------------

double cut_norm_exact(const Matrix &M)
{
    const auto v = static_cast<std::size_t>(M.rows());
    if (M.cols() != M.rows())
        throw DomainError("cut norm needs a square kernel");
    if (v > kCutNormExactCap)
        throw TooLarge("exact cut norm needs v <= 16");
    // Gray-code walk over row subsets; column sums updated one row at a time
    Vector c = Vector::Zero(M.cols());
    std::vector<bool> in(v, false);
    double best = 0.0;
    const std::uint64_t count = std::uint64_t{1} << v;
    for (std::uint64_t k = 1; k < count; ++k) {
        const auto bit = static_cast<std::size_t>(std::countr_zero(k));
        in[bit] = !in[bit];
        if (in[bit])
            c += M.row(static_cast<Eigen::Index>(bit)).transpose();
        else
            c -= M.row(static_cast<Eigen::Index>(bit)).transpose();
        double pos = 0.0, neg = 0.0;
        for (Eigen::Index j = 0; j < c.size(); ++j)
            (c[j] > 0.0 ? pos : neg) += c[j];
        best = std::max({best, pos, -neg});
    }
    return best / static_cast<double>(v * v);
}

double cut_norm_bruteforce(const Matrix &M)
{
    const auto v = static_cast<std::size_t>(M.rows());
    if (M.cols() != M.rows())
        throw DomainError("cut norm needs a square kernel");
    if (v > 12)
        throw TooLarge("exhaustive cut norm needs v <= 12");
    const std::uint64_t count = std::uint64_t{1} << v;
    Vector c = Vector::Zero(M.cols());
    std::vector<bool> in(v, false);
    double best = 0.0;
    for (std::uint64_t k = 0; k < count; ++k) {
        if (k > 0) {
            const auto bit = static_cast<std::size_t>(std::countr_zero(k));
            in[bit] = !in[bit];
            c += (in[bit] ? 1.0 : -1.0) * M.row(static_cast<Eigen::Index>(bit)).transpose();
        }
        std::vector<bool> col(v, false);
        double s = 0.0;
        for (std::uint64_t m = 1; m < count; ++m) {
            const auto bit = static_cast<std::size_t>(std::countr_zero(m));
            col[bit] = !col[bit];
            s += col[bit] ? c[static_cast<Eigen::Index>(bit)] : -c[static_cast<Eigen::Index>(bit)];
            best = std::max(best, std::abs(s));
        }
    }
    return best / static_cast<double>(v * v);
}

double cut_norm_heuristic(const Matrix &M, std::size_t restarts, std::uint64_t seed)
{
    const Eigen::Index v = M.rows();
    if (M.cols() != v)
        throw DomainError("cut norm needs a square kernel");
    double best = 0.0;
    for (std::size_t r = 0; r < restarts; ++r) {
        const CounterRng rng(seed, r, Stream::auxiliary);
        for (double sign : {1.0, -1.0}) {
            Vector u(v);
            for (Eigen::Index i = 0; i < v; ++i)
                u[i] = rng.uniform(sign > 0 ? 0 : 1, static_cast<std::uint64_t>(i)) < 0.5 ? 1.0 : 0.0;
            double value = -1.0;
            for (int sweep = 0; sweep < 1000; ++sweep) {
                const Vector c = sign * (M.transpose() * u);
                const Vector w = (c.array() > 0.0).cast<double>().matrix();
                const Vector rsum = sign * (M * w);
                u = (rsum.array() > 0.0).cast<double>().matrix();
                const double next = rsum.cwiseMax(0.0).sum();
                if (next <= value + 1e-15)
                    break;
                value = next;
            }
            best = std::max(best, value);
        }
    }
    return best / static_cast<double>(v * v);
}

CutNorm cut_norm(const Matrix &M, bool heuristic, std::uint64_t seed)
{
    if (static_cast<std::size_t>(M.rows()) <= kCutNormExactCap)
        return {cut_norm_exact(M), true, "exact-enumeration"};
    if (!heuristic)
        throw TooLarge("exact cut norm needs v <= 16; pass the heuristic flag for a lower bound");
    return {cut_norm_heuristic(M, 200, seed), false, "local-search-lower-bound"};
}

double triangle_density(const Matrix &M)
{
    if (M.rows() != M.cols())
        throw DomainError("triangle density needs a square kernel");
    const double v = static_cast<double>(M.rows());
    return (M * M).cwiseProduct(M).sum() / (v * v * v);
}

namespace {

double hom_sum(std::size_t depth, std::size_t k, const std::vector<std::vector<int>> &back,
               std::vector<Eigen::Index> &phi, const Matrix &M, double partial)
{
    if (depth == k)
        return partial;
    double sum = 0.0;
    for (Eigen::Index a = 0; a < M.rows(); ++a) {
        double p = partial;
        for (int b : back[depth])
            p *= M(a, phi[static_cast<std::size_t>(b)]);
        if (p == 0.0)
            continue;
        phi[depth] = a;
        sum += hom_sum(depth + 1, k, back, phi, M, p);
    }
    return sum;
}

} // namespace

double homomorphism_density(std::size_t k, const std::vector<std::pair<int, int>> &F, const Matrix &M)
{
    if (k == 0 || k > 5)
        throw TooLarge("homomorphism densities are limited to graphs on 1..5 vertices");
    if (M.rows() != M.cols())
        throw DomainError("homomorphism density needs a square kernel");
    // each edge is charged to its later endpoint in the enumeration order
    std::vector<std::vector<int>> back(k);
    for (const auto &[a, b] : F) {
        if (a == b || a < 0 || b < 0 || static_cast<std::size_t>(std::max(a, b)) >= k)
            throw DomainError("F must be a simple graph on vertices 0..k-1");
        back[static_cast<std::size_t>(std::max(a, b))].push_back(std::min(a, b));
    }
    std::vector<Eigen::Index> phi(k, 0);
    const double total = hom_sum(0, k, back, phi, M, 1.0);
    return total / std::pow(static_cast<double>(M.rows()), static_cast<double>(k));
}

} // namespace occlab::models
