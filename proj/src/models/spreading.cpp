#include "occlab/models/spreading.hpp"

#include "occlab/deterministic.hpp"
#include "occlab/errors.hpp"

#include <cmath>

namespace occlab::models {

SpreadingModel SpreadingModel::dense(Matrix R, double mu, bool reinfection)
{
    SpreadingModel m;
    m.n = static_cast<std::size_t>(R.rows());
    m.R = std::move(R);
    m.mu = mu;
    m.reinfection = reinfection;
    m.validate();
    return m;
}

SpreadingModel SpreadingModel::mean_field(std::size_t n, double rbar, double mu, bool reinfection)
{
    if (n < 2)
        throw DomainError("mean-field spreading needs n >= 2");
    SpreadingModel m;
    m.n = n;
    m.uniform_r = rbar / static_cast<double>(n);
    m.mu = mu;
    m.reinfection = reinfection;
    m.validate();
    return m;
}

SpreadingModel SpreadingModel::weighted_graph(const Matrix &W, const Vector &lambda, double mu,
                                              bool reinfection, std::optional<double> kappa)
{
    const Eigen::Index n = W.rows();
    if (W.cols() != n || lambda.size() != n)
        throw DomainError("weight matrix and contact rates must have matching sizes");
    if ((W.array() < 0.0).any() || (lambda.array() < 0.0).any())
        throw DomainError("weights and contact rates must be nonnegative");
    Matrix base = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            total += W(i, j);
        if (total <= 0.0)
            continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i)
                base(i, j) = 1.0 - std::pow(1.0 - W(i, j) / total, lambda[i]);
        }
    }
    const double top = base.maxCoeff();
    double k = kappa.value_or(top > 0.0 ? 0.9 / top : 0.0);
    if (k < 0.0 || k * top >= 1.0)
        throw DomainError("proportionality constant makes some r_ij leave [0,1)");
    return dense(k * base, mu, reinfection);
}

double SpreadingModel::r(std::size_t i, std::size_t j) const
{
    if (i == j)
        return 0.0;
    if (uniform_r)
        return *uniform_r;
    return R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

Matrix SpreadingModel::reaction_matrix() const
{
    if (!uniform_r)
        return R;
    const auto N = static_cast<Eigen::Index>(n);
    Matrix out = Matrix::Constant(N, N, *uniform_r);
    out.diagonal().setZero();
    return out;
}

void SpreadingModel::validate() const
{
    if (n == 0)
        throw DomainError("spreading model needs at least one node");
    if (!(mu >= 0.0 && mu <= 1.0))
        throw DomainError("recovery probability must lie in [0,1]");
    if (uniform_r) {
        if (!(*uniform_r >= 0.0 && *uniform_r < 1.0))
            throw DomainError("reaction probabilities must lie in [0,1)");
        return;
    }
    if (R.rows() != R.cols() || static_cast<std::size_t>(R.rows()) != n)
        throw DomainError("reaction matrix must be square");
    for (Eigen::Index i = 0; i < R.rows(); ++i) {
        if (R(i, i) != 0.0)
            throw DomainError("reaction matrix must have a zero diagonal");
        for (Eigen::Index j = 0; j < R.cols(); ++j) {
            if (!(R(i, j) >= 0.0 && R(i, j) < 1.0))
                throw DomainError("reaction probabilities must lie in [0,1)");
        }
    }
}

namespace {

class SpreadingRule : public OccupancyRule
{
public:
    SpreadingRule(SpreadingModel m, SpreadingForm form) : m_(std::move(m)), form_(form)
    {
        m_.validate();
        if (form_ == SpreadingForm::exponential) {
            if (m_.uniform_r)
                ell_uniform_ = -std::log1p(-*m_.uniform_r);
            else
                L_ = (-(-m_.R.array()).log1p()).matrix();
        }
    }

    std::size_t size() const override { return m_.n; }
    std::string name() const override
    {
        return form_ == SpreadingForm::product ? "spreading" : "spreading-exp";
    }
    bool has_split() const override { return true; }

    void evaluate(const Vector &x, int t, Vector &out) const override
    {
        Vector S, C;
        split(x, t, S, C);
        out = x.cwiseProduct(S) + (Vector::Ones(x.size()) - x).cwiseProduct(C);
    }

    void split(const Vector &x, int, Vector &S, Vector &C) const override
    {
        // E_i = prod_{j != i}(1 - r_ij x_j) or exp(-sum_j l_ij x_j)
        const Vector E = escape(x);
        C = Vector::Ones(E.size()) - E;
        if (m_.reinfection)
            S = Vector::Ones(E.size()) - m_.mu * E;
        else
            S = Vector::Constant(E.size(), 1.0 - m_.mu);
    }

    std::optional<Matrix> analytic_jacobian(const Vector &x, int) const override
    {
        const auto N = static_cast<Eigen::Index>(m_.n);
        const Vector E = escape(x);
        Matrix J(N, N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const double a = m_.reinfection ? m_.mu * x[i] + 1.0 - x[i] : 1.0 - x[i];
            for (Eigen::Index j = 0; j < N; ++j) {
                if (i == j) {
                    const double S = m_.reinfection ? 1.0 - m_.mu * E[i] : 1.0 - m_.mu;
                    J(i, i) = S - (1.0 - E[i]);
                    continue;
                }
                const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
                if (form_ == SpreadingForm::product) {
                    const double r = m_.r(ii, jj);
                    // prod over k != i, j; 1 - r x_j > 0 since r < 1
                    J(i, j) = a * r * E[i] / (1.0 - r * x[j]);
                } else {
                    J(i, j) = a * ell(ii, jj) * E[i];
                }
            }
        }
        return J;
    }

    std::optional<CoefficientSet> analytic_coefficients(int) const override
    {
        return spreading_coefficients(m_, form_);
    }

private:
    double ell(std::size_t i, std::size_t j) const
    {
        if (i == j)
            return 0.0;
        return m_.uniform_r ? ell_uniform_
                            : L_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    Vector escape(const Vector &x) const
    {
        const auto N = static_cast<Eigen::Index>(m_.n);
        if (x.size() != N)
            throw DomainError("state length does not match the rule size");
        Vector E(N);
        if (form_ == SpreadingForm::exponential) {
            if (m_.uniform_r) {
                const double total = x.sum();
                for (Eigen::Index i = 0; i < N; ++i)
                    E[i] = std::exp(-ell_uniform_ * (total - x[i]));
            } else {
                E = (-(L_ * x).array()).exp().matrix();
            }
            return E;
        }
        if (m_.uniform_r) {
            // O(n): log-sum of all factors, then divide out the own factor
            const double r = *m_.uniform_r;
            double logsum = 0.0;
            for (Eigen::Index j = 0; j < N; ++j)
                logsum += std::log1p(-r * x[j]);
            for (Eigen::Index i = 0; i < N; ++i)
                E[i] = std::exp(logsum - std::log1p(-r * x[i]));
            return E;
        }
        for (Eigen::Index i = 0; i < N; ++i) {
            double prod = 1.0;
            for (Eigen::Index j = 0; j < N; ++j) {
                if (j != i)
                    prod *= 1.0 - m_.R(i, j) * x[j];
            }
            E[i] = prod;
        }
        return E;
    }

    SpreadingModel m_;
    SpreadingForm form_;
    Matrix L_;
    double ell_uniform_ = 0.0;
};

} // namespace

RulePtr spreading_rule(const SpreadingModel &model, SpreadingForm form)
{
    return std::make_shared<SpreadingRule>(model, form);
}

CoefficientSet spreading_coefficients(const SpreadingModel &m, SpreadingForm form)
{
    m.validate();
    const double n = static_cast<double>(m.n);
    if (form == SpreadingForm::product) {
        if (m.uniform_r) {
            const double r = *m.uniform_r;
            const double Gamma = std::max((n - 2.0) * r * r + 2.0 * r, (n - 1.0) * r * r);
            return CoefficientSet::make((n - 1.0) * r, r * std::sqrt(n - 1.0), Gamma, 0.0, 0.0,
                                        Provenance::analytic);
        }
        const Matrix &R = m.R;
        const double alpha = R.colwise().sum().maxCoeff();
        const double beta = R.norm() / std::sqrt(n);
        const Matrix G = R.transpose() * R + R + R.transpose();
        return CoefficientSet::make(alpha, beta, G.maxCoeff(), 0.0, 0.0, Provenance::analytic);
    }

    // exponential form; c is the weight of the own-node cross term
    const double c = m.reinfection ? 1.0 - m.mu : 1.0;
    if (m.uniform_r) {
        const double l = -std::log1p(-*m.uniform_r);
        const double Gamma = std::max((n - 2.0) * l * l + 2.0 * c * l, (n - 1.0) * l * l);
        const double delta = (n - 1.0) * l * (n - 1.0) * l * l + c * (n - 1.0) * l * l;
        return CoefficientSet::make((n - 1.0) * l, l * std::sqrt(n - 1.0), Gamma,
                                    (n - 1.0) * l * l, delta, Provenance::analytic);
    }
    const Matrix L = (-(-m.R.array()).log1p()).matrix();
    const double alpha = L.colwise().sum().maxCoeff();
    const double sq = L.squaredNorm();
    const Matrix LtL = L.transpose() * L;
    double Gamma = 0.0;
    for (Eigen::Index j = 0; j < L.rows(); ++j) {
        for (Eigen::Index k = 0; k < L.rows(); ++k) {
            const double g = j == k ? LtL(j, j) : LtL(j, k) + c * (L(j, k) + L(k, j));
            Gamma = std::max(Gamma, g);
        }
    }
    const Vector rowsq = L.array().square().rowwise().sum().matrix();
    const Vector through = L.transpose() * rowsq; // sum_i l_ij rowsq_i
    const double delta = (through + c * rowsq).maxCoeff();
    return CoefficientSet::make(alpha, std::sqrt(sq / n), Gamma, sq / n, delta,
                                Provenance::analytic);
}

ThresholdReport epidemic_threshold(const SpreadingModel &m, int horizon)
{
    m.validate();
    ThresholdReport rep;
    rep.mu = m.mu;
    rep.horizon = horizon;
    if (m.uniform_r)
        rep.r_R = (static_cast<double>(m.n) - 1.0) * *m.uniform_r; // Perron root of r(11^T - I)
    else
        rep.r_R = spectral_radius(m.R);
    rep.extinction = rep.r_R <= m.mu;
    rep.verdict = rep.extinction ? "extinction" : "endemic-possible";

    const auto rule = spreading_rule(m);
    const auto N = static_cast<Eigen::Index>(m.n);
    const auto traj = det_trajectory(*rule, Vector::Ones(N), horizon, false);
    rep.sup_at_horizon = traj.p.back().cwiseAbs().maxCoeff();
    if (!rep.extinction) {
        const auto eq = find_equilibrium(*rule, traj.p.back(), 1e-14, 1000000);
        if (eq.converged && eq.p.minCoeff() > 0.0) {
            rep.p_inf = eq.p;
            rep.residual = eq.residual;
            if (m.n <= 4000)
                rep.r_J_inf = spectral_radius_report(jacobian(*rule, eq.p, 0)).value;
            else
                rep.r_J_inf = NAN;
        }
    }
    return rep;
}

} // namespace occlab::models
