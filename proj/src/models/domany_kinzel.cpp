#include "occlab/models/domany_kinzel.hpp"

#include "occlab/errors.hpp"

#include <algorithm>
#include <cmath>

namespace occlab::models {

void DomanyKinzel::validate() const
{
    if (n < 3)
        throw DomainError("Domany-Kinzel torus needs n >= 3");
    if (!(q1 >= 0.0 && q1 <= q2 && q2 <= 1.0))
        throw DomainError("Domany-Kinzel update needs 0 <= q1 <= q2 <= 1");
    if (!(p0 >= 0.0 && p0 <= 1.0))
        throw DomainError("initial mean must lie in [0,1]");
}

namespace {

class DkRule : public OccupancyRule
{
public:
    explicit DkRule(DomanyKinzel m) : m_(m) { m_.validate(); }

    std::size_t size() const override { return m_.n; }
    std::string name() const override { return "domany-kinzel"; }
    bool has_split() const override { return true; }

    void evaluate(const Vector &x, int t, Vector &out) const override
    {
        Vector S, C;
        split(x, t, S, C);
        out = x.cwiseProduct(S) + (Vector::Ones(x.size()) - x).cwiseProduct(C);
    }

    void split(const Vector &x, int, Vector &S, Vector &C) const override
    {
        const auto N = static_cast<Eigen::Index>(m_.n);
        if (x.size() != N)
            throw DomainError("state length does not match the rule size");
        S.resize(N);
        C.resize(N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const double right = x[(i + 1) % N];
            S[i] = (m_.q2 - m_.q1) * right;
            C[i] = m_.q1 * right;
        }
    }

    std::optional<Matrix> analytic_jacobian(const Vector &x, int) const override
    {
        const auto N = static_cast<Eigen::Index>(m_.n);
        Matrix J = Matrix::Zero(N, N);
        for (Eigen::Index i = 0; i < N; ++i) {
            const Eigen::Index k = (i + 1) % N;
            J(i, i) = (m_.q2 - 2.0 * m_.q1) * x[k];
            J(i, k) = (m_.q2 - m_.q1) * x[i] + m_.q1 * (1.0 - x[i]);
        }
        return J;
    }

    std::optional<CoefficientSet> analytic_coefficients(int) const override
    {
        const double a = std::max(m_.q2 - m_.q1, m_.q1);
        return CoefficientSet::make(a, a, std::abs(m_.q2 - 2.0 * m_.q1), 0.0, 0.0,
                                    Provenance::analytic);
    }

private:
    DomanyKinzel m_;
};

double hbar_root_n(const DomanyKinzel &m, const Vector &h)
{
    m.validate();
    if (static_cast<std::size_t>(h.size()) != m.n)
        throw DomainError("test vector length does not match n");
    return std::sqrt(static_cast<double>(m.n)) * h.mean();
}

} // namespace

RulePtr dk_rule(const DomanyKinzel &model)
{
    return std::make_shared<DkRule>(model);
}

RulePtr dk_iid_rule(const DomanyKinzel &model)
{
    return make_iid_start_rule(dk_rule(model),
                               Vector::Constant(static_cast<Eigen::Index>(model.n), model.p0));
}

double dk_exact_mean_zeta2(const DomanyKinzel &m, const Vector &h)
{
    const double d = m.q2 - 2.0 * m.q1;
    return hbar_root_n(m, h) * d * d * m.p0 * m.p0 * (1.0 - m.p0) *
           (m.q1 + m.q2 - 2.0 * m.p0 * m.q1);
}

double dk_derived_mean_zeta2(const DomanyKinzel &m, const Vector &h)
{
    const double d = m.q2 - 2.0 * m.q1;
    return hbar_root_n(m, h) * d * d * m.p0 * m.p0 * (1.0 - m.p0) *
           (m.q1 + m.p0 * m.q2 - 2.0 * m.p0 * m.q1);
}

} // namespace occlab::models
