#include <doctest.h>

#include "occlab/errors.hpp"
#include "occlab/gaussian.hpp"
#include "occlab/models/spreading.hpp"

#include <cmath>

using namespace occlab;

namespace {

RulePtr smooth_rule(std::size_t n)
{
    // P_i = 0.1 + 0.3 x_i + 0.4 x_{i+1} x_{i+2}
    FunctionRuleSpec spec;
    spec.n = n;
    spec.split = [n](const Vector &x, int, Vector &S, Vector &C) {
        for (std::size_t i = 0; i < n; ++i) {
            const double y = x[static_cast<Eigen::Index>((i + 1) % n)] * x[static_cast<Eigen::Index>((i + 2) % n)];
            C[static_cast<Eigen::Index>(i)] = 0.1 + 0.4 * y;
            S[static_cast<Eigen::Index>(i)] = 0.4 + 0.4 * y;
        }
    };
    return std::make_shared<FunctionRule>(spec);
}

} // namespace

TEST_CASE("sigma form")
{
    const Vector p = Vector::Constant(4, 0.5);
    CHECK(sigma_form(p, Vector::Ones(4), Vector::Ones(4)) == doctest::Approx(0.25));
    Vector b(3);
    b << 0, 1, 1;
    CHECK(sigma_form(b, Vector::Ones(3), Vector::Ones(3)) == 0.0);
    Vector q(3), h(3), g(3);
    q << 0.2, 0.7, 0.4;
    h << 1.0, -2.0, 0.5;
    g << 0.3, 0.1, -1.0;
    const double polar = (sigma_form(q, h + g, h + g) - sigma_form(q, h - g, h - g)) / 4.0;
    CHECK(std::abs(sigma_form(q, h, g) - polar) < 1e-12);
}

TEST_CASE("projected variance agrees with the covariance recursion")
{
    const std::size_t n = 6;
    auto rule = smooth_rule(n);
    Vector p0(6);
    p0 << 0.1, 0.9, 0.4, 0.5, 0.3, 0.8;
    GaussianApprox g(*rule, p0, 5, true);
    Vector h(6);
    h << 1, -1, 2, 0.5, 0, 1;
    CHECK(projected_variance(g, h, 0) == 0.0);
    for (int t = 1; t <= 5; ++t) {
        const double direct = h.dot(g.Sigma(t) * h) / static_cast<double>(n);
        CHECK(std::abs(projected_variance(g, h, t) - direct) < 1e-10);
        CHECK(std::abs(cross_covariance(g, t, t, h, h) - direct) < 1e-10);
    }
    // propagator consistency
    const Matrix lhs = g.propagator(1, 3) * g.propagator(3, 5);
    CHECK((lhs - g.propagator(1, 5)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.propagate(1, 5, h) - g.propagator(1, 5) * h).cwiseAbs().maxCoeff() < 1e-12);
    // symmetry of cross-covariance
    Vector k = Vector::LinSpaced(6, -1, 1);
    CHECK(std::abs(cross_covariance(g, 2, 4, h, k) - cross_covariance(g, 4, 2, k, h)) < 1e-14);
    CHECK(cross_covariance(g, 0, 3, h, k) == 0.0);
}

TEST_CASE("memoryless rule")
{
    auto rule = make_constant_rule(Vector::Constant(3, 0.3));
    GaussianApprox g(*rule, Vector::Constant(3, 0.5), 2);
    const Vector h = Vector::Ones(3);
    CHECK(projected_variance(g, h, 2) == doctest::Approx(0.21));
}

TEST_CASE("gaussian paths reproduce the covariance")
{
    const std::size_t n = 4;
    auto rule = smooth_rule(n);
    Vector p0(4);
    p0 << 0.2, 0.6, 0.5, 0.9;
    GaussianApprox g(*rule, p0, 3, true);
    const std::size_t R = 60000;
    const auto ens = simulate_gaussian(g, R, 17);
    const Matrix &S = g.Sigma(3);
    for (Eigen::Index a = 0; a < 4; ++a) {
        for (Eigen::Index b = 0; b <= a; ++b) {
            double m = 0.0, m2 = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                const double *z = ens.path(r, 3);
                const double v = (z[a] - g.p(3)[a]) * (z[b] - g.p(3)[b]);
                m += v;
                m2 += v * v;
            }
            m /= R;
            const double se = std::sqrt((m2 / R - m * m) / R);
            CHECK(std::abs(m - S(a, b)) < 4.5 * se);
        }
    }
    // with zero noise paths are deterministic
    Vector ones = Vector::Ones(4);
    GaussianApprox flat(*make_constant_rule(ones), ones, 2);
    const auto e2 = simulate_gaussian(flat, 3, 1);
    CHECK(e2.path(2, 2)[0] == 1.0);
}

TEST_CASE("lyapunov")
{
    const Matrix Z = Matrix::Zero(3, 3);
    Vector v(3);
    v << 0.1, 0.2, 0.3;
    auto res = lyapunov_solve(Z, v);
    CHECK((res.Q - Matrix(v.asDiagonal())).cwiseAbs().maxCoeff() < 1e-15);

    const Matrix J = 0.5 * Matrix::Identity(4, 4);
    res = lyapunov_solve(J, Matrix(Matrix::Identity(4, 4)));
    CHECK((res.Q - (4.0 / 3.0) * Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    const auto it = lyapunov_solve(J, Matrix(Matrix::Identity(4, 4)), LyapunovMethod::iterative);
    CHECK((it.Q - res.Q).cwiseAbs().maxCoeff() < 1e-12);

    CHECK(lyapunov_solve(J, Vector::Zero(4)).Q.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(lyapunov_solve(Matrix(Matrix::Identity(2, 2)), Vector::Ones(2)), Singular);
    CHECK_THROWS_AS(lyapunov_solve(Matrix(1.5 * Matrix::Identity(2, 2)), Vector::Ones(2),
                                   LyapunovMethod::iterative),
                    NotConverged);
}

TEST_CASE("noise models on mean-field spreading against the exact count chain")
{
    // Var(N_t)/n from the exact law of the infected count (n = 1000, rbar = mu = 0.5,
    // all infected at t = 0), computed by convolving the two binomial updates.
    const double exact[] = {0.25, 0.26716, 0.27497, 0.27956, 0.28259};
    // the printed recursion with V_t = p_t(1 - p_t), same aggregate map
    const double printed[] = {0.25, 0.28661, 0.30793, 0.32216, 0.33240};
    const auto rule = models::spreading_rule(models::SpreadingModel::mean_field(1000, 0.5, 0.5));
    const Vector ones = Vector::Ones(1000);
    const GaussianApprox marginal(*rule, ones, 5);
    const GaussianApprox conditional(*rule, ones, 5, false, NoiseModel::conditional);
    for (int t = 1; t <= 5; ++t) {
        CHECK(projected_variance(marginal, ones, t) == doctest::Approx(printed[t - 1]).epsilon(2e-5));
        CHECK(projected_variance(conditional, ones, t) == doctest::Approx(exact[t - 1]).epsilon(5e-4));
    }
    // V differs by p(1-p)(S-C)^2 with everything at t-1
    const Vector &p1 = marginal.p(1);
    Vector S(1000), C(1000);
    rule->split(p1, 1, S, C);
    const Vector gap = marginal.V(2) - conditional.V(2);
    const Vector expect = p1.array() * (1.0 - p1.array()) * (S - C).array().square();
    CHECK((gap - expect).cwiseAbs().maxCoeff() < 1e-12);
    FunctionRuleSpec plain;
    plain.n = 3;
    plain.evaluate = [](const Vector &x, int, Vector &out) { out = 0.5 * x; };
    const FunctionRule no_split(plain);
    CHECK_THROWS_AS(GaussianApprox(no_split, Vector::Ones(3), 2, false, NoiseModel::conditional), SplitRequired);
}
