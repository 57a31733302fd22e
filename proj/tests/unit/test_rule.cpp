#include <doctest.h>

#include "occlab/errors.hpp"
#include "occlab/rule.hpp"

#include <cmath>

using namespace occlab;

namespace {

// P_i = x_{i+1}^3 / 2 + x_i / 4 on a ring: S_i = x_{i+1}^3/2 + 1/4, C_i = x_{i+1}^3/2
RulePtr cubic_ring(std::size_t n)
{
    FunctionRuleSpec spec;
    spec.n = n;
    spec.name = "cubic";
    spec.split = [n](const Vector &x, int, Vector &S, Vector &C) {
        for (std::size_t i = 0; i < n; ++i) {
            const double y = x[static_cast<Eigen::Index>((i + 1) % n)];
            C[static_cast<Eigen::Index>(i)] = 0.5 * y * y * y;
            S[static_cast<Eigen::Index>(i)] = C[static_cast<Eigen::Index>(i)] + 0.25;
        }
    };
    return std::make_shared<FunctionRule>(spec);
}

} // namespace

TEST_CASE("constant rule")
{
    Vector c(3);
    c << 0.1, 0.5, 0.9;
    auto rule = make_constant_rule(c);
    const Vector x = Vector::Constant(3, 0.3);
    CHECK((evaluate_rule(*rule, x, 4) - c).norm() < 1e-15);
    CHECK(jacobian(*rule, x, 0).norm() == 0.0);
    const auto k = coefficients(*rule, 0, 16);
    CHECK(k.alpha == 0.0);
    CHECK(k.psi == 0.0);
}

TEST_CASE("domain and range errors")
{
    Vector c(2);
    c << 0.2, 0.3;
    auto rule = make_constant_rule(c);
    Vector bad(2);
    bad << 0.5, 1.2;
    CHECK_THROWS_AS(evaluate_rule(*rule, bad, 0), DomainError);
    CHECK_THROWS_AS(make_constant_rule(Vector::Constant(2, 1.5)), DomainError);
    Matrix A(2, 2);
    A << 0.8, 0.5, 0.1, 0.1;
    CHECK_THROWS_AS(make_linear_rule(A), DomainError);
}

TEST_CASE("linear rule Jacobian and coefficients")
{
    Matrix A(3, 3);
    A << 0.2, 0.3, 0.1, 0.0, 0.5, 0.4, 0.25, 0.25, 0.25;
    auto rule = make_linear_rule(A);
    const Vector x = Vector::Constant(3, 0.4);
    CHECK((jacobian(*rule, x, 0) - A).norm() < 1e-14);
    CHECK((finite_difference_jacobian(*rule, x, 0) - A).norm() < 1e-8);
    const auto k = coefficients(*rule, 0, 16);
    // alpha: max column sum of off-diagonal entries
    CHECK(k.alpha == doctest::Approx(0.55));
    const double off2 = 0.3 * 0.3 + 0.1 * 0.1 + 0.4 * 0.4 + 0.25 * 0.25 * 2;
    CHECK(k.beta == doctest::Approx(std::sqrt(off2 / 3.0)));
    CHECK(k.Gamma == 0.0);
    CHECK(k.gamma == 0.0);
}

TEST_CASE("kappa small cases")
{
    CoefficientSequence zero(4, CoefficientSet::make(0, 0, 0, 0, 0, Provenance::analytic));
    CHECK(kappa(zero, 0, 10) == 0.0);
    CHECK(kappa(zero, 1, 10) == doctest::Approx(1.0));
    // t = 2: two terms, each t * 1 = 2
    CHECK(kappa(zero, 2, 10) == doctest::Approx(4.0));

    CoefficientSequence c(3, CoefficientSet::make(0.1, 0.2, 0.05, 0.0, 0.0, Provenance::analytic));
    const double n = 16.0, rn = 4.0;
    const double lead = 1 + 0.1 + n * 0.05;
    const double term = 1 + 0.2 * rn * (1 + 0.2 * rn);
    // s = 0 window alpha_1; s = 1 empty window
    const double expect = lead * (term * 2 * std::exp(16 * 0.1) + term * 2);
    CHECK(kappa(c, 2, 16) == doctest::Approx(expect));
}

TEST_CASE("split validation and sampled coefficients")
{
    auto rule = cubic_ring(5);
    const auto diag = validate_split(*rule, 0, 200, 3);
    CHECK(diag.max_decomposition_error < 1e-12);
    CHECK(diag.max_self_curvature < 1e-6);

    // analytic: d_{i+1} P_i = 1.5 y^2 <= 1.5, d^2 = 3y <= 3, d^3 = 3
    const auto est = estimate_coefficients(*rule, 0, 400, 11);
    CHECK(est.provenance == Provenance::sampled);
    CHECK(est.alpha <= 1.5 + 1e-6);
    CHECK(est.alpha > 1.4);
    CHECK(est.Gamma <= 3.0 + 1e-4);
    CHECK(est.Gamma > 2.8);
    CHECK(est.delta <= 3.0 + 1e-2);
}

TEST_CASE("iid start rule")
{
    Matrix A = Matrix::Identity(2, 2) * 0.5;
    auto base = make_linear_rule(A);
    Vector p0(2);
    p0 << 0.3, 0.7;
    auto rule = make_iid_start_rule(base, p0);
    CHECK((evaluate_rule(*rule, Vector::Zero(2), 0) - p0).norm() < 1e-15);
    CHECK((evaluate_rule(*rule, Vector::Ones(2), 1) - Vector::Constant(2, 0.5)).norm() < 1e-15);
}
