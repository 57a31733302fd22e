#include <doctest.h>

#include "occlab/deterministic.hpp"
#include "occlab/errors.hpp"
#include "occlab/simulator.hpp"

#include <cmath>

using namespace occlab;

TEST_CASE("trajectory of constant and linear rules")
{
    Vector c(2);
    c << 0.2, 0.6;
    const auto traj = det_trajectory(*make_constant_rule(c), Vector::Constant(2, 0.9), 3);
    CHECK(traj.p.size() == 4);
    CHECK((traj.p[3] - c).norm() < 1e-15);

    Matrix A(3, 3);
    A << 0.5, 0.25, 0.25, 0.1, 0.6, 0.3, 0.0, 0.2, 0.8;
    const Vector p0 = Vector::Constant(3, 1.0 / 3.0);
    const auto lin = det_trajectory(*make_linear_rule(A), p0, 6, true);
    Matrix At = Matrix::Identity(3, 3);
    for (int t = 0; t < 6; ++t)
        At = A * At;
    CHECK((lin.p[6] - At * p0).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(lin.jacobians.size() == 6);
}

TEST_CASE("linear rule mean matches exact law")
{
    Matrix A(3, 3);
    A << 0.3, 0.3, 0.2, 0.1, 0.5, 0.3, 0.4, 0.0, 0.4;
    auto rule = make_linear_rule(A);
    BitState x0 = {1, 0, 1};
    const auto law = exact_law(*rule, x0, 4);
    const auto traj = det_trajectory(*rule, to_vector(x0), 4);
    for (int t = 0; t <= 4; ++t)
        CHECK((marginal_means(law[static_cast<std::size_t>(t)], 3) - traj.p[static_cast<std::size_t>(t)])
                  .cwiseAbs()
                  .maxCoeff() < 1e-13);
}

TEST_CASE("equilibrium of a contraction")
{
    Matrix A = 0.5 * Matrix::Identity(4, 4);
    auto rule = make_linear_rule(A);
    const auto eq = find_equilibrium(*rule, Vector::Constant(4, 0.8));
    CHECK(eq.converged);
    CHECK(eq.p.cwiseAbs().maxCoeff() < 1e-11);
    CHECK(eq.residual <= 1e-11);

    const auto starts = random_starts(4, 5, 3);
    const auto ms = multi_start_equilibrium(*rule, starts, 1e-12, 1000000, 2);
    CHECK(ms.all_converged);
    CHECK(ms.max_disagreement < 1e-8);

    const auto slow = find_equilibrium(*rule, Vector::Constant(4, 0.8), 1e-12, 3);
    CHECK_FALSE(slow.converged);
}

TEST_CASE("spectral radius")
{
    CHECK(spectral_radius(Matrix::Identity(5, 5)) == doctest::Approx(1.0).epsilon(1e-10));
    Matrix U = Matrix::Zero(4, 4);
    U(0, 1) = 1.0;
    U(1, 2) = 2.0;
    U(2, 3) = 0.5;
    CHECK(spectral_radius(U) <= 1e-10);

    const int n = 100;
    const double rbar = 0.5;
    Matrix R = Matrix::Constant(n, n, rbar / n);
    R.diagonal().setZero();
    CHECK(spectral_radius(R) == doctest::Approx(rbar * (n - 1) / n).epsilon(1e-9));

    // cyclic permutation: periodic, radius 1
    Matrix P = Matrix::Zero(3, 3);
    P(0, 1) = P(1, 2) = P(2, 0) = 1.0;
    CHECK(spectral_radius(P) == doctest::Approx(1.0).epsilon(1e-9));

    // signed matrix: rotation scaled by 0.7
    Matrix S(2, 2);
    S << 0.0, -0.7, 0.7, 0.0;
    CHECK(spectral_radius(S) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("smith check on a positive linear rule")
{
    Matrix A(3, 3);
    A << 0.2, 0.1, 0.3, 0.1, 0.2, 0.2, 0.3, 0.3, 0.1;
    auto rule = make_linear_rule(A);
    const auto rep = smith_check(*rule, 50, 1);
    CHECK(rep.positivity);
    CHECK(rep.not_all_absorbing);
    CHECK(rep.r_J0 == doctest::Approx(spectral_radius(A)).epsilon(1e-9));
    // constant Jacobian is never strictly larger: the strict part fails
    CHECK_FALSE(rep.jacobian_monotonicity);
}
