#include <doctest.h>

#include "occlab/bounds.hpp"
#include "occlab/errors.hpp"

#include <cmath>

using namespace occlab;

namespace {

CoefficientSequence flat(int len, double alpha, double beta, double Gamma, double gamma, double delta)
{
    return CoefficientSequence(static_cast<std::size_t>(len),
                               CoefficientSet::make(alpha, beta, Gamma, gamma, delta, Provenance::analytic));
}

} // namespace

TEST_CASE("matrix qr norm")
{
    const Matrix ones = Matrix::Ones(2, 2);
    CHECK(matrix_qr_norm(ones, 2, 2) == doctest::Approx(2.0));
    CHECK(matrix_qr_norm(ones, INFINITY, 1) == doctest::Approx(2.0));
    CHECK_THROWS_AS(matrix_qr_norm(ones, 0.5, 1), DomainError);

    Matrix A(3, 3);
    A << 0.3, -1.2, 0.5, 2.0, 0.1, -0.7, 0.0, 0.4, 1.1;
    CHECK(matrix_qr_norm(A, 2, 1) <= std::sqrt(3.0) * A.norm() + 1e-12);
    CHECK(matrix_qr_norm(A, 1, 2) <= std::sqrt(3.0) * A.norm() + 1e-12);
    for (double q : {1.0, 1.5, 2.0, 3.0}) {
        const double entrywise = std::pow(A.array().abs().pow(q).sum(), 1.0 / q);
        CHECK(matrix_qr_norm(A, q, q) == doctest::Approx(entrywise));
    }
    // reversed cases never exceed the defined norm (Minkowski)
    CHECK(matrix_qr_norm(A.transpose(), 1, 2) >= 0.0);
}

TEST_CASE("moment bound closed forms")
{
    const auto zero = flat(6, 0, 0, 0, 0, 0);
    CHECK(jbar_moment_bound(zero, 1.0, 5, 100).value == doctest::Approx(4.0 * 5 / 100.0));
    CHECK(jbar_moment_bound(zero, 3.0, 2, 10).value == doctest::Approx(4.0 * 3 * 2 / 10.0));
    CHECK(std::isinf(jbar_moment_bound(zero, INFINITY, 2, 10).value));
    const auto c = flat(6, 0.2, 0.1, 0.0, 0.05, 0.0);
    double prev = 0.0;
    for (double q : {1.0, 1.5, 2.0, 4.0}) {
        const double v = jbar_moment_bound(c, q, 4, 50).value;
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("functional error bound")
{
    const auto zero = flat(2, 0, 0, 0, 0, 0);
    FunctionalNorms norms{0.3, 0.7, 0.0};
    const double expect = 6.0 * std::sqrt(M_PI) * 0.3 + std::sqrt(M_PI * 3.0) * 0.7;
    // n (1/n) collapses to one for t = 1
    CHECK(lqr_error_bound(norms, zero, 1.0, 2.0, 1, 40).value ==
          doctest::Approx(6.0 * std::sqrt(M_PI) * std::pow(2.0, 1.5) * 0.3 + std::sqrt(M_PI * 3.0) * 0.7));
    CHECK(lqr_error_bound(norms, zero, 2.0, 1.0, 1, 40).value == doctest::Approx(expect));

    // mean functional: ||Df||_1 = 1/n, ||Df||_{2,q} = n^{-1/2}
    const std::size_t n = 400;
    const Matrix Df = Matrix::Constant(1, n, 1.0 / n);
    const auto fn = functional_norms(Df, Matrix::Zero(1, n), 1.0);
    CHECK(fn.Df_1 == doctest::Approx(1.0 / n));
    CHECK(fn.Df_2q == doctest::Approx(1.0 / std::sqrt(double(n))));
    CHECK(fn.D2f_1q == 0.0);

    // monotone in coefficients
    const auto lo = flat(4, 0.1, 0.1, 0, 0, 0), hi = flat(4, 0.2, 0.1, 0, 0, 0);
    CHECK(lqr_error_bound(fn, lo, 1, 1, 3, n).value < lqr_error_bound(fn, hi, 1, 1, 3, n).value);
}

TEST_CASE("concentration bound")
{
    const auto zero = flat(4, 0, 0, 0, 0, 0);
    const auto rep = concentration_bound(zero, 1.0, 0.0, 3, 100, 2.0);
    CHECK(rep.vacuous);
    CHECK(rep.value == 1.0);
    CHECK(rep.inputs.at("unclamped") >= 3.0);
    CHECK_THROWS_AS(concentration_bound(zero, 1.0, 0.0, 3, 100, 1.0), DomainError);
    // t = 0: only the exponential term remains and equals one
    CHECK(concentration_bound(zero, 1.0, 0.0, 0, 100, 5.0).value == doctest::Approx(1.0));
}

TEST_CASE("rademacher complexity")
{
    std::vector<Vector> single{Vector::LinSpaced(8, -1, 1)};
    CHECK(rademacher_exact(single) == doctest::Approx(0.0).epsilon(1e-15));
    const auto mc0 = rademacher_mc(single, 4000, 2);
    CHECK(std::abs(mc0.value) < 4 * mc0.standard_error + 1e-12);

    const std::size_t n = 10;
    std::vector<Vector> pm{Vector::Ones(n), -Vector::Ones(n)};
    // exact E|n^-1 sum sigma| by enumeration over the binomial
    double expect = 0.0;
    double binom = 1.0;
    for (std::size_t k = 0; k <= n; ++k) {
        if (k > 0)
            binom = binom * double(n - k + 1) / double(k);
        expect += binom * std::abs(2.0 * double(k) - double(n));
    }
    expect /= std::pow(2.0, double(n)) * double(n);
    CHECK(rademacher_exact(pm) == doctest::Approx(expect));
    const auto mc = rademacher_mc(pm, 20000, 5);
    CHECK(std::abs(mc.value - expect) < 4 * mc.standard_error);
    CHECK(mc.value <= massart_bound(1.0, 2, n));
}

TEST_CASE("linearization bound")
{
    const auto c = flat(3, 0.1, 0.05, 0, 0, 0);
    CHECK(linearization_error_bound({0.0, 0.0}, c, 2, 100).value == 0.0);
    const double v = linearization_error_bound({1e-4, 0.0}, c, 2, 100).value;
    const double sum = (0.01 + 100 * 0.0025) * 2 * std::exp(16 * 0.1) + (0.01 + 100 * 0.0025) * 2;
    CHECK(v == doctest::Approx(std::sqrt(1 + std::log(100.0)) * (1 + sum) * 100 * 1e-4));
}

TEST_CASE("clt bound")
{
    auto rule = make_constant_rule(Vector::Constant(5, 0.4));
    GaussianApprox g(*rule, Vector::Constant(5, 0.5), 2);
    const auto zero = flat(3, 0, 0, 0, 0, 0);
    const auto rep = clt_rate_bound(zero, Vector::Ones(5), 1.0, g, 1);
    CHECK(rep.value == 0.0);
    CHECK_FALSE(rep.caveats.empty());

    // t = 2: kappa_1 = 1, D = 0 so only s = 1 contributes
    const auto r2 = clt_rate_bound(zero, Vector::Ones(5), 1.0, g, 2);
    const double sig = std::sqrt(0.24);
    CHECK(r2.value == doctest::Approx(std::sqrt((1 + std::log(5.0)) / 5.0) / std::pow(sig, 2.0)));
    const auto rinf = clt_rate_bound(zero, Vector::Ones(5), INFINITY, g, 2);
    CHECK(rinf.value == doctest::Approx(std::sqrt((1 + std::log(5.0)) / 5.0) / std::pow(sig, 4.0)));

    auto dead = make_constant_rule(Vector::Ones(5));
    GaussianApprox gd(*dead, Vector::Constant(5, 0.5), 2);
    CHECK_THROWS_AS(clt_rate_bound(zero, Vector::Ones(5), 1.0, gd, 2), DegenerateSigma);
}
