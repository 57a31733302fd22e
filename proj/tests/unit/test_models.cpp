#include <doctest.h>

#include "occlab/deterministic.hpp"
#include "occlab/errors.hpp"
#include "occlab/gaussian.hpp"
#include "occlab/models/domany_kinzel.hpp"
#include "occlab/models/graph_dynamics.hpp"
#include "occlab/models/hanski.hpp"
#include "occlab/models/spreading.hpp"
#include "occlab/rng.hpp"
#include "occlab/simulator.hpp"

#include <cmath>

using namespace occlab;
using namespace occlab::models;

namespace {

Vector random_point(std::size_t n, std::uint64_t seed, std::uint64_t k)
{
    const CounterRng rng(seed, k, Stream::auxiliary);
    Vector x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        x[static_cast<Eigen::Index>(i)] = 0.05 + 0.9 * rng.uniform(0, i);
    return x;
}

Matrix random_reaction(std::size_t n, double top, std::uint64_t seed)
{
    const CounterRng rng(seed, 0, Stream::auxiliary);
    const auto N = static_cast<Eigen::Index>(n);
    Matrix R(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j)
            R(i, j) = i == j ? 0.0 : top * rng.uniform(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
    return R;
}

// max |analytic - central differences| over `points` interior points
double jacobian_gap(const OccupancyRule &rule, int points, std::uint64_t seed, int t = 0)
{
    double gap = 0.0;
    for (int k = 0; k < points; ++k) {
        const Vector x = random_point(rule.size(), seed, static_cast<std::uint64_t>(k));
        const Matrix A = *rule.analytic_jacobian(x, t);
        const Matrix F = finite_difference_jacobian(rule, x, t);
        gap = std::max(gap, (A - F).cwiseAbs().maxCoeff());
    }
    return gap;
}

void check_dominates(const OccupancyRule &rule, std::size_t budget)
{
    const auto exact = *rule.analytic_coefficients(0);
    const auto est = estimate_coefficients(rule, 0, budget, 7);
    const double slack = 1e-6;
    CHECK(est.alpha <= exact.alpha + slack);
    CHECK(est.beta <= exact.beta + slack);
    CHECK(est.Gamma <= exact.Gamma + slack);
    CHECK(est.gamma <= exact.gamma + slack);
    // third differences at step 1e-3 carry ~1e-7 roundoff per entry, summed over n^2 entries
    CHECK(est.delta <= exact.delta + 1e-4);
}

} // namespace

TEST_CASE("spreading small cases")
{
    Matrix R(2, 2);
    R << 0.0, 0.2, 0.2, 0.0;
    const auto m = SpreadingModel::dense(R, 0.5);
    const auto rule = spreading_rule(m);
    Vector S, C;
    rule->split(Vector::Ones(2), 0, S, C);
    CHECK(C[0] == doctest::Approx(0.2));
    CHECK(S[0] == doctest::Approx(0.5));
    const Vector zero = Vector::Zero(2);
    CHECK(evaluate_rule(*rule, zero, 0).cwiseAbs().maxCoeff() == 0.0);
    const Matrix J = *rule->analytic_jacobian(zero, 0);
    CHECK(J(0, 1) == doctest::Approx(0.2));
    CHECK(std::abs(J(0, 1) - finite_difference_jacobian(*rule, zero, 0)(0, 1)) < 1e-6);

    // r = 0: pure death
    const auto dead = spreading_rule(SpreadingModel::dense(Matrix::Zero(3, 3), 0.3));
    Vector x(3);
    x << 1.0, 0.4, 0.0;
    CHECK((evaluate_rule(*dead, x, 0) - 0.7 * x).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("spreading coefficients")
{
    const Matrix R = random_reaction(6, 0.3, 3);
    for (bool reinf : {false, true}) {
        const auto m = SpreadingModel::dense(R, 0.4, reinf);
        const auto k = spreading_coefficients(m);
        CHECK(k.alpha == doctest::Approx(R.colwise().sum().maxCoeff()));
        CHECK(k.psi == doctest::Approx(R.norm() / std::sqrt(6.0)));
        const Matrix I = Matrix::Identity(6, 6);
        CHECK(k.Gamma == doctest::Approx(((R + I).transpose() * (R + I) - I).maxCoeff()));
        CHECK(k.delta == 0.0);
        check_dominates(*spreading_rule(m), 400);
        check_dominates(*spreading_rule(m, SpreadingForm::exponential), 400);
    }
    // implicit mean field equals the dense matrix it stands for
    const auto mf = SpreadingModel::mean_field(7, 0.8, 0.5, true);
    const auto dense = SpreadingModel::dense(mf.reaction_matrix(), 0.5, true);
    for (auto form : {SpreadingForm::product, SpreadingForm::exponential}) {
        const auto a = spreading_coefficients(mf, form), b = spreading_coefficients(dense, form);
        CHECK(a.alpha == doctest::Approx(b.alpha));
        CHECK(a.beta == doctest::Approx(b.beta));
        CHECK(a.Gamma == doctest::Approx(b.Gamma));
        CHECK(a.gamma == doctest::Approx(b.gamma));
        CHECK(a.delta == doctest::Approx(b.delta));
        const Vector x = random_point(7, 11, 0);
        CHECK((evaluate_rule(*spreading_rule(mf, form), x, 0) -
               evaluate_rule(*spreading_rule(dense, form), x, 0))
                  .cwiseAbs()
                  .maxCoeff() < 1e-14);
    }
}

TEST_CASE("spreading Jacobians and the two extensions")
{
    const Matrix R = random_reaction(8, 0.4, 5);
    for (bool reinf : {false, true}) {
        const auto m = SpreadingModel::dense(R, 0.35, reinf);
        const auto prod = spreading_rule(m);
        const auto expo = spreading_rule(m, SpreadingForm::exponential);
        CHECK(jacobian_gap(*prod, 100, 1) < 1e-5);
        CHECK(jacobian_gap(*expo, 100, 2) < 1e-5);
        CHECK(jacobian_gap(*spreading_rule(SpreadingModel::mean_field(8, 0.7, 0.3, reinf)), 100, 3) < 1e-5);
        // identical on the vertices of the cube
        double gap = 0.0;
        for (std::uint32_t s = 0; s < 256; ++s) {
            Vector x(8);
            for (int i = 0; i < 8; ++i)
                x[i] = static_cast<double>(s >> i & 1u);
            gap = std::max(gap, (evaluate_rule(*prod, x, 0) - evaluate_rule(*expo, x, 0)).cwiseAbs().maxCoeff());
        }
        CHECK(gap < 1e-14);
    }
}

TEST_CASE("weighted-graph reaction matrix")
{
    Matrix W(3, 3);
    W << 0, 1, 3, 1, 0, 1, 2, 2, 0;
    Vector lambda(3);
    lambda << 2, 1, 3;
    const auto m = SpreadingModel::weighted_graph(W, lambda, 0.5);
    CHECK(m.R.maxCoeff() == doctest::Approx(0.9));
    const double base01 = 1.0 - std::pow(1.0 - 1.0 / 4.0, 2.0);
    const double base02 = 1.0 - std::pow(1.0 - 3.0 / 4.0, 2.0);
    CHECK(m.R(0, 1) / m.R(0, 2) == doctest::Approx(base01 / base02));
    CHECK(m.R(1, 1) == 0.0);
    CHECK_THROWS_AS(SpreadingModel::weighted_graph(W, lambda, 0.5, false, 5.0), DomainError);
}

TEST_CASE("epidemic threshold")
{
    const std::size_t n = 20;
    Matrix R = random_reaction(n, 1.0, 9);
    R /= spectral_radius(R);
    const double mu = 0.4;
    const auto low = epidemic_threshold(SpreadingModel::dense(0.5 * mu * R, mu));
    CHECK(low.extinction);
    CHECK(low.r_R == doctest::Approx(0.5 * mu));
    CHECK(low.sup_at_horizon < 1e-8);
    const auto high = epidemic_threshold(SpreadingModel::dense(2.0 * mu * R, mu));
    CHECK_FALSE(high.extinction);
    REQUIRE(high.p_inf.has_value());
    CHECK(high.p_inf->minCoeff() > 0.0);
    CHECK(high.r_J_inf < 1.0);
    CHECK(high.residual < 1e-10);
    const auto none = epidemic_threshold(SpreadingModel::dense(0.1 * R, 0.0));
    CHECK_FALSE(none.extinction);
}

TEST_CASE("Domany-Kinzel expectation")
{
    DomanyKinzel dk{12, 0.4, 0.7, 0.5};
    const Vector ones = Vector::Ones(12);
    // q2 = 2 q1 and p0 in {0,1} make both forms vanish
    CHECK(dk_exact_mean_zeta2({12, 0.3, 0.6, 0.5}, ones) == 0.0);
    CHECK(dk_derived_mean_zeta2({12, 0.2, 0.9, 1.0}, ones) == 0.0);
    CHECK(dk_exact_mean_zeta2({100, 0.4, 0.7, 0.5}, Vector::Ones(100)) == doctest::Approx(8.75e-3));
    CHECK(dk_derived_mean_zeta2({100, 0.4, 0.7, 0.5}, Vector::Ones(100)) == doctest::Approx(4.375e-3));

    const auto rule = dk_iid_rule(dk);
    const auto law = exact_law(*rule, BitState(12, 0), 3);
    const Vector mean = marginal_means(law[3], 12);
    const auto traj = det_trajectory(*rule, Vector::Zero(12), 3, false);
    const double zeta = (mean - traj.p[3]).sum() / std::sqrt(12.0);
    CHECK(std::abs(zeta - dk_derived_mean_zeta2(dk, ones)) < 1e-12);
    CHECK(std::abs(zeta - dk_exact_mean_zeta2(dk, ones)) > 1e-4);

    CHECK(jacobian_gap(*dk_rule(dk), 100, 4) < 1e-5);
    check_dominates(*dk_rule(dk), 300);
    CHECK_THROWS_AS(dk_rule({12, 0.7, 0.4, 0.5}), DomainError);
}

TEST_CASE("Hanski rule")
{
    auto m = HanskiModel::equidistributed(40, 3.0, 0.6, 2.0, 0.15);
    const auto rule = hanski_rule(m);
    CHECK(jacobian_gap(*rule, 100, 6) < 1e-5);
    check_dominates(*rule, 200);
    m.c.kind = ColonizationCurve::Kind::exponential;
    check_dominates(*hanski_rule(m), 200);

    // sweep connectivity equals the direct double sum, also for unsorted patches
    auto shuffled = HanskiModel::equidistributed(30, 2.0, 0.5, 1.0, 0.3);
    const CounterRng rng(1, 0, Stream::auxiliary);
    for (std::size_t i = 0; i < 30; ++i)
        shuffled.z[i][0] = rng.uniform(0, i);
    const Vector x = random_point(30, 8, 0);
    const Vector P = evaluate_rule(*hanski_rule(shuffled), x, 0);
    for (std::size_t i = 0; i < 30; ++i) {
        double y = 0.0;
        for (std::size_t j = 0; j < 30; ++j)
            if (j != i)
                y += 2.0 / 30.0 * shuffled.kernel(shuffled.z[i], shuffled.z[j]) * x[static_cast<Eigen::Index>(j)];
        const double expect = x[static_cast<Eigen::Index>(i)] * 0.5 + (1 - x[static_cast<Eigen::Index>(i)]) * y / (1 + y);
        CHECK(std::abs(P[static_cast<Eigen::Index>(i)] - expect) < 1e-13);
    }

    // d = 2 uses the direct sum
    HanskiModel plane = HanskiModel::equidistributed(16, 2.0, 0.5);
    plane.dim = 2;
    for (std::size_t i = 0; i < 16; ++i)
        plane.z[i] = {(i % 4 + 0.5) / 4.0, (i / 4 + 0.5) / 4.0};
    CHECK(jacobian_gap(*hanski_rule(plane), 20, 9) < 1e-5);
}

TEST_CASE("Hanski limit recursion")
{
    auto m = HanskiModel::equidistributed(10, 2.0, 0.8);
    m.grid = 64;
    const Vector pi0 = Vector::Constant(64, 0.6);

    m.c.b = 0.0; // c = 0: pure survival decay
    auto lim = hanski_limit_measure(m, pi0, 4);
    CHECK((lim.pi[4] - std::pow(0.8, 4) * pi0).cwiseAbs().maxCoeff() < 1e-15);

    m.c.b = 1.0;
    m.s = [](const Point &, int) { return 1.0; };
    lim = hanski_limit_measure(m, Vector::Ones(64), 5);
    CHECK((lim.pi[5].array() - 1.0).abs().maxCoeff() < 1e-15);

    // with a 0/1 initial density sigma_t is the Bernoulli variance pi(1-pi)
    m.s = [](const Point &z, int) { return 0.5 + 0.3 * z[0]; };
    Vector step(64);
    for (int g = 0; g < 64; ++g)
        step[g] = g < 20 ? 1.0 : 0.0;
    lim = hanski_limit_measure(m, step, 4);
    for (int t = 0; t <= 4; ++t) {
        const Vector var = lim.pi[t].cwiseProduct(Vector::Ones(64) - lim.pi[t]);
        CHECK((lim.sigma[t] - var).cwiseAbs().maxCoeff() < 1e-14);
    }
    CHECK_THROWS_AS(hanski_limit_measure(m, Vector::Constant(64, 1.5), 1), DomainError);
}

TEST_CASE("Hanski operator matches the finite-n derivative sums")
{
    const std::size_t n = 400;
    auto m = HanskiModel::equidistributed(n, 4.0, 0.7, 1.0, 0.2);
    m.grid = n; // patches sit on the grid midpoints
    const auto pi0 = [](const Point &z) { return 0.3 + 0.4 * z[0]; };
    Vector dens(static_cast<Eigen::Index>(n)), h(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        dens[static_cast<Eigen::Index>(i)] = pi0(m.z[i]);
        h[static_cast<Eigen::Index>(i)] = std::cos(3.0 * m.z[i][0]);
    }
    const auto lim = hanski_limit_measure(m, dens, 1);
    const Vector Jh = hanski_apply_J(m, lim, 1, h);
    const auto rule = hanski_rule(m);
    const Vector p1 = evaluate_rule(*rule, dens, 0);
    const Vector finite = rule->analytic_jacobian(p1, 1)->transpose() * h;
    // the finite sum leaves out the own patch: O(1/n) apart
    CHECK((finite - Jh).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("Hanski error diffusion start")
{
    const auto m = HanskiModel::equidistributed(1000, 1.0, 0.5);
    const auto x = error_diffusion_state(m, [](const Point &z) { return z[0]; });
    double sum = 0.0, first = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) {
        sum += x[i];
        first += m.z[i][0] * x[i];
    }
    CHECK(sum / 1000.0 == doctest::Approx(0.5).epsilon(2e-3));
    CHECK(first / 1000.0 == doctest::Approx(1.0 / 3.0).epsilon(3e-3));
}

TEST_CASE("graph rule")
{
    auto m = GraphDynModel::complete(6, 0.6, {0.1, 0.5, 0.3});
    const auto rule = graph_rule(m);
    CHECK(rule->size() == 15);
    CHECK(jacobian_gap(*rule, 100, 10) < 1e-5);
    check_dominates(*rule, 300);
    // absent edge with both endpoints otherwise isolated: f(0)
    BitState x(15, 0);
    const Vector P = evaluate_rule(*rule, to_vector(x), 0);
    CHECK(P[0] == doctest::Approx(0.1));
    CHECK_THROWS_AS(GraphDynModel::complete(4, 0.5, {0.5, 0.8, 0.0}), DomainError);
}

TEST_CASE("graph densities and cut norm")
{
    Matrix K3 = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
    CHECK(triangle_density(K3) == 2.0 / 9.0);
    CHECK(homomorphism_density(3, {{0, 1}, {1, 2}, {0, 2}}, K3) == doctest::Approx(2.0 / 9.0));
    const Matrix c = Matrix::Constant(5, 5, 0.3);
    CHECK(cut_norm(c).value == doctest::Approx(0.3));
    CHECK(triangle_density(c) == doctest::Approx(0.027));
    CHECK(homomorphism_density(4, {{0, 1}, {1, 2}, {2, 3}}, c) == doctest::Approx(0.027));
    CHECK(homomorphism_density(1, {}, c) == doctest::Approx(1.0));
    CHECK_THROWS_AS(homomorphism_density(6, {}, c), TooLarge);
    CHECK_THROWS_AS(cut_norm(Matrix::Zero(17, 17)), TooLarge);
    CHECK_FALSE(cut_norm(Matrix::Zero(17, 17), true).exact);

    for (std::uint64_t k = 0; k < 5; ++k) {
        const CounterRng rng(3, k, Stream::auxiliary);
        Matrix M(8, 8);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                M(i, j) = rng.uniform(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)) - 0.5;
        const double exact = cut_norm_exact(M);
        CHECK(std::abs(exact - cut_norm_bruteforce(M)) < 1e-14);
        CHECK(cut_norm_heuristic(M, 50) <= exact + 1e-14);
    }
}

TEST_CASE("graphon recursion")
{
    const std::size_t v = 12;
    auto m = GraphDynModel::complete(v, 0.6, {0.1, 0.6, 0.0});
    const Matrix H = m.host();
    Matrix W0(v, v);
    for (std::size_t i = 0; i < v; ++i)
        for (std::size_t j = 0; j < v; ++j)
            W0(i, j) = i != j && (i + 0.5) / v + (j + 0.5) / v <= 1.0 ? 1.0 : 0.0;
    const auto traj = graphon_trajectory(W0, H, m, 4);
    for (int t = 0; t <= 4; ++t) {
        const Matrix &W = traj.W[t];
        CHECK((W - W.transpose()).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(W.minCoeff() >= 0.0);
        CHECK(W.maxCoeff() <= 1.0);
        const Matrix var = W.cwiseProduct(Matrix::Ones(v, v) - W);
        CHECK((traj.s[t] - var).cwiseAbs().maxCoeff() < 1e-14);
    }
    const auto fn = clt_functionals(traj, m, 2, traj.W[2]);
    CHECK(fn.sigma2_next == doctest::Approx(graphon_sigma2(traj, 3, traj.W[2])));

    // step-graphon functionals track the finite edge-node computation
    const auto rule = graph_rule(m);
    const BitState x0 = graph_state_from_graphon(m, [](double a, double b) { return a + b <= 1.0 ? 1.0 : 0.0; });
    CHECK((edge_matrix(m, std::span<const std::uint8_t>(x0)) - W0).cwiseAbs().maxCoeff() == 0.0);
    GaussianApprox g(*rule, to_vector(x0), 3);
    const Matrix Lam = triangle_kernel(edge_matrix(m, g.p(3)));
    Vector h(static_cast<Eigen::Index>(m.size()));
    for (std::size_t e = 0; e < m.size(); ++e)
        h[static_cast<Eigen::Index>(e)] = Lam(m.edges[e].first, m.edges[e].second);
    const double finite = projected_variance(g, h, 3);
    const double graphon = graphon_variance(traj, m, 3, triangle_kernel(traj.W[3]));
    CHECK(finite > 0.0);
    CHECK(std::abs(finite / graphon - 1.0) < 0.25);

    // the one-step density is s_t minus the carried (q - w)^2 s_{t-1} part
    for (int t = 1; t <= 4; ++t) {
        const Matrix u = traj.W[t - 1] * Matrix::Ones(v, 1) * Matrix::Ones(1, v) / (2.0 * v);
        const Matrix du = u + u.transpose();
        Matrix carried(v, v);
        for (std::size_t i = 0; i < v; ++i)
            for (std::size_t j = 0; j < v; ++j) {
                const double w = m.f.value(du(i, j));
                carried(i, j) = (0.6 - w) * (0.6 - w) * traj.s[t - 1](i, j);
            }
        CHECK((traj.noise[t] + carried - traj.s[t]).cwiseAbs().maxCoeff() < 1e-14);
    }
    GaussianApprox gc(*rule, to_vector(x0), 3, false, NoiseModel::conditional);
    const double finite_c = projected_variance(gc, h, 3);
    const double graphon_c = graphon_variance(traj, m, 3, triangle_kernel(traj.W[3]), NoiseModel::conditional);
    CHECK(finite_c < finite);
    CHECK(std::abs(finite_c / graphon_c - 1.0) < 0.25);
}

TEST_CASE("Hanski grid refinement converges")
{
    auto m = HanskiModel::equidistributed(10, 3.0, 0.7, 1.0, 0.2);
    const auto run = [&](std::size_t G) {
        m.grid = G;
        const auto grid = make_grid(1, G);
        Vector pi0(static_cast<Eigen::Index>(G)), h(static_cast<Eigen::Index>(G));
        for (std::size_t g = 0; g < G; ++g) {
            const double z = grid.nodes[g][0];
            pi0[static_cast<Eigen::Index>(g)] = 0.3 + 0.4 * z * z;
            h[static_cast<Eigen::Index>(g)] = std::cos(2.0 * z);
        }
        return hanski_limit_measure(m, pi0, 4).integrate_pi(h, 4);
    };
    const double ref = run(2048);
    double prev = std::abs(run(16) - ref);
    for (std::size_t G : {32, 64}) {
        const double err = std::abs(run(G) - ref);
        // at least first order; the midpoint rule usually gives ~4
        CHECK(prev / err >= 1.5);
        prev = err;
    }
    CHECK(prev < 1e-3);
}
