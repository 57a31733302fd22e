#include <doctest.h>

#include "occlab/errors.hpp"
#include "occlab/simulator.hpp"

#include <cmath>

using namespace occlab;

namespace {

RulePtr voter_like(std::size_t n)
{
    // P_i = 0.2 + 0.3 x_i + 0.4 x_{i+1}
    FunctionRuleSpec spec;
    spec.n = n;
    spec.split = [n](const Vector &x, int, Vector &S, Vector &C) {
        for (std::size_t i = 0; i < n; ++i) {
            const double y = x[static_cast<Eigen::Index>((i + 1) % n)];
            C[static_cast<Eigen::Index>(i)] = 0.2 + 0.4 * y;
            S[static_cast<Eigen::Index>(i)] = 0.5 + 0.4 * y;
        }
    };
    return std::make_shared<FunctionRule>(spec);
}

} // namespace

TEST_CASE("ensemble mean matches exact law")
{
    const std::size_t n = 4;
    auto rule = voter_like(n);
    BitState x0 = {1, 0, 0, 1};
    const auto law = exact_law(*rule, x0, 3);
    double total = 0.0;
    for (double m : law[3])
        total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    const auto ens = simulate_ensemble(*rule, x0, 3, 20000, 5);
    const Vector exact = marginal_means(law[3], n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (std::size_t r = 0; r < ens.R; ++r)
            m += ens.state(r, 3)[i];
        m /= static_cast<double>(ens.R);
        CHECK(std::abs(m - exact[static_cast<Eigen::Index>(i)]) < 0.015);
    }
}

TEST_CASE("worker count does not change results")
{
    auto rule = voter_like(6);
    BitState x0(6, 0);
    SimulationOptions one, many;
    one.workers = 1;
    many.workers = 4;
    const auto a = simulate_ensemble(*rule, x0, 5, 64, 99, one);
    const auto b = simulate_ensemble(*rule, x0, 5, 64, 99, many);
    CHECK(a.states == b.states);
}

TEST_CASE("coupling and discrepancy flags")
{
    const std::size_t n = 5;
    auto rule = voter_like(n);
    BitState x0 = {1, 1, 0, 0, 1};
    std::vector<Vector> p{to_vector(x0)};
    for (int t = 0; t < 4; ++t)
        p.push_back(evaluate_rule(*rule, p.back(), t));
    SimulationOptions opt;
    opt.couple = true;
    opt.p_traj = p;
    const auto ens = simulate_ensemble(*rule, x0, 4, 50, 3, opt);
    for (std::size_t r = 0; r < ens.R; ++r) {
        CHECK(ens.jbar(r, 0) == 0.0);
        for (int t = 1; t <= 4; ++t) {
            const auto x = ens.state(r, t);
            const auto w = ens.coupled_state(r, t);
            const auto j = ens.discrepancy_state(r, t);
            const auto jprev = ens.discrepancy_state(r, t - 1);
            for (std::size_t i = 0; i < n; ++i) {
                if (x[i] != w[i])
                    CHECK(j[i] == 1);
                CHECK(j[i] >= jprev[i]);
            }
        }
    }
    // W uses the same uniforms: with a constant-in-x rule X and W agree
    const auto c = make_constant_rule(Vector::Constant(n, 0.4));
    FunctionRuleSpec spec;
    spec.n = n;
    spec.split = [n](const Vector &, int, Vector &S, Vector &C) {
        S = Vector::Constant(static_cast<Eigen::Index>(n), 0.4);
        C = S;
    };
    FunctionRule flat(spec);
    std::vector<Vector> q(5, Vector::Constant(static_cast<Eigen::Index>(n), 0.4));
    opt.p_traj = q;
    const auto e2 = simulate_ensemble(flat, x0, 4, 20, 1, opt);
    CHECK(e2.states == e2.coupled);
}

TEST_CASE("exact law size guard")
{
    auto rule = make_constant_rule(Vector::Constant(13, 0.5));
    CHECK_THROWS_AS(exact_law(*rule, BitState(13, 0), 1), TooLarge);
    CHECK_THROWS_AS(exact_law(*rule, BitState(13, 0), 1, 17), TooLarge);
}

TEST_CASE("coupling without split is rejected")
{
    FunctionRuleSpec spec;
    spec.n = 3;
    spec.evaluate = [](const Vector &x, int, Vector &out) { out = 0.5 * x; };
    FunctionRule rule(spec);
    SimulationOptions opt;
    opt.couple = true;
    std::vector<Vector> p(3, Vector::Constant(3, 0.5));
    opt.p_traj = p;
    CHECK_THROWS_AS(simulate_ensemble(rule, BitState(3, 0), 2, 2, 0, opt), SplitRequired);
    // uncoupled simulation still works from P alone
    CHECK_NOTHROW(simulate_ensemble(rule, BitState(3, 1), 2, 2, 0));
}
