#include "occlab/simulator.hpp"

#include "occlab/errors.hpp"
#include "occlab/parallel.hpp"

#include <cmath>
#include <iostream>

namespace occlab {

std::size_t BinaryEnsemble::offset(std::size_t r, int t) const
{
    return (r * static_cast<std::size_t>(T + 1) + static_cast<std::size_t>(t)) * n;
}

std::span<const std::uint8_t> BinaryEnsemble::state(std::size_t r, int t) const
{
    return {states.data() + offset(r, t), n};
}

std::span<const std::uint8_t> BinaryEnsemble::coupled_state(std::size_t r, int t) const
{
    if (!is_coupled())
        throw SplitRequired("ensemble was simulated without coupling");
    return {coupled.data() + offset(r, t), n};
}

std::span<const std::uint8_t> BinaryEnsemble::discrepancy_state(std::size_t r, int t) const
{
    if (!is_coupled())
        throw SplitRequired("ensemble was simulated without coupling");
    return {discrepancy.data() + offset(r, t), n};
}

double BinaryEnsemble::jbar(std::size_t r, int t) const
{
    const auto d = discrepancy_state(r, t);
    std::size_t count = 0;
    for (auto b : d)
        count += b;
    return static_cast<double>(count) / static_cast<double>(n);
}

namespace {

void check_binary(const BitState &x, std::size_t n)
{
    if (x.size() != n)
        throw DomainError("state length does not match the rule size");
    for (auto b : x) {
        if (b > 1)
            throw DomainError("binary state entries must be 0 or 1");
    }
}

void check_unit(const Vector &v, const char *what)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v[i] >= -kCubeTolerance && v[i] <= 1.0 + kCubeTolerance))
            throw RangeError(std::string(what) + " left [0,1]");
    }
}

// Thresholds for one transition: S and C when split, else P in both slots.
struct Thresholds
{
    Vector survival;
    Vector colonization;
};

void thresholds_at(const OccupancyRule &rule, const Vector &x, int t, Thresholds &th)
{
    const auto n = static_cast<Eigen::Index>(rule.size());
    th.survival.resize(n);
    th.colonization.resize(n);
    if (rule.has_split()) {
        rule.split(x, t, th.survival, th.colonization);
        check_unit(th.survival, "survival function");
        check_unit(th.colonization, "colonization function");
    } else {
        rule.evaluate(x, t, th.survival);
        check_unit(th.survival, "rule value");
        th.colonization = th.survival;
    }
}

inline std::uint8_t transition(std::uint8_t occupied, double u, double s, double c)
{
    return occupied ? static_cast<std::uint8_t>(u <= s) : static_cast<std::uint8_t>(u <= c);
}

} // namespace

BitState step(const OccupancyRule &rule, const BitState &x, int t, const CounterRng &rng)
{
    check_binary(x, rule.size());
    Thresholds th;
    thresholds_at(rule, to_vector(x), t, th);
    BitState next(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto I = static_cast<Eigen::Index>(i);
        next[i] = transition(x[i], rng.uniform(static_cast<std::uint64_t>(t), i), th.survival[I],
                             th.colonization[I]);
    }
    return next;
}

CoupledState coupled_step(const OccupancyRule &rule, const CoupledState &state, const Vector &p_det,
                          int t, const CounterRng &rng)
{
    if (!rule.has_split())
        throw SplitRequired("coupling requires a survival/colonization split");
    const std::size_t n = rule.size();
    check_binary(state.x, n);
    check_binary(state.w, n);
    if (state.j.size() != n || static_cast<std::size_t>(p_det.size()) != n)
        throw DomainError("coupled state shapes do not agree");
    Thresholds tx, tp;
    thresholds_at(rule, to_vector(state.x), t, tx);
    thresholds_at(rule, p_det, t, tp);
    CoupledState next{BitState(n), BitState(n), BitState(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto I = static_cast<Eigen::Index>(i);
        const double u = rng.uniform(static_cast<std::uint64_t>(t), i);
        next.x[i] = transition(state.x[i], u, tx.survival[I], tx.colonization[I]);
        next.w[i] = transition(state.w[i], u, tp.survival[I], tp.colonization[I]);
        next.j[i] = static_cast<std::uint8_t>(state.j[i] | (next.x[i] != next.w[i]));
    }
    return next;
}

void run_replicates(const OccupancyRule &rule, const BitState &x0, int T, std::size_t R,
                    std::uint64_t seed, const SimulationOptions &options,
                    const std::function<void(const StepView &)> &observer)
{
    const std::size_t n = rule.size();
    check_binary(x0, n);
    if (R == 0)
        throw DomainError("replicate count must be at least one");
    if (T < 0)
        throw DomainError("horizon must be nonnegative");
    if (options.couple) {
        if (!rule.has_split())
            throw SplitRequired("coupling requires a survival/colonization split");
        if (options.p_traj.size() < static_cast<std::size_t>(T + 1))
            throw DomainError("coupled simulation needs the deterministic trajectory p_0..p_T");
    }

    // The W-chain thresholds depend only on t; compute them once.
    std::vector<Thresholds> det_thresholds;
    if (options.couple) {
        det_thresholds.resize(static_cast<std::size_t>(T));
        for (int t = 0; t < T; ++t)
            thresholds_at(rule, options.p_traj[static_cast<std::size_t>(t)], t,
                          det_thresholds[static_cast<std::size_t>(t)]);
    }

    parallel_for(R, options.workers, [&](std::size_t r) {
        const CounterRng rng(seed, r, Stream::transition);
        BitState x = x0, nx(n);
        BitState w, nw, j;
        if (options.couple) {
            w = x0;
            nw.resize(n);
            j.assign(n, 0);
        }
        Thresholds th;
        Vector xv(static_cast<Eigen::Index>(n));
        observer(StepView{r, 0, x, options.couple ? &w : nullptr, options.couple ? &j : nullptr});
        for (int t = 0; t < T; ++t) {
            for (std::size_t i = 0; i < n; ++i)
                xv[static_cast<Eigen::Index>(i)] = x[i];
            thresholds_at(rule, xv, t, th);
            const auto tt = static_cast<std::uint64_t>(t);
            if (options.couple) {
                const Thresholds &tp = det_thresholds[static_cast<std::size_t>(t)];
                for (std::size_t i = 0; i < n; ++i) {
                    const auto I = static_cast<Eigen::Index>(i);
                    const double u = rng.uniform(tt, i);
                    nx[i] = transition(x[i], u, th.survival[I], th.colonization[I]);
                    nw[i] = transition(w[i], u, tp.survival[I], tp.colonization[I]);
                    j[i] = static_cast<std::uint8_t>(j[i] | (nx[i] != nw[i]));
                }
                w.swap(nw);
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const auto I = static_cast<Eigen::Index>(i);
                    nx[i] = transition(x[i], rng.uniform(tt, i), th.survival[I], th.colonization[I]);
                }
            }
            x.swap(nx);
            observer(StepView{r, t + 1, x, options.couple ? &w : nullptr,
                              options.couple ? &j : nullptr});
        }
    });
}

BinaryEnsemble simulate_ensemble(const OccupancyRule &rule, const BitState &x0, int T, std::size_t R,
                                 std::uint64_t seed, const SimulationOptions &options)
{
    BinaryEnsemble ens;
    ens.n = rule.size();
    ens.T = T;
    ens.R = R;
    ens.seed = seed;
    const std::size_t total = R * static_cast<std::size_t>(T + 1) * ens.n;
    ens.states.resize(total);
    if (options.couple) {
        ens.coupled.resize(total);
        ens.discrepancy.resize(total);
    }
    run_replicates(rule, x0, T, R, seed, options, [&](const StepView &v) {
        const std::size_t off =
            (v.replicate * static_cast<std::size_t>(T + 1) + static_cast<std::size_t>(v.t)) * ens.n;
        std::copy(v.x.begin(), v.x.end(), ens.states.begin() + static_cast<std::ptrdiff_t>(off));
        if (v.w) {
            std::copy(v.w->begin(), v.w->end(), ens.coupled.begin() + static_cast<std::ptrdiff_t>(off));
            std::copy(v.j->begin(), v.j->end(),
                      ens.discrepancy.begin() + static_cast<std::ptrdiff_t>(off));
        }
    });
    return ens;
}

std::size_t state_index(std::span<const std::uint8_t> x)
{
    std::size_t idx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i])
            idx |= std::size_t{1} << i;
    }
    return idx;
}

ExactLaw exact_law(const OccupancyRule &rule, const BitState &x0, int T, std::size_t n_cap)
{
    const std::size_t n = rule.size();
    check_binary(x0, n);
    if (n_cap > kExactLawHardCap)
        throw TooLarge("exact law cap cannot exceed 16 nodes");
    if (n > n_cap)
        throw TooLarge("exact law needs n <= " + std::to_string(n_cap) + " (got " +
                       std::to_string(n) + ")");
    if (n > kExactLawDefaultCap)
        std::cerr << "warning: exact law with n = " << n << " costs O(4^n) per step\n";

    const std::size_t states = std::size_t{1} << n;
    ExactLaw law(static_cast<std::size_t>(T + 1), std::vector<double>(states, 0.0));
    law[0][state_index(x0)] = 1.0;

    Vector x(static_cast<Eigen::Index>(n));
    std::vector<double> row(states);
    for (int t = 0; t < T; ++t) {
        const auto &cur = law[static_cast<std::size_t>(t)];
        auto &next = law[static_cast<std::size_t>(t + 1)];
        for (std::size_t s = 0; s < states; ++s) {
            const double mass = cur[s];
            if (mass == 0.0)
                continue;
            for (std::size_t i = 0; i < n; ++i)
                x[static_cast<Eigen::Index>(i)] = static_cast<double>(s >> i & 1u);
            const Vector P = evaluate_rule(rule, x, t);
            // Product kernel built one node at a time.
            row[0] = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double p = P[static_cast<Eigen::Index>(i)];
                const std::size_t width = std::size_t{1} << i;
                for (std::size_t y = 0; y < width; ++y) {
                    row[y | width] = row[y] * p;
                    row[y] *= 1.0 - p;
                }
            }
            for (std::size_t y = 0; y < states; ++y)
                next[y] += mass * row[y];
        }
    }
    return law;
}

Vector marginal_means(const std::vector<double> &law, std::size_t n)
{
    Vector m = Vector::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < law.size(); ++s) {
        if (law[s] == 0.0)
            continue;
        for (std::size_t i = 0; i < n; ++i) {
            if (s >> i & 1u)
                m[static_cast<Eigen::Index>(i)] += law[s];
        }
    }
    return m;
}

} // namespace occlab
