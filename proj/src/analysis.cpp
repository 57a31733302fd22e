#include "occlab/analysis.hpp"

#include "occlab/bounds.hpp"
#include "occlab/deterministic.hpp"
#include "occlab/errors.hpp"
#include "occlab/gaussian.hpp"
#include "occlab/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace occlab {

std::vector<double> project(const BinaryEnsemble &ens, std::span<const Vector> p_traj, const Vector &h,
                            int t)
{
    if (t < 0 || t > ens.T || static_cast<std::size_t>(t) >= p_traj.size())
        throw DomainError("time index outside the ensemble");
    const Vector &p = p_traj[static_cast<std::size_t>(t)];
    if (static_cast<std::size_t>(h.size()) != ens.n || static_cast<std::size_t>(p.size()) != ens.n)
        throw DomainError("test vector and trajectory must have length n");
    const double scale = 1.0 / std::sqrt(static_cast<double>(ens.n));
    std::vector<double> out(ens.R);
    for (std::size_t r = 0; r < ens.R; ++r) {
        const auto x = ens.state(r, t);
        double s = 0.0;
        for (std::size_t i = 0; i < ens.n; ++i)
            s += h[static_cast<Eigen::Index>(i)] * (x[i] - p[static_cast<Eigen::Index>(i)]);
        out[r] = s * scale;
    }
    return out;
}

ProjectionSamples simulate_projections(const OccupancyRule &rule, const BitState &x0, int T,
                                       std::size_t R, std::uint64_t seed, std::span<const Vector> p_traj,
                                       const std::vector<Vector> &hs, unsigned workers)
{
    const std::size_t n = rule.size();
    if (p_traj.size() < static_cast<std::size_t>(T + 1))
        throw DomainError("projection needs the deterministic trajectory p_0..p_T");
    for (const auto &h : hs) {
        if (static_cast<std::size_t>(h.size()) != n)
            throw DomainError("test vector length does not match n");
    }
    ProjectionSamples out;
    out.values.assign(hs.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(T + 1),
                                                                  std::vector<double>(R, 0.0)));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    SimulationOptions opts;
    opts.workers = workers;
    run_replicates(rule, x0, T, R, seed, opts, [&](const StepView &v) {
        const Vector &p = p_traj[static_cast<std::size_t>(v.t)];
        for (std::size_t k = 0; k < hs.size(); ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto I = static_cast<Eigen::Index>(i);
                s += hs[k][I] * (v.x[i] - p[I]);
            }
            out.values[k][static_cast<std::size_t>(v.t)][v.replicate] = s * scale;
        }
    });
    return out;
}

// ---------------------------------------------------------------------------

namespace {

double normal_cdf(double x, const NormalTarget &t)
{
    const double s = std::sqrt(t.variance);
    return 0.5 * std::erfc(-(x - t.mean) / (s * std::sqrt(2.0)));
}

void check_sample(std::size_t size)
{
    if (size < 2)
        throw DomainError("distance needs a sample of size >= 2");
}

void check_target(const NormalTarget &t)
{
    if (!(t.variance >= 0.0) || !std::isfinite(t.variance) || !std::isfinite(t.mean))
        throw DomainError("target variance must be finite and nonnegative");
}

// int_{-inf}^x Phi((y-m)/s) dy and int_x^inf (1 - Phi((y-m)/s)) dy
double lower_integral(double x, double m, double s)
{
    const double z = (x - m) / s;
    return (x - m) * 0.5 * std::erfc(-z / std::sqrt(2.0)) + s * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

double upper_integral(double x, double m, double s)
{
    const double z = (x - m) / s;
    return s * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI) - (x - m) * 0.5 * std::erfc(z / std::sqrt(2.0));
}

std::vector<double> resample(std::span<const double> x, const CounterRng &rng, std::uint64_t stream)
{
    std::vector<double> out(x.size());
    const double N = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto k = static_cast<std::size_t>(rng.uniform(stream, i) * N);
        out[i] = x[std::min(k, x.size() - 1)];
    }
    return out;
}

double stddev(const std::vector<double> &v)
{
    return std::sqrt(sample_variance(v));
}

std::string describe(const NormalTarget &t)
{
    return "normal(" + format_double(t.mean) + "," + format_double(t.variance) + ")";
}

} // namespace

double ks_statistic(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty())
        throw DomainError("two-sample distance needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double D = 0.0;
    while (i < a.size() || j < b.size()) {
        const double x = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
        while (i < a.size() && a[i] == x)
            ++i;
        while (j < b.size() && b[j] == x)
            ++j;
        D = std::max(D, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return D;
}

double ks_statistic(std::vector<double> x, const NormalTarget &target)
{
    check_target(target);
    if (target.variance == 0.0)
        return ks_statistic(std::move(x), std::vector<double>{target.mean});
    std::sort(x.begin(), x.end());
    const double N = static_cast<double>(x.size());
    double D = 0.0;
    std::size_t i = 0;
    while (i < x.size()) {
        std::size_t j = i;
        while (j < x.size() && x[j] == x[i])
            ++j;
        const double F = normal_cdf(x[i], target);
        D = std::max({D, std::abs(static_cast<double>(j) / N - F), std::abs(F - static_cast<double>(i) / N)});
        i = j;
    }
    return D;
}

double w1_statistic(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty())
        throw DomainError("two-sample distance needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double total = 0.0, prev = 0.0, gap = 0.0;
    bool started = false;
    while (i < a.size() || j < b.size()) {
        const double x = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
        if (started)
            total += gap * (x - prev);
        while (i < a.size() && a[i] == x)
            ++i;
        while (j < b.size() && b[j] == x)
            ++j;
        gap = std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb);
        prev = x;
        started = true;
    }
    return total;
}

double w1_statistic(std::vector<double> x, const NormalTarget &target)
{
    check_target(target);
    if (target.variance == 0.0)
        return w1_statistic(std::move(x), std::vector<double>{target.mean});
    std::sort(x.begin(), x.end());
    const double m = target.mean, s = std::sqrt(target.variance);
    const boost::math::normal_distribution<double> law(m, s);
    const double N = static_cast<double>(x.size());
    double total = lower_integral(x.front(), m, s) + upper_integral(x.back(), m, s);
    for (std::size_t k = 1; k < x.size(); ++k) {
        const double a = x[k - 1], b = x[k];
        if (b <= a)
            continue;
        const double c = static_cast<double>(k) / N; // empirical CDF on [a, b)
        // F - c changes sign once, at the c-quantile
        const double cross = boost::math::quantile(law, c);
        auto signed_part = [&](double lo, double hi) {
            return (lower_integral(hi, m, s) - lower_integral(lo, m, s)) - c * (hi - lo);
        };
        if (cross <= a)
            total += signed_part(a, b);
        else if (cross >= b)
            total -= signed_part(a, b);
        else
            total += -signed_part(a, cross) + signed_part(cross, b);
    }
    return total;
}

DistanceReport ks_distance(std::span<const double> sample, const NormalTarget &target, std::uint64_t seed,
                           std::size_t resamples)
{
    check_sample(sample.size());
    DistanceReport rep{"kolmogorov", sample.size(), describe(target), 0.0, 0.0};
    rep.value = ks_statistic({sample.begin(), sample.end()}, target);
    std::vector<double> boot;
    for (std::size_t b = 0; b < resamples; ++b)
        boot.push_back(ks_statistic(resample(sample, CounterRng(seed, b, Stream::bootstrap), 0), target));
    rep.standard_error = resamples > 1 ? stddev(boot) : 0.0;
    return rep;
}

DistanceReport ks_distance(std::span<const double> a, std::span<const double> b, std::uint64_t seed,
                           std::size_t resamples)
{
    check_sample(a.size());
    check_sample(b.size());
    DistanceReport rep{"kolmogorov", a.size(), "sample", 0.0, 0.0};
    rep.value = ks_statistic({a.begin(), a.end()}, {b.begin(), b.end()});
    std::vector<double> boot;
    for (std::size_t k = 0; k < resamples; ++k) {
        const CounterRng rng(seed, k, Stream::bootstrap);
        boot.push_back(ks_statistic(resample(a, rng, 0), resample(b, rng, 1)));
    }
    rep.standard_error = resamples > 1 ? stddev(boot) : 0.0;
    return rep;
}

DistanceReport wasserstein1(std::span<const double> sample, const NormalTarget &target, std::uint64_t seed,
                            std::size_t resamples)
{
    check_sample(sample.size());
    DistanceReport rep{"wasserstein1", sample.size(), describe(target), 0.0, 0.0};
    rep.value = w1_statistic({sample.begin(), sample.end()}, target);
    std::vector<double> boot;
    for (std::size_t b = 0; b < resamples; ++b)
        boot.push_back(w1_statistic(resample(sample, CounterRng(seed, b, Stream::bootstrap), 0), target));
    rep.standard_error = resamples > 1 ? stddev(boot) : 0.0;
    return rep;
}

DistanceReport wasserstein1(std::span<const double> a, std::span<const double> b, std::uint64_t seed,
                            std::size_t resamples)
{
    check_sample(a.size());
    check_sample(b.size());
    DistanceReport rep{"wasserstein1", a.size(), "sample", 0.0, 0.0};
    rep.value = w1_statistic({a.begin(), a.end()}, {b.begin(), b.end()});
    std::vector<double> boot;
    for (std::size_t k = 0; k < resamples; ++k) {
        const CounterRng rng(seed, k, Stream::bootstrap);
        boot.push_back(w1_statistic(resample(a, rng, 0), resample(b, rng, 1)));
    }
    rep.standard_error = resamples > 1 ? stddev(boot) : 0.0;
    return rep;
}

double sample_mean(std::span<const double> x)
{
    if (x.empty())
        throw DomainError("mean of an empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x)
{
    if (x.size() < 2)
        throw DomainError("variance needs at least two values");
    const double m = sample_mean(x);
    double ss = 0.0;
    for (double v : x)
        ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

double bootstrap_se(std::span<const double> x, const std::function<double(std::span<const double>)> &stat,
                    std::uint64_t seed, std::size_t resamples)
{
    check_sample(x.size());
    std::vector<double> boot;
    for (std::size_t b = 0; b < resamples; ++b) {
        const auto r = resample(x, CounterRng(seed, b, Stream::bootstrap), 0);
        boot.push_back(stat(r));
    }
    return stddev(boot);
}

std::vector<double> ks_null_quantiles(std::size_t size, std::size_t reps, std::uint64_t seed)
{
    check_sample(size);
    const std::vector<double> probs{0.5, 0.9, 0.95, 0.99};
    std::filesystem::path cache;
    if (const char *dir = std::getenv("OCCLAB_CACHE"); dir && *dir) {
        cache = std::filesystem::path(dir) / ("ks_null_n" + std::to_string(size) + "_r" + std::to_string(reps) +
                                              "_s" + std::to_string(seed) + ".csv");
        if (std::filesystem::exists(cache)) {
            const auto table = read_numeric_csv(cache);
            const auto &q = table.column("quantile");
            if (q.size() == probs.size())
                return q;
        }
    }
    std::vector<double> stats(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        const CounterRng rng(seed, r, Stream::auxiliary);
        std::vector<double> x(size);
        for (std::size_t i = 0; i < size; ++i)
            x[i] = rng.normal(0, i);
        stats[r] = ks_statistic(std::move(x), NormalTarget{0.0, 1.0});
    }
    std::sort(stats.begin(), stats.end());
    std::vector<double> out;
    for (double p : probs) {
        const double pos = p * static_cast<double>(reps - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, reps - 1);
        out.push_back(stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]));
    }
    if (!cache.empty()) {
        std::filesystem::create_directories(cache.parent_path());
        Table t;
        t.header = {"probability", "quantile"};
        for (std::size_t k = 0; k < probs.size(); ++k)
            t.add({probs[k], out[k]});
        write_csv(t, cache);
    }
    return out;
}

// ---------------------------------------------------------------------------

Table sweep_table()
{
    Table t;
    t.header = {"model_id", "n", "t", "q", "metric", "value", "stderr", "bound_c1"};
    return t;
}

double loglog_slope(const std::vector<double> &x, const std::vector<double> &y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw DomainError("slope needs two or more matched points");
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0) || !(y[k] > 0))
            return NAN;
        mx += std::log(x[k]);
        my += std::log(y[k]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double dx = std::log(x[k]) - mx;
        sxy += dx * (std::log(y[k]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

namespace {

std::uint64_t member_seed(std::uint64_t seed, std::size_t n)
{
    return seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(n) + 1));
}

std::vector<Vector> trajectory_vectors(const GaussianApprox &g)
{
    std::vector<Vector> p;
    for (int t = 0; t <= g.horizon(); ++t)
        p.push_back(g.p(t));
    return p;
}

double safe_bound(const CoefficientSequence &coeffs, const Vector &h, double q, const GaussianApprox &g, int t)
{
    try {
        return clt_rate_bound(coeffs, h, q, g, t).value;
    } catch (const DegenerateSigma &) {
        return NAN;
    }
}

bool strictly_decreasing(const std::vector<double> &v)
{
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (!(v[k] < v[k - 1]))
            return false;
    }
    return true;
}

} // namespace

CltSweepResult clt_sweep(const ModelFamily &family, const CltSweepOptions &o)
{
    if (o.ns.empty())
        throw DomainError("sweep needs at least one n");
    if (o.t < 1)
        throw DomainError("sweep needs t >= 1");
    CltSweepResult res;
    res.table = sweep_table();
    std::vector<double> ns, ks, w1;
    for (std::size_t n : o.ns) {
        const FamilyMember m = family(n);
        if (m.rule->size() != n)
            throw DomainError("family member size does not match n");
        const std::uint64_t seed = member_seed(o.seed, n);
        const GaussianApprox g(*m.rule, to_vector(m.x0), o.t);
        const auto p = trajectory_vectors(g);
        CltSweepPoint pt;
        pt.n = n;
        pt.variance = o.noise == NoiseModel::marginal
                          ? projected_variance(g, m.h, o.t)
                          : projected_variance(GaussianApprox(*m.rule, to_vector(m.x0), o.t, false, o.noise), m.h, o.t);
        const auto samples = simulate_projections(*m.rule, m.x0, o.t, o.R, seed, p, {m.h}, o.workers);
        const auto &x = samples.at(0, o.t);
        pt.empirical_variance = sample_variance(x);
        pt.ks = ks_distance(x, NormalTarget{0.0, pt.variance}, seed);
        pt.w1 = wasserstein1(x, NormalTarget{0.0, pt.variance}, seed);
        const auto coeffs = coefficient_sequence(*m.rule, o.t, o.coefficient_budget, seed);
        pt.bound_ks = safe_bound(coeffs, m.h, INFINITY, g, o.t);
        pt.bound_w1 = safe_bound(coeffs, m.h, 1.0, g, o.t);
        const double var_se = bootstrap_se(x, [](std::span<const double> s) { return sample_variance(s); }, seed);

        const auto N = static_cast<std::int64_t>(n);
        res.table.add({o.model_id, N, std::int64_t{o.t}, INFINITY, std::string("kolmogorov"), pt.ks.value,
                       pt.ks.standard_error, pt.bound_ks});
        res.table.add({o.model_id, N, std::int64_t{o.t}, 1.0, std::string("wasserstein1"), pt.w1.value,
                       pt.w1.standard_error, pt.bound_w1});
        res.table.add({o.model_id, N, std::int64_t{o.t}, NAN, std::string("variance_gaussian"), pt.variance,
                       0.0, NAN});
        res.table.add({o.model_id, N, std::int64_t{o.t}, NAN, std::string("variance_empirical"),
                       pt.empirical_variance, var_se, NAN});
        if (o.null_calibration) {
            const auto null = ks_null_quantiles(o.R);
            res.table.add({o.model_id, N, std::int64_t{o.t}, INFINITY, std::string("kolmogorov_null_q95"),
                           null[2], 0.0, NAN});
        }
        ns.push_back(static_cast<double>(n));
        ks.push_back(pt.ks.value);
        w1.push_back(pt.w1.value);
        res.points.push_back(std::move(pt));
    }
    res.ks_decreasing = strictly_decreasing(ks);
    res.w1_decreasing = strictly_decreasing(w1);
    if (ns.size() >= 2) {
        res.ks_slope = loglog_slope(ns, ks);
        res.w1_slope = loglog_slope(ns, w1);
        res.table.add({o.model_id, std::string("all"), std::int64_t{o.t}, INFINITY, std::string("kolmogorov_loglog_slope"),
                       res.ks_slope, NAN, NAN});
        res.table.add({o.model_id, std::string("all"), std::int64_t{o.t}, 1.0, std::string("wasserstein1_loglog_slope"),
                       res.w1_slope, NAN, NAN});
        res.table.add({o.model_id, std::string("all"), std::int64_t{o.t}, INFINITY, std::string("kolmogorov_decreasing"),
                       res.ks_decreasing ? 1.0 : 0.0, NAN, NAN});
    }
    return res;
}

// ---------------------------------------------------------------------------

TestClass make_test_class(std::vector<Vector> vectors, std::string descriptor)
{
    if (vectors.empty())
        throw DomainError("test class is empty");
    if (vectors.size() > kMaxClassSize)
        throw TooLarge("test class has more than 10^6 members");
    TestClass H;
    H.descriptor = std::move(descriptor);
    const Eigen::Index n = vectors.front().size();
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (const auto &h : vectors) {
        if (h.size() != n)
            throw DomainError("class vectors must share one length");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (h[i] != 0.0)
                used[static_cast<std::size_t>(i)] = true;
        }
        H.H = std::max(H.H, h.cwiseAbs().maxCoeff());
    }
    for (std::size_t i = 0; i < used.size(); ++i) {
        if (used[i])
            H.support.push_back(i);
    }
    H.vectors = std::move(vectors);
    return H;
}

TestClass sign_vector_class(std::size_t n, const std::vector<std::size_t> &coords)
{
    const std::size_t k = coords.size();
    if (k > 20)
        throw TooLarge("sign-vector class with more than 10^6 members");
    for (std::size_t c : coords) {
        if (c >= n)
            throw DomainError("sign-vector coordinate out of range");
    }
    std::vector<Vector> vs;
    for (std::size_t m = 0; m < (std::size_t{1} << k); ++m) {
        Vector h = Vector::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t b = 0; b < k; ++b)
            h[static_cast<Eigen::Index>(coords[b])] = (m >> b & 1u) ? 1.0 : -1.0;
        vs.push_back(std::move(h));
    }
    return make_test_class(std::move(vs), "signs on " + std::to_string(k) + " coordinates");
}

double class_sup(const TestClass &H, const Vector &d)
{
    std::vector<double> ds(H.support.size());
    for (std::size_t k = 0; k < H.support.size(); ++k)
        ds[k] = d[static_cast<Eigen::Index>(H.support[k])];
    double best = 0.0;
    for (const auto &h : H.vectors) {
        double s = 0.0;
        for (std::size_t k = 0; k < H.support.size(); ++k)
            s += h[static_cast<Eigen::Index>(H.support[k])] * ds[k];
        best = std::max(best, std::abs(s));
    }
    return best / static_cast<double>(d.size());
}

double class_rademacher(const TestClass &H, std::size_t n, std::uint64_t seed)
{
    // coordinates outside the support contribute nothing
    const std::size_t k = H.support.size();
    if (k == 0)
        return 0.0;
    std::vector<Vector> rows;
    rows.reserve(H.vectors.size());
    for (const auto &h : H.vectors) {
        Vector r(static_cast<Eigen::Index>(k));
        for (std::size_t b = 0; b < k; ++b)
            r[static_cast<Eigen::Index>(b)] = h[static_cast<Eigen::Index>(H.support[b])];
        rows.push_back(std::move(r));
    }
    const double cost = std::ldexp(1.0, static_cast<int>(std::min<std::size_t>(k, 60))) *
                        static_cast<double>(H.vectors.size() * k);
    const double sum = (k <= 24 && cost <= 1e9) ? rademacher_exact(rows) * static_cast<double>(k)
                                                : rademacher_mc(rows, 20000, seed).value * static_cast<double>(k);
    return sum / static_cast<double>(n);
}

LlnSweepResult lln_sweep(const ModelFamily &family, const ClassFamily &classes, const LlnSweepOptions &o)
{
    if (o.ns.empty())
        throw DomainError("sweep needs at least one n");
    LlnSweepResult res;
    res.table = sweep_table();
    for (std::size_t n : o.ns) {
        const FamilyMember m = family(n);
        const TestClass H = classes(n);
        if (!H.vectors.empty() && static_cast<std::size_t>(H.vectors.front().size()) != n)
            throw DomainError("class vectors must have length n");
        const std::uint64_t seed = member_seed(o.seed, n);
        const auto traj = det_trajectory(*m.rule, to_vector(m.x0), o.t, false);
        const auto coeffs = coefficient_sequence(*m.rule, o.t, o.coefficient_budget, seed);
        LlnSweepPoint pt;
        pt.n = n;
        pt.rademacher = class_rademacher(H, n, seed);
        const auto bound = concentration_bound(coeffs, H.H, pt.rademacher, o.t, n, o.x);
        pt.bound = bound.value;
        pt.bound_unclamped = bound.inputs.at("unclamped");
        pt.threshold = bound.inputs.at("threshold");

        std::vector<double> sups(o.R, 0.0);
        SimulationOptions opts;
        opts.workers = o.workers;
        const Vector &pt_t = traj.p[static_cast<std::size_t>(o.t)];
        run_replicates(*m.rule, m.x0, o.t, o.R, seed, opts, [&](const StepView &v) {
            if (v.t != o.t)
                return;
            Vector d(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i)
                d[static_cast<Eigen::Index>(i)] = v.x[i] - pt_t[static_cast<Eigen::Index>(i)];
            sups[v.replicate] = class_sup(H, d);
        });
        std::size_t over = 0;
        for (double s : sups)
            over += s > pt.threshold;
        const double R = static_cast<double>(o.R);
        pt.exceedance = static_cast<double>(over) / R;
        pt.exceedance_se = std::sqrt(pt.exceedance * (1.0 - pt.exceedance) / R);
        pt.mean = sample_mean(sups);
        std::sort(sups.begin(), sups.end());
        auto quant = [&](double p) {
            const double pos = p * (R - 1.0);
            const auto lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, sups.size() - 1);
            return sups[lo] + (pos - static_cast<double>(lo)) * (sups[hi] - sups[lo]);
        };
        pt.q50 = quant(0.5);
        pt.q90 = quant(0.9);
        pt.q99 = quant(0.99);

        const auto N = static_cast<std::int64_t>(n);
        const auto T = std::int64_t{o.t};
        res.table.add({o.model_id, N, T, NAN, std::string("sup_mean"), pt.mean, NAN, NAN});
        res.table.add({o.model_id, N, T, NAN, std::string("sup_q50"), pt.q50, NAN, NAN});
        res.table.add({o.model_id, N, T, NAN, std::string("sup_q90"), pt.q90, NAN, NAN});
        res.table.add({o.model_id, N, T, NAN, std::string("sup_q99"), pt.q99, NAN, NAN});
        res.table.add({o.model_id, N, T, NAN, std::string("event_threshold"), pt.threshold, NAN, NAN});
        res.table.add({o.model_id, N, T, NAN, std::string("rademacher"), pt.rademacher, NAN, NAN});
        res.table.add({o.model_id, N, T, NAN, std::string("exceedance"), pt.exceedance, pt.exceedance_se,
                       pt.bound});
        res.table.add({o.model_id, N, T, NAN, std::string("bound_unclamped"), pt.bound_unclamped, NAN, NAN});
        res.points.push_back(pt);
    }
    return res;
}

} // namespace occlab
