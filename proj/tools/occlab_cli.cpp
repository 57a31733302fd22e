#include "occlab/acceptance.hpp"
#include "occlab/analysis.hpp"
#include "occlab/bounds.hpp"
#include "occlab/deterministic.hpp"
#include "occlab/errors.hpp"
#include "occlab/gaussian.hpp"
#include "occlab/io.hpp"
#include "occlab/models/descriptor.hpp"
#include "occlab/parallel.hpp"
#include "occlab/schema.hpp"
#include "occlab/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace occlab;
using namespace occlab::models;

namespace {

constexpr const char *kVersion = "0.1.0";

const std::vector<std::string> kTasks{"simulate", "deterministic", "gaussian",    "bounds",      "clt-sweep",
                                      "lln-sweep", "equilibrium",  "graphon",     "hanski-limit"};

// Typed params that remember what they resolved to (defaults included).
class Params
{
public:
    Params(const json &obj) : f_(obj, "params") {}

    double number(const std::string &k, std::optional<double> fb = std::nullopt)
    {
        const double v = f_.number(k, fb);
        resolved[k] = v;
        return v;
    }
    std::size_t count(const std::string &k, std::optional<std::size_t> fb = std::nullopt)
    {
        const auto v = f_.count(k, fb);
        resolved[k] = v;
        return v;
    }
    std::size_t positive(const std::string &k, std::optional<std::size_t> fb = std::nullopt)
    {
        const auto v = count(k, fb);
        if (v == 0)
            throw SchemaError(f_.where(k) + ": must be at least 1");
        return v;
    }
    int horizon(const std::string &k, int fb)
    {
        const auto v = count(k, static_cast<std::size_t>(fb));
        if (v > 100000)
            throw SchemaError(f_.where(k) + ": horizon above 100000");
        return static_cast<int>(v);
    }
    bool flag(const std::string &k, bool fb)
    {
        const bool v = f_.flag(k, fb);
        resolved[k] = v;
        return v;
    }
    std::string choice(const std::string &k, std::initializer_list<const char *> allowed, const std::string &fb)
    {
        const auto v = f_.choice(k, allowed, fb);
        resolved[k] = v;
        return v;
    }
    std::uint64_t seed()
    {
        if (!f_.has("seed")) {
            resolved["seed"] = 0;
            return 0;
        }
        const auto &v = f_.raw("seed");
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            throw SchemaError(f_.where("seed") + ": expected a nonnegative integer");
        resolved["seed"] = v;
        return v.get<std::uint64_t>();
    }
    // raw access; the caller stores what it resolved
    bool has(const std::string &k) const { return f_.has(k); }
    const json &raw(const std::string &k) const { return f_.raw(k); }
    std::string where(const std::string &k) const { return f_.where(k); }
    void finish() const { f_.finish(); }

    json resolved = json::object();

private:
    Fields f_;
};

std::vector<std::size_t> size_list(Params &p, const std::string &k)
{
    if (!p.has(k))
        throw SchemaError(p.where(k) + ": required list of sizes is missing");
    const auto &v = p.raw(k);
    if (!v.is_array() || v.empty())
        throw SchemaError(p.where(k) + ": expected a nonempty list of sizes");
    std::vector<std::size_t> out;
    for (const auto &e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 2)
            throw SchemaError(p.where(k) + ": sizes must be integers >= 2");
        out.push_back(e.get<std::size_t>());
    }
    p.resolved[k] = out;
    return out;
}

// Test vector spec: a name or an explicit list of length n.
json h_spec(Params &p, const std::string &k = "h", bool allow_list = true)
{
    if (!p.has(k)) {
        p.resolved[k] = "ones";
        return "ones";
    }
    const auto &v = p.raw(k);
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s != "ones" && s != "alternating" && s != "first_half" && s != "first")
            throw SchemaError(p.where(k) + ": must be ones, alternating, first_half, first or a list");
    } else if (!allow_list || !v.is_array()) {
        throw SchemaError(p.where(k) + (allow_list ? ": expected a name or a list of numbers" : ": expected a name"));
    }
    p.resolved[k] = v;
    return v;
}

Vector make_h(const json &spec, std::size_t n, const std::string &where = "params.h")
{
    const auto N = static_cast<Eigen::Index>(n);
    if (spec.is_array()) {
        if (spec.size() != n)
            throw SchemaError(where + ": list must have length " + std::to_string(n));
        Vector h(N);
        for (std::size_t i = 0; i < n; ++i) {
            if (!spec[i].is_number())
                throw SchemaError(where + ": entry " + std::to_string(i) + " is not a number");
            h[static_cast<Eigen::Index>(i)] = spec[i].get<double>();
        }
        return h;
    }
    const auto s = spec.get<std::string>();
    Vector h = Vector::Zero(N);
    if (s == "ones")
        h.setOnes();
    else if (s == "alternating")
        for (Eigen::Index i = 0; i < N; ++i)
            h[i] = i % 2 ? -1.0 : 1.0;
    else if (s == "first_half")
        h.head(N / 2).setOnes();
    else
        h[0] = 1.0;
    return h;
}

std::vector<double> q_list(Params &p, const std::string &k, std::vector<double> fb)
{
    std::vector<double> out;
    json res = json::array();
    if (!p.has(k)) {
        out = fb;
    } else {
        const auto &v = p.raw(k);
        if (!v.is_array() || v.empty())
            throw SchemaError(p.where(k) + ": expected a nonempty list of exponents");
        for (const auto &e : v) {
            if (e.is_string() && e.get<std::string>() == "inf")
                out.push_back(INFINITY);
            else if (e.is_number() && e.get<double>() >= 1.0)
                out.push_back(e.get<double>());
            else
                throw SchemaError(p.where(k) + ": exponents are numbers >= 1 or \"inf\"");
        }
    }
    for (double q : out)
        res.push_back(std::isinf(q) ? json("inf") : json(q));
    p.resolved[k] = res;
    return out;
}

NoiseModel noise_model(Params &p)
{
    return p.choice("noise", {"marginal", "conditional"}, "marginal") == "marginal" ? NoiseModel::marginal
                                                                                       : NoiseModel::conditional;
}

std::string provenance_of(const CoefficientSequence &c)
{
    return any_sampled(c, static_cast<int>(c.size()) - 1) ? "sampled" : "analytic";
}

// ---------------------------------------------------------------------------

struct Job
{
    std::string task;
    json model;
    fs::path base_dir;
    unsigned workers = 1;
    fs::path out;
};

struct Outcome
{
    json params;
    std::string provenance = "n/a";
    json summary = json::object();
};

void write_json(const json &j, const fs::path &path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json number_json(double x)
{
    return std::isfinite(x) ? json(x) : json(format_double(x));
}

Outcome task_simulate(const Job &job, Params &p)
{
    Outcome o;
    const auto spec = build_model(job.model, job.base_dir);
    const int T = p.horizon("T", 10);
    const auto R = p.positive("R", 1);
    const auto seed = p.seed();
    const bool couple = p.flag("couple", false);
    const bool states = p.flag("states", true);
    p.finish();

    const std::size_t n = spec.rule->size();
    const std::size_t steps = static_cast<std::size_t>(T + 1);
    if (states && R * steps * n > 200000000)
        throw TooLarge("states file would exceed 2e8 entries; set params.states to false");

    DeterministicTrajectory det;
    SimulationOptions opts;
    opts.workers = job.workers;
    if (couple) {
        det = det_trajectory(*spec.rule, to_vector(spec.x0), T);
        opts.couple = true;
        opts.p_traj = det.p;
    }
    std::vector<double> occ(R * steps), jbar(couple ? R * steps : 0);
    std::vector<std::uint8_t> all(states ? R * steps * n : 0);
    run_replicates(*spec.rule, spec.x0, T, R, seed, opts, [&](const StepView &v) {
        const std::size_t k = v.replicate * steps + static_cast<std::size_t>(v.t);
        std::size_t c = 0;
        for (auto b : v.x)
            c += b;
        occ[k] = static_cast<double>(c) / static_cast<double>(n);
        if (v.j) {
            std::size_t d = 0;
            for (auto b : *v.j)
                d += b;
            jbar[k] = static_cast<double>(d) / static_cast<double>(n);
        }
        if (states)
            std::copy(v.x.begin(), v.x.end(), all.begin() + static_cast<std::ptrdiff_t>(k * n));
    });

    if (states) {
        // one row per (replicate, t), replicate-major; occupancy.csv carries the index
        std::ofstream out(job.out / "states.csv", std::ios::binary);
        for (std::size_t i = 0; i < n; ++i)
            out << (i ? "," : "") << "x_" << i;
        out << '\n';
        for (std::size_t k = 0; k < R * steps; ++k) {
            for (std::size_t i = 0; i < n; ++i)
                out << (i ? "," : "") << static_cast<int>(all[k * n + i]);
            out << '\n';
        }
    }
    Table t;
    t.header = {"replicate", "t", "occupancy"};
    if (couple) {
        t.header.push_back("deterministic_mean");
        t.header.push_back("jbar");
    }
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t s = 0; s < steps; ++s) {
            std::vector<Cell> row{static_cast<std::int64_t>(r), static_cast<std::int64_t>(s), occ[r * steps + s]};
            if (couple) {
                row.emplace_back(det.p[s].mean());
                row.emplace_back(jbar[r * steps + s]);
            }
            t.add(std::move(row));
        }
    write_csv(t, job.out / "occupancy.csv");
    o.params = p.resolved;
    o.summary["n"] = n;
    return o;
}

Outcome task_deterministic(const Job &job, Params &p)
{
    Outcome o;
    const auto spec = build_model(job.model, job.base_dir);
    const int T = p.horizon("T", 10);
    const bool eq = p.flag("equilibrium", false);
    p.seed();
    p.finish();

    const std::size_t n = spec.rule->size();
    auto traj = det_trajectory(*spec.rule, to_vector(spec.x0), T);
    Table t;
    t.header = {"t", "mean"};
    for (std::size_t i = 0; i < n; ++i)
        t.header.push_back("p_" + std::to_string(i));
    for (int s = 0; s <= T; ++s) {
        const Vector &ps = traj.p[static_cast<std::size_t>(s)];
        std::vector<Cell> row{static_cast<std::int64_t>(s), ps.mean()};
        for (Eigen::Index i = 0; i < ps.size(); ++i)
            row.emplace_back(ps[i]);
        t.add(std::move(row));
    }
    write_csv(t, job.out / "trajectory.csv");
    if (eq) {
        attach_equilibrium(traj, *spec.rule);
        o.summary["equilibrium_converged"] = traj.equilibrium->converged;
        o.summary["equilibrium_iterations"] = traj.equilibrium->iterations;
        o.summary["equilibrium_residual"] = traj.equilibrium->residual;
        o.summary["equilibrium_mean"] = traj.equilibrium->p.mean();
        o.summary["r_J0"] = traj.r_J0;
        o.summary["r_J_inf"] = traj.r_J_inf;
        write_json(o.summary, job.out / "equilibrium.json");
    }
    o.params = p.resolved;
    return o;
}

Outcome task_gaussian(const Job &job, Params &p)
{
    Outcome o;
    const auto spec = build_model(job.model, job.base_dir);
    const int T = p.horizon("T", 5);
    const auto hs = h_spec(p);
    const auto noise = noise_model(p);
    const auto R = p.count("R", 0);
    const auto seed = p.seed();
    const bool store = p.flag("covariance", false);
    p.finish();

    const std::size_t n = spec.rule->size();
    if (store && n > 2000)
        throw TooLarge("covariance output is limited to n <= 2000");
    const Vector h = make_h(hs, n);
    const GaussianApprox approx(*spec.rule, to_vector(spec.x0), T, store, noise);

    std::vector<std::vector<double>> proj(static_cast<std::size_t>(T + 1), std::vector<double>(R));
    if (R > 0) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(n));
        for_each_gaussian_path(approx, R, seed, job.workers, [&](std::size_t r, int t, const Vector &Z) {
            proj[static_cast<std::size_t>(t)][r] = scale * h.dot(Z - approx.p(t));
        });
    }
    Table t;
    t.header = {"t", "mean_p", "variance", "sampled_variance", "sampled_variance_se"};
    for (int s = 0; s <= T; ++s) {
        const double var = s == 0 ? 0.0 : projected_variance(approx, h, s);
        double sv = NAN, se = NAN;
        if (R >= 2) {
            const auto &x = proj[static_cast<std::size_t>(s)];
            sv = sample_variance(x);
            se = bootstrap_se(x, [](std::span<const double> y) { return sample_variance(y); }, seed);
        }
        t.add({static_cast<std::int64_t>(s), approx.p(s).mean(), var, sv, se});
    }
    write_csv(t, job.out / "variance.csv");
    if (store) {
        Table c;
        const Matrix &S = approx.Sigma(T);
        for (Eigen::Index j = 0; j < S.cols(); ++j)
            c.header.push_back("col_" + std::to_string(j));
        for (Eigen::Index i = 0; i < S.rows(); ++i) {
            std::vector<Cell> row;
            for (Eigen::Index j = 0; j < S.cols(); ++j)
                row.emplace_back(S(i, j));
            c.add(std::move(row));
        }
        write_csv(c, job.out / "sigma_T.csv");
    }
    o.params = p.resolved;
    o.summary["noise"] = to_string(noise);
    return o;
}

Outcome task_bounds(const Job &job, Params &p)
{
    Outcome o;
    const auto spec = build_model(job.model, job.base_dir);
    const int t = static_cast<int>(p.positive("t", 3));
    const auto hs = h_spec(p);
    const auto qs = q_list(p, "q", {INFINITY, 1.0});
    const double r = p.number("r", 1.0);
    const double x = p.number("x", std::exp(2.0));
    const auto budget = p.positive("coefficient_budget", 64);
    const auto seed = p.seed();
    p.finish();
    if (r < 1.0)
        throw SchemaError("params.r: must be >= 1");

    const std::size_t n = spec.rule->size();
    const Vector h = make_h(hs, n);
    const auto coeffs = coefficient_sequence(*spec.rule, t, budget, seed);
    o.provenance = provenance_of(coeffs);

    Table ct;
    ct.header = {"t", "alpha", "beta", "Gamma", "gamma", "delta", "psi", "provenance"};
    for (std::size_t s = 0; s < coeffs.size(); ++s) {
        const auto &c = coeffs[s];
        ct.add({static_cast<std::int64_t>(s), c.alpha, c.beta, c.Gamma, c.gamma, c.delta, c.psi,
                std::string(to_string(c.provenance))});
    }
    write_csv(ct, job.out / "coefficients.csv");

    const GaussianApprox approx(*spec.rule, to_vector(spec.x0), t);
    // f(x) = n^-1 <h, x>: linear, so D2f = 0
    const Matrix Df = (h.cwiseAbs() / static_cast<double>(n)).transpose();
    const Matrix D2f = Matrix::Zero(1, static_cast<Eigen::Index>(n));
    const auto H = make_test_class({h}, "h");

    std::vector<std::pair<std::string, std::optional<BoundReport>>> reports;
    std::vector<std::string> failures;
    for (double q : qs) {
        const std::string tag = "q=" + format_double(q);
        try {
            reports.emplace_back("clt_rate " + tag, clt_rate_bound(coeffs, h, q, approx, t));
        } catch (const DegenerateSigma &e) {
            reports.emplace_back("clt_rate " + tag, std::nullopt);
            failures.push_back("clt_rate " + tag + ": " + e.what());
        }
        reports.emplace_back("jbar_moment " + tag, jbar_moment_bound(coeffs, q, t, n));
        reports.emplace_back("lqr_error " + tag + ",r=" + format_double(r),
                             lqr_error_bound(functional_norms(Df, D2f, q), coeffs, q, r, t, n));
    }
    reports.emplace_back("concentration", concentration_bound(coeffs, H.H, class_rademacher(H, n, seed), t, n, x));

    Table bt;
    bt.header = {"bound", "formula_id", "value", "vacuous", "provenance"};
    json all = json::array();
    for (const auto &[name, rep] : reports) {
        if (!rep) {
            bt.add({name, std::string("-"), NAN, std::string("-"), o.provenance});
            continue;
        }
        bt.add({name, rep->formula_id, rep->value, std::string(rep->vacuous ? "yes" : "no"),
                rep->coefficient_provenance});
        json j = rep->to_json();
        j["name"] = name;
        all.push_back(std::move(j));
    }
    write_csv(bt, job.out / "bounds.csv");
    write_json(json{{"constant", "C = 1"}, {"reports", all}, {"failures", failures}}, job.out / "bounds.json");
    o.params = p.resolved;
    return o;
}

ModelFamily family_from(const Job &job, const json &hs)
{
    return [model = job.model, base = job.base_dir, hs](std::size_t n) {
        auto spec = build_model(model, base, n);
        const std::size_t m = spec.rule->size();
        return FamilyMember{spec.rule, spec.x0, make_h(hs, m)};
    };
}

std::string family_provenance(const ModelFamily &family, const std::vector<std::size_t> &ns)
{
    for (auto n : ns) {
        if (!family(n).rule->analytic_coefficients(0))
            return "sampled";
    }
    return "analytic";
}

Outcome task_clt_sweep(const Job &job, Params &p)
{
    Outcome o;
    CltSweepOptions opt;
    opt.model_id = job.model.value("type", "model");
    opt.ns = size_list(p, "ns");
    opt.t = static_cast<int>(p.positive("t", 3));
    opt.R = p.positive("R", 10000);
    const auto hs = h_spec(p, "h", false);
    opt.noise = noise_model(p);
    opt.null_calibration = p.flag("null_calibration", false);
    opt.coefficient_budget = p.positive("coefficient_budget", 64);
    opt.seed = p.seed();
    p.finish();
    opt.workers = job.workers;

    const auto family = family_from(job, hs);
    o.provenance = family_provenance(family, opt.ns);
    const auto res = clt_sweep(family, opt);
    write_csv(res.table, job.out / "sweep.csv");
    o.summary = {{"ks_slope", number_json(res.ks_slope)},
                 {"w1_slope", number_json(res.w1_slope)},
                 {"ks_decreasing", res.ks_decreasing},
                 {"w1_decreasing", res.w1_decreasing},
                 {"noise", to_string(opt.noise)}};
    o.params = p.resolved;
    return o;
}

Outcome task_lln_sweep(const Job &job, Params &p)
{
    Outcome o;
    LlnSweepOptions opt;
    opt.model_id = job.model.value("type", "model");
    opt.ns = size_list(p, "ns");
    opt.t = static_cast<int>(p.positive("t", 3));
    opt.R = p.positive("R", 1000);
    opt.x = p.number("x", std::exp(2.0));
    opt.coefficient_budget = p.positive("coefficient_budget", 64);
    opt.seed = p.seed();

    // class: {"kind": "signs", "k": 10} or {"kind": "single", "h": name}
    json cls = p.has("class") ? p.raw("class") : json{{"kind", "signs"}, {"k", 10}};
    Fields cf(cls, "params.class");
    const auto kind = cf.choice("kind", {"signs", "single"}, "signs");
    json cres{{"kind", kind}};
    std::size_t k = 0;
    json single;
    if (kind == "signs") {
        k = cf.count("k", 10);
        if (k == 0 || k > 20)
            throw SchemaError("params.class.k: must lie in 1..20");
        cres["k"] = k;
    } else {
        single = cf.has("h") ? cf.raw("h") : json("ones");
        if (!single.is_string())
            throw SchemaError("params.class.h: expected a name");
        make_h(single, 2, "params.class.h");
        cres["h"] = single;
    }
    cf.finish();
    p.resolved["class"] = cres;
    p.finish();
    opt.workers = job.workers;

    const auto family = family_from(job, "ones");
    ClassFamily classes = [&](std::size_t n) {
        if (kind == "single")
            return make_test_class({make_h(single, n)}, single.get<std::string>());
        if (k > n)
            throw DomainError("class support exceeds the model size");
        std::vector<std::size_t> coords(k);
        for (std::size_t i = 0; i < k; ++i)
            coords[i] = i;
        return sign_vector_class(n, coords);
    };
    o.provenance = family_provenance(family, opt.ns);
    const auto res = lln_sweep(family, classes, opt);
    write_csv(res.table, job.out / "sweep.csv");
    o.params = p.resolved;
    return o;
}

Outcome task_equilibrium(const Job &job, Params &p)
{
    Outcome o;
    const auto spec = build_model(job.model, job.base_dir);
    const auto starts = p.positive("starts", 10);
    const double tol = p.number("tol", 1e-12);
    const auto max_iter = p.positive("max_iter", 1000000);
    const auto smith = p.count("smith_samples", 200);
    const int horizon = p.horizon("threshold_horizon", 500);
    const auto seed = p.seed();
    p.finish();
    if (!(tol > 0.0))
        throw SchemaError("params.tol: must be positive");

    const std::size_t n = spec.rule->size();
    const auto rep = multi_start_equilibrium(*spec.rule, random_starts(n, starts, seed), tol, max_iter, job.workers);
    Table st;
    st.header = {"start", "converged", "iterations", "residual", "mean", "distance_to_first"};
    for (std::size_t k = 0; k < rep.runs.size(); ++k) {
        const auto &e = rep.runs[k];
        st.add({static_cast<std::int64_t>(k), std::string(e.converged ? "yes" : "no"),
                static_cast<std::int64_t>(e.iterations), e.residual, e.p.mean(),
                (e.p - rep.runs.front().p).cwiseAbs().maxCoeff()});
    }
    write_csv(st, job.out / "starts.csv");
    Table et;
    et.header = {"i", "p"};
    for (Eigen::Index i = 0; i < rep.runs.front().p.size(); ++i)
        et.add({static_cast<std::int64_t>(i), rep.runs.front().p[i]});
    write_csv(et, job.out / "equilibrium.csv");

    json s{{"all_converged", rep.all_converged},
           {"max_disagreement", rep.max_disagreement},
           {"r_J_inf", spectral_radius_report(jacobian(*spec.rule, rep.runs.front().p, 0)).value}};
    if (smith > 0) {
        const auto sm = smith_check(*spec.rule, smith, seed);
        s["smith"] = {{"positivity", sm.positivity},
                      {"jacobian_monotonicity", sm.jacobian_monotonicity},
                      {"not_all_absorbing", sm.not_all_absorbing},
                      {"r_J0", sm.r_J0},
                      {"pairs_checked", sm.pairs_checked}};
    }
    if (spec.spreading) {
        const auto th = epidemic_threshold(*spec.spreading, horizon);
        s["threshold"] = {{"r_R", th.r_R},       {"mu", th.mu},
                          {"verdict", th.verdict}, {"sup_at_horizon", th.sup_at_horizon},
                          {"horizon", th.horizon}, {"r_J_inf", th.r_J_inf}};
    }
    write_json(s, job.out / "summary.json");
    o.summary = s;
    o.params = p.resolved;
    return o;
}

Matrix upsample(const Matrix &M, Eigen::Index G)
{
    const Eigen::Index v = M.rows();
    Matrix out(G, G);
    for (Eigen::Index a = 0; a < G; ++a)
        for (Eigen::Index b = 0; b < G; ++b)
            out(a, b) = M(a * v / G, b * v / G);
    return out;
}

Matrix block_mean(const Matrix &W, Eigen::Index v)
{
    const Eigen::Index b = W.rows() / v;
    Matrix out(v, v);
    for (Eigen::Index i = 0; i < v; ++i)
        for (Eigen::Index j = 0; j < v; ++j)
            out(i, j) = W.block(i * b, j * b, b, b).mean();
    return out;
}

Outcome task_graphon(const Job &job, Params &p)
{
    Outcome o;
    const auto spec = build_model(job.model, job.base_dir);
    if (!spec.graph)
        throw SchemaError("model.type: the graphon task needs a graph model");
    const auto &model = *spec.graph;
    const auto v = static_cast<Eigen::Index>(model.v);
    const int T = p.horizon("T", 3);
    const auto G = static_cast<Eigen::Index>(p.positive("grid", model.v));
    const auto R = p.count("R", 0);
    const auto seed = p.seed();
    p.finish();
    if (G % v != 0)
        throw SchemaError("params.grid: must be a multiple of model.v");

    const Matrix host_step = model.host();
    const bool complete = static_cast<std::size_t>(host_step.sum()) == model.v * (model.v - 1);
    if (G != v && !complete)
        throw SchemaError("params.grid: refining the grid needs the complete host");
    // the complete host refines to W = 1; otherwise stay on the v x v steps
    const Matrix host = G == v ? host_step : Matrix::Ones(G, G);
    const Matrix W0 = upsample(edge_matrix(model, spec.x0), G);
    const auto lim = graphon_trajectory(W0, host, model, T);

    // finite-v triangle densities and cut distances
    std::vector<std::vector<double>> tri(static_cast<std::size_t>(T + 1), std::vector<double>(R)),
        cut(static_cast<std::size_t>(T + 1), std::vector<double>(R));
    const bool exact_cut = model.v <= kCutNormExactCap;
    std::vector<Matrix> target;
    for (int t = 0; t <= T; ++t)
        target.push_back(block_mean(lim.W[static_cast<std::size_t>(t)], v));
    if (R > 0) {
        SimulationOptions opts;
        opts.workers = job.workers;
        run_replicates(*spec.rule, spec.x0, T, R, seed, opts, [&](const StepView &sv) {
            const Matrix A = edge_matrix(model, std::span<const std::uint8_t>(sv.x));
            const auto t = static_cast<std::size_t>(sv.t);
            tri[t][sv.replicate] = triangle_density(A);
            cut[t][sv.replicate] = cut_norm(A - target[t], !exact_cut, seed + sv.replicate).value;
        });
    }
    const auto det = det_trajectory(*spec.rule, to_vector(spec.x0), T);
    const double n = static_cast<double>(model.size()), vv = static_cast<double>(v);

    Table t;
    t.header = {"t", "edge_density", "triangle_density", "triangle_variance", "triangle_variance_conditional",
                "finite_triangle_mean", "finite_fluctuation_variance", "cut_distance_mean"};
    for (int s = 0; s <= T; ++s) {
        const auto S = static_cast<std::size_t>(s);
        const Matrix &W = lim.W[S];
        double var = 0.0, var_c = 0.0;
        if (s > 0) {
            const Matrix L = triangle_kernel(W);
            var = graphon_variance(lim, model, s, L);
            var_c = graphon_variance(lim, model, s, L, NoiseModel::conditional);
        }
        double fm = NAN, fv = NAN, cd = NAN;
        if (R >= 2) {
            const double tri_det = triangle_density(edge_matrix(model, det.p[S]));
            std::vector<double> y(R);
            for (std::size_t r = 0; r < R; ++r)
                y[r] = vv * vv / (2.0 * std::sqrt(n)) * (tri[S][r] - tri_det);
            fm = sample_mean(tri[S]);
            fv = sample_variance(y);
            cd = sample_mean(cut[S]);
        }
        t.add({static_cast<std::int64_t>(s), W.mean(), triangle_density(W), var, var_c, fm, fv, cd});
    }
    write_csv(t, job.out / "graphon.csv");
    o.summary["cut_norm"] = exact_cut ? "exact" : "heuristic lower bound";
    o.params = p.resolved;
    return o;
}

Outcome task_hanski_limit(const Job &job, Params &p)
{
    Outcome o;
    const auto spec = build_model(job.model, job.base_dir);
    if (!spec.hanski)
        throw SchemaError("model.type: the hanski-limit task needs a hanski model");
    const auto &model = *spec.hanski;
    const int T = p.horizon("T", 3);
    const auto R = p.count("R", 0);
    const auto seed = p.seed();
    std::vector<std::string> names{"one", "z", "square", "cosine"};
    if (p.has("h")) {
        const auto &v = p.raw("h");
        if (!v.is_array() || v.empty())
            throw SchemaError("params.h: expected a list of function names");
        names.clear();
        for (const auto &e : v) {
            const auto s = e.is_string() ? e.get<std::string>() : "";
            if (s != "one" && s != "z" && s != "square" && s != "cosine")
                throw SchemaError("params.h: functions are one, z, square, cosine");
            names.push_back(s);
        }
    }
    p.resolved["h"] = names;
    p.finish();

    const auto fn = [](const std::string &s, double z) {
        if (s == "one")
            return 1.0;
        if (s == "z")
            return z;
        if (s == "square")
            return z * z;
        return std::cos(2.0 * M_PI * z);
    };
    const double pi0 = spec.resolved.value("initial_density", 0.5);
    const auto grid = make_grid(model.dim, model.grid);
    const auto G = static_cast<Eigen::Index>(grid.size());
    const auto lim = hanski_limit_measure(model, Vector::Constant(G, pi0), T);

    Table dt;
    dt.header = {"t", "z", "pi", "sigma", "connectivity"};
    for (int t = 0; t <= T; ++t)
        for (Eigen::Index g = 0; g < G; ++g) {
            const auto S = static_cast<std::size_t>(t);
            dt.add({static_cast<std::int64_t>(t), grid.nodes[static_cast<std::size_t>(g)][0], lim.pi[S][g],
                    lim.sigma[S][g], lim.C[S][g]});
        }
    write_csv(dt, job.out / "density.csv");

    const std::size_t n = model.size(), steps = static_cast<std::size_t>(T + 1);
    // finite-n empirical measure <mu_t, h> per replicate
    std::vector<std::vector<double>> emp(names.size(), std::vector<double>(R * steps));
    if (R > 0) {
        std::vector<Vector> hz(names.size(), Vector(static_cast<Eigen::Index>(n)));
        for (std::size_t j = 0; j < names.size(); ++j)
            for (std::size_t i = 0; i < n; ++i)
                hz[j][static_cast<Eigen::Index>(i)] = fn(names[j], model.z[i][0]);
        SimulationOptions opts;
        opts.workers = job.workers;
        run_replicates(*spec.rule, spec.x0, T, R, seed, opts, [&](const StepView &sv) {
            for (std::size_t j = 0; j < names.size(); ++j) {
                double m = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    m += hz[j][static_cast<Eigen::Index>(i)] * sv.x[i];
                emp[j][sv.replicate * steps + static_cast<std::size_t>(sv.t)] = m / static_cast<double>(n);
            }
        });
    }
    Table it;
    it.header = {"t", "h", "limit", "finite_mean", "mean_abs_error"};
    for (std::size_t j = 0; j < names.size(); ++j) {
        Vector hg(G);
        for (Eigen::Index g = 0; g < G; ++g)
            hg[g] = fn(names[j], grid.nodes[static_cast<std::size_t>(g)][0]);
        for (int t = 0; t <= T; ++t) {
            const double L = lim.integrate_pi(hg, t);
            double fm = NAN, err = NAN;
            if (R > 0) {
                fm = err = 0.0;
                for (std::size_t r = 0; r < R; ++r) {
                    const double e = emp[j][r * steps + static_cast<std::size_t>(t)];
                    fm += e;
                    err += std::abs(e - L);
                }
                fm /= static_cast<double>(R);
                err /= static_cast<double>(R);
            }
            it.add({static_cast<std::int64_t>(t), names[j], L, fm, err});
        }
    }
    write_csv(it, job.out / "integrals.csv");
    o.params = p.resolved;
    return o;
}

Outcome dispatch(const Job &job, Params &p)
{
    if (job.task == "simulate")
        return task_simulate(job, p);
    if (job.task == "deterministic")
        return task_deterministic(job, p);
    if (job.task == "gaussian")
        return task_gaussian(job, p);
    if (job.task == "bounds")
        return task_bounds(job, p);
    if (job.task == "clt-sweep")
        return task_clt_sweep(job, p);
    if (job.task == "lln-sweep")
        return task_lln_sweep(job, p);
    if (job.task == "equilibrium")
        return task_equilibrium(job, p);
    if (job.task == "graphon")
        return task_graphon(job, p);
    return task_hanski_limit(job, p);
}

// ---------------------------------------------------------------------------
// config loading and the run driver

struct Loaded
{
    json config;
    std::string text;
    fs::path base_dir;
};

Loaded load_config(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw SchemaError(path.string() + ": cannot read config");
    std::stringstream ss;
    ss << in.rdbuf();
    Loaded l;
    l.text = ss.str();
    l.base_dir = path.parent_path();
    try {
        l.config = json::parse(l.text);
    } catch (const json::parse_error &e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, l.text.size());
        const auto line = 1 + std::count(l.text.begin(), l.text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw SchemaError(path.string() + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
    }
    // a manifest carries the resolved config it was produced from
    if (l.config.is_object() && l.config.contains("config") && l.config.contains("files"))
        l.config = l.config["config"];
    return l;
}

// "params.R: ..." -> line of the first "R" key in the text, when there is one
std::string with_line(const std::string &msg, const Loaded &l, const fs::path &path)
{
    if (msg.rfind(path.string(), 0) == 0)
        return msg;
    const auto colon = msg.find(": ");
    if (colon == std::string::npos)
        return msg;
    const auto field = msg.substr(0, colon);
    const auto dot = field.rfind('.');
    const auto key = "\"" + field.substr(dot == std::string::npos ? 0 : dot + 1) + "\"";
    // look inside the named section first
    std::size_t from = 0;
    for (const char *section : {"params", "model"}) {
        if (field.rfind(std::string(section) + ".", 0) == 0) {
            const auto at = l.text.find("\"" + std::string(section) + "\"");
            from = at == std::string::npos ? 0 : at;
        }
    }
    auto pos = l.text.find(key, from);
    if (pos == std::string::npos)
        pos = l.text.find(key);
    if (pos == std::string::npos)
        return path.string() + ": " + msg;
    const auto line = 1 + std::count(l.text.begin(), l.text.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
    return path.string() + ":" + std::to_string(line) + ": " + msg;
}

std::string utc_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunFlags
{
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
    bool verify = false;
};

// Executes one experiment into `out`; returns the manifest.
json execute(const Loaded &l, const std::string &forced_task, const RunFlags &fl, const fs::path &out,
             unsigned workers)
{
    const auto started = std::chrono::steady_clock::now();
    const Fields top(l.config, "config");
    const auto task = top.text("task", forced_task.empty() ? std::nullopt : std::optional<std::string>(forced_task));
    if (std::find(kTasks.begin(), kTasks.end(), task) == kTasks.end())
        throw SchemaError("config.task: unknown task \"" + task + "\"");
    if (!forced_task.empty() && task != forced_task)
        throw SchemaError("config.task: config is for \"" + task + "\" but the subcommand is \"" + forced_task + "\"");
    if (!top.has("model"))
        throw SchemaError("config.model: required model descriptor is missing");
    json params = top.has("params") ? top.raw("params") : json::object();
    if (!params.is_object())
        throw SchemaError("config.params: expected an object");
    if (fl.seed)
        params["seed"] = *fl.seed;
    if (top.has("output"))
        top.text("output");
    top.finish();

    Job job;
    job.task = task;
    job.base_dir = l.base_dir;
    job.workers = workers;
    job.out = out;
    // resolve the model once so the manifest carries every default
    job.model = build_model(top.raw("model"), l.base_dir).resolved;
    fs::create_directories(out);

    Params p(params);
    const auto res = dispatch(job, p);

    json resolved{{"task", task}, {"model", job.model}, {"params", res.params}};
    if (l.config.contains("output"))
        resolved["output"] = l.config["output"];
    json files = json::object();
    for (const auto &e : fs::directory_iterator(out)) {
        const auto name = e.path().filename().string();
        if (name == "manifest.json" || !e.is_regular_file())
            continue;
        files[name] = {{"sha256", sha256_file(e.path())}, {"bytes", e.file_size()}};
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest{{"version", kVersion},
                  {"task", task},
                  {"seed", res.params.value("seed", json(0))},
                  {"workers", workers},
                  {"started_utc", utc_now()},
                  {"wall_seconds", wall},
                  {"config", resolved},
                  {"config_sha256", sha256_hex(resolved.dump())},
                  {"coefficient_provenance", res.provenance},
                  {"bound_constant", "C = 1"},
                  {"summary", res.summary},
                  {"files", files}};
    write_json(manifest, out / "manifest.json");
    return manifest;
}

int run_command(const std::string &forced_task, const RunFlags &fl)
{
    Loaded l;
    const fs::path cfg(fl.config);
    try {
        l = load_config(cfg);
        const fs::path out = !fl.out.empty() ? fs::path(fl.out)
                             : l.config.is_object() && l.config.contains("output") && l.config["output"].is_string()
                                 ? fs::path(l.config["output"].get<std::string>())
                                 : fs::path("out");
        const unsigned workers = fl.workers == 0 ? default_workers() : fl.workers;
        const auto manifest = execute(l, forced_task, fl, out, workers);
        std::cout << "wrote " << manifest["files"].size() << " files to " << out.string() << '\n';

        if (fl.verify) {
            const unsigned other = workers > 1 ? workers / 2 : 2;
            const auto tmp = fs::temp_directory_path() / ("occlab_verify_" + std::to_string(::getpid()));
            fs::remove_all(tmp);
            const auto again = execute(l, forced_task, fl, tmp, other);
            std::size_t same = 0;
            std::vector<std::string> differ;
            for (const auto &[name, info] : manifest["files"].items()) {
                if (again["files"].contains(name) && again["files"][name]["sha256"] == info["sha256"])
                    ++same;
                else
                    differ.push_back(name);
            }
            if (again["files"].size() != manifest["files"].size())
                differ.push_back("(file set)");
            fs::remove_all(tmp);
            if (!differ.empty()) {
                std::cerr << "verify: outputs differ between " << workers << " and " << other << " workers:";
                for (const auto &d : differ)
                    std::cerr << ' ' << d;
                std::cerr << '\n';
                return 3;
            }
            std::cout << "verify: " << same << " files byte-identical at " << workers << " and " << other
                      << " workers\n";
        }
        return 0;
    } catch (const SchemaError &e) {
        std::cerr << "schema error: " << with_line(e.what(), l, cfg) << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"occupancy process experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    RunFlags fl;
    std::string chosen;
    const auto add_run_flags = [&](CLI::App *sub) {
        sub->add_option("--config", fl.config, "experiment config (or a manifest.json)")->required();
        sub->add_option("--out", fl.out, "output directory (overrides the config)");
        sub->add_option("--seed", fl.seed, "seed (overrides params.seed)");
        sub->add_option("--workers", fl.workers, "worker threads, 0 = all cores");
        sub->add_flag("--verify", fl.verify, "re-run at another worker count and compare outputs");
    };
    for (const auto &t : kTasks) {
        auto *sub = app.add_subcommand(t, "run the " + t + " task");
        add_run_flags(sub);
        sub->callback([&chosen, t] { chosen = t; });
    }
    auto *run = app.add_subcommand("run", "run the task named in the config");
    add_run_flags(run);
    run->callback([&chosen] { chosen = "run"; });

    AcceptanceOptions acc;
    std::vector<int> only;
    auto *verify = app.add_subcommand("verify", "run the acceptance suite");
    verify->add_option("--seed", acc.seed, "base seed");
    verify->add_option("--workers", acc.workers, "worker threads, 0 = all cores");
    verify->add_option("--repeat-workers", acc.repeat_workers, "worker threads of the determinism re-run");
    verify->add_option("--only", only, "criteria to run")->check(CLI::Range(1, 11));
    verify->callback([&chosen] { chosen = "verify"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (chosen == "verify") {
        acc.only.insert(only.begin(), only.end());
        acc.progress = &std::cerr;
        try {
            const auto results = run_acceptance(acc);
            for (const auto &r : results)
                std::cout << format_result(r) << '\n';
            const bool ok = all_passed(results);
            std::cout << (ok ? "all criteria passed" : "some criteria failed") << '\n';
            return ok ? 0 : 1;
        } catch (const std::exception &e) {
            std::cerr << "error: " << e.what() << '\n';
            return 3;
        }
    }
    return run_command(chosen == "run" ? "" : chosen, fl);
}
