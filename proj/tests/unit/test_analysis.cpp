#include <doctest.h>

#include "occlab/analysis.hpp"
#include "occlab/deterministic.hpp"
#include "occlab/errors.hpp"
#include "occlab/io.hpp"
#include "occlab/models/spreading.hpp"
#include "occlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace occlab;
using namespace occlab::models;

namespace {

std::vector<double> normal_sample(std::size_t N, std::uint64_t seed, double m = 0.0, double s = 1.0)
{
    const CounterRng rng(seed, 0, Stream::auxiliary);
    std::vector<double> x(N);
    for (std::size_t i = 0; i < N; ++i)
        x[i] = m + s * rng.normal(0, i);
    return x;
}

double Phi(double x, double m, double v)
{
    return 0.5 * std::erfc(-(x - m) / std::sqrt(2.0 * v));
}

double ecdf(const std::vector<double> &x, double y)
{
    return static_cast<double>(std::count_if(x.begin(), x.end(), [&](double a) { return a <= y; })) /
           static_cast<double>(x.size());
}

// sup |F_n - Phi| checked at every sample point from both sides
double ks_oracle(const std::vector<double> &x, double m, double v)
{
    double D = 0.0;
    for (double a : x) {
        const double left = static_cast<double>(std::count_if(x.begin(), x.end(), [&](double b) { return b < a; })) /
                            static_cast<double>(x.size());
        D = std::max({D, std::abs(ecdf(x, a) - Phi(a, m, v)), std::abs(left - Phi(a, m, v))});
    }
    return D;
}

// midpoint rule for int |F_n - Phi|
double w1_oracle(std::vector<double> x, double m, double v)
{
    std::sort(x.begin(), x.end());
    const double s = std::sqrt(v);
    const double lo = std::min(x.front(), m) - 12 * s, hi = std::max(x.back(), m) + 12 * s;
    const int K = 400000;
    const double h = (hi - lo) / K;
    double total = 0.0;
    std::size_t idx = 0;
    for (int k = 0; k < K; ++k) {
        const double y = lo + (k + 0.5) * h;
        while (idx < x.size() && x[idx] <= y)
            ++idx;
        total += std::abs(static_cast<double>(idx) / static_cast<double>(x.size()) - Phi(y, m, v)) * h;
    }
    return total;
}

} // namespace

TEST_CASE("ks statistic against a normal matches the direct sup")
{
    auto x = normal_sample(60, 3, 0.2, 1.5);
    x.push_back(x[5]); // a tie
    x.push_back(x[5]);
    CHECK(ks_statistic(x, NormalTarget{0.0, 2.0}) == doctest::Approx(ks_oracle(x, 0.0, 2.0)).epsilon(1e-12));
    CHECK(ks_statistic(x, NormalTarget{0.2, 2.25}) == doctest::Approx(ks_oracle(x, 0.2, 2.25)).epsilon(1e-12));
}

TEST_CASE("ks is invariant under increasing affine maps")
{
    const auto x = normal_sample(80, 5);
    std::vector<double> y;
    for (double a : x)
        y.push_back(3.0 * a - 2.0);
    CHECK(ks_statistic(y, NormalTarget{-2.0, 9.0}) == doctest::Approx(ks_statistic(x, NormalTarget{0.0, 1.0})).epsilon(1e-10));
}

TEST_CASE("ks of a large normal sample is small")
{
    const auto x = normal_sample(20000, 11);
    CHECK(ks_statistic(x, NormalTarget{0.0, 1.0}) < 1.63 / std::sqrt(20000.0));
}

TEST_CASE("point-mass targets reduce to a two-sample distance")
{
    const std::vector<double> x{-1.0, 1.0};
    CHECK(ks_statistic(x, NormalTarget{0.0, 0.0}) == doctest::Approx(0.5));
    CHECK(w1_statistic(x, NormalTarget{0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(ks_statistic(std::vector<double>{0.0, 0.0, 0.0}, NormalTarget{0.0, 0.0}) == 0.0);
}

TEST_CASE("two-sample statistics")
{
    const auto a = normal_sample(40, 1), b = normal_sample(40, 2);
    CHECK(ks_statistic(a, a) == 0.0);
    CHECK(w1_statistic(a, a) == doctest::Approx(0.0).epsilon(1e-15));

    // equal sizes: W1 is the mean gap between order statistics
    auto sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double gap = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i)
        gap += std::abs(sa[i] - sb[i]);
    CHECK(w1_statistic(a, b) == doctest::Approx(gap / 40.0).epsilon(1e-12));

    double D = 0.0;
    for (double y : sa)
        D = std::max(D, std::abs(ecdf(a, y) - ecdf(b, y)));
    for (double y : sb)
        D = std::max(D, std::abs(ecdf(a, y) - ecdf(b, y)));
    CHECK(ks_statistic(a, b) == doctest::Approx(D));
}

TEST_CASE("w1 against a normal matches quadrature")
{
    const auto x = normal_sample(30, 7, 0.5, 0.8);
    CHECK(w1_statistic(x, NormalTarget{0.0, 1.0}) == doctest::Approx(w1_oracle(x, 0.0, 1.0)).epsilon(1e-5));
    CHECK(w1_statistic(x, NormalTarget{1.0, 0.3}) == doctest::Approx(w1_oracle(x, 1.0, 0.3)).epsilon(1e-5));
    // a single point against N(0,1): E|Z| = sqrt(2/pi)
    CHECK(w1_statistic(std::vector<double>{0.0}, NormalTarget{0.0, 1.0}) == doctest::Approx(std::sqrt(2.0 / M_PI)));
}

TEST_CASE("w1 is translation equivariant and scales with the sample")
{
    const auto x = normal_sample(50, 9);
    std::vector<double> y, z;
    for (double a : x) {
        y.push_back(a + 4.0);
        z.push_back(2.0 * a);
    }
    const double base = w1_statistic(x, NormalTarget{0.1, 1.2});
    CHECK(w1_statistic(y, NormalTarget{4.1, 1.2}) == doctest::Approx(base).epsilon(1e-10));
    CHECK(w1_statistic(z, NormalTarget{0.2, 4.8}) == doctest::Approx(2.0 * base).epsilon(1e-10));
}

TEST_CASE("distance reports carry a bootstrap error and reject tiny samples")
{
    const auto x = normal_sample(200, 4);
    const auto rep = ks_distance(x, NormalTarget{0.0, 1.0}, 1, 50);
    CHECK(rep.metric == "kolmogorov");
    CHECK(rep.size == 200);
    CHECK(rep.standard_error > 0.0);
    CHECK(rep.standard_error < 0.2);
    const auto again = ks_distance(x, NormalTarget{0.0, 1.0}, 1, 50);
    CHECK(again.standard_error == rep.standard_error);
    CHECK_THROWS_AS(ks_distance(std::vector<double>{1.0}, NormalTarget{}), DomainError);
    CHECK_THROWS_AS(ks_statistic(x, NormalTarget{0.0, -1.0}), DomainError);
}

TEST_CASE("sample moments and slopes")
{
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(sample_mean(x) == doctest::Approx(2.5));
    CHECK(sample_variance(x) == doctest::Approx(5.0 / 3.0));
    CHECK(loglog_slope({1, 10, 100}, {1, std::pow(10, -0.5), 0.1}) == doctest::Approx(-0.5));
    CHECK(std::isnan(loglog_slope({1, 2}, {1, 0})));
}

TEST_CASE("null quantiles are ordered and cached")
{
    const auto dir = std::filesystem::temp_directory_path() / "occlab_null_cache_test";
    std::filesystem::remove_all(dir);
    ::setenv("OCCLAB_CACHE", dir.c_str(), 1);
    const auto q = ks_null_quantiles(100, 200, 3);
    REQUIRE(q.size() == 4);
    CHECK(std::is_sorted(q.begin(), q.end()));
    // asymptotic 95% point of sqrt(N) D is 1.358
    CHECK(q[2] * 10.0 == doctest::Approx(1.358).epsilon(0.2));
    CHECK(std::filesystem::exists(dir / "ks_null_n100_r200_s3.csv"));
    const auto cached = ks_null_quantiles(100, 200, 3);
    for (std::size_t k = 0; k < 4; ++k)
        CHECK(cached[k] == q[k]);
    ::unsetenv("OCCLAB_CACHE");
    std::filesystem::remove_all(dir);
}

TEST_CASE("projections")
{
    const auto model = SpreadingModel::mean_field(20, 1.5, 0.3);
    const auto rule = spreading_rule(model);
    const BitState x0(20, 1);
    const auto traj = det_trajectory(*rule, to_vector(x0), 3, false);
    const auto ens = simulate_ensemble(*rule, x0, 3, 30, 8);

    const auto zero = project(ens, traj.p, Vector::Zero(20), 2);
    CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));

    const Vector h = Vector::LinSpaced(20, -1.0, 1.0);
    const auto direct = project(ens, traj.p, h, 3);
    const auto streamed = simulate_projections(*rule, x0, 3, 30, 8, traj.p, {h, Vector::Ones(20)}, 3);
    for (std::size_t r = 0; r < 30; ++r)
        CHECK(streamed.at(0, 3)[r] == doctest::Approx(direct[r]).epsilon(1e-14));
    // at t = 0 the state is the deterministic start
    CHECK(streamed.at(1, 0)[0] == doctest::Approx(0.0));
    CHECK_THROWS_AS(project(ens, traj.p, Vector::Ones(7), 1), DomainError);
}

TEST_CASE("test classes")
{
    const auto H = sign_vector_class(10, {1, 4, 7});
    CHECK(H.vectors.size() == 8);
    CHECK(H.H == 1.0);
    CHECK(H.support == std::vector<std::size_t>{1, 4, 7});
    Vector d = Vector::Zero(10);
    d[1] = 0.3;
    d[4] = -0.2;
    d[7] = 0.1;
    d[0] = 5.0; // off the support
    CHECK(class_sup(H, d) == doctest::Approx(0.6 / 10.0));
    // sup over all signs of sum eps_i h_i is k, so the average is k/n
    CHECK(class_rademacher(H, 10, 1) == doctest::Approx(3.0 / 10.0));
    CHECK_THROWS_AS(sign_vector_class(30, std::vector<std::size_t>(21, 0)), TooLarge);
    CHECK_THROWS_AS(sign_vector_class(5, {6}), DomainError);
}

TEST_CASE("clt and lln sweeps produce complete tables")
{
    ModelFamily family = [](std::size_t n) {
        const auto model = SpreadingModel::mean_field(n, 1.5, 0.3);
        return FamilyMember{spreading_rule(model), BitState(n, 1), Vector::Ones(static_cast<Eigen::Index>(n))};
    };
    CltSweepOptions o;
    o.model_id = "mf";
    o.ns = {20, 40};
    o.R = 200;
    o.seed = 4;
    const auto res = clt_sweep(family, o);
    REQUIRE(res.points.size() == 2);
    for (const auto &pt : res.points) {
        CHECK(pt.variance > 0.0);
        CHECK(pt.empirical_variance == doctest::Approx(pt.variance).epsilon(0.35));
        CHECK(pt.ks.value < 0.2);
        CHECK(pt.bound_ks > 0.0);
    }
    CHECK(res.table.header.size() == 8);
    CHECK(res.table.rows.size() == 2 * 4 + 3);

    LlnSweepOptions lo;
    lo.model_id = "mf";
    lo.t = 2;
    lo.ns = {20, 40};
    lo.R = 100;
    ClassFamily classes = [](std::size_t n) { return sign_vector_class(n, {0, 1, 2, 3}); };
    const auto lln = lln_sweep(family, classes, lo);
    REQUIRE(lln.points.size() == 2);
    for (const auto &pt : lln.points) {
        CHECK(pt.q50 <= pt.q90);
        CHECK(pt.q90 <= pt.q99);
        CHECK(pt.exceedance >= 0.0);
        CHECK(pt.exceedance <= pt.bound + 3 * pt.exceedance_se + 1e-12);
        CHECK(pt.rademacher == doctest::Approx(4.0 / static_cast<double>(pt.n)));
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("doubles round-trip through text")
{
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
        const auto s = format_double(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(format_double(INFINITY) == "inf");
    CHECK(format_double(NAN) == "nan");
}

TEST_CASE("csv writing quotes where needed")
{
    Table t;
    t.header = {"a", "b,c"};
    t.add({std::string("x\"y"), 1.5});
    t.add({std::int64_t{3}, std::string("plain")});
    std::ostringstream out;
    write_csv(t, out);
    CHECK(out.str() == "a,\"b,c\"\n\"x\"\"y\",1.5\n3,plain\n");
    CHECK_THROWS(t.add({1.0}));
}

TEST_CASE("csv reading")
{
    const auto dir = std::filesystem::temp_directory_path() / "occlab_io_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "m.csv") << "0,0.5\n0.25,0\n";
        std::ofstream(dir / "bad.csv") << "0,0.5\n0.25\n";
        std::ofstream(dir / "nan.csv") << "0,x\n";
        std::ofstream(dir / "cols.csv") << "n,value\n10,0.5\n20,0.25\n";
    }
    const Matrix M = read_matrix_csv(dir / "m.csv");
    CHECK(M.rows() == 2);
    CHECK(M(0, 1) == 0.5);
    CHECK(M(1, 0) == 0.25);
    CHECK_THROWS_AS(read_matrix_csv(dir / "bad.csv"), SchemaError);
    CHECK_THROWS_AS(read_matrix_csv(dir / "nan.csv"), SchemaError);
    CHECK_THROWS_AS(read_matrix_csv(dir / "missing.csv"), SchemaError);
    const auto cols = read_numeric_csv(dir / "cols.csv");
    CHECK(cols.column("value") == std::vector<double>{0.5, 0.25});
    CHECK_THROWS_AS(cols.column("nope"), SchemaError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sha256")
{
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("quadrupling the replicates halves the bootstrap error")
{
    ModelFamily family = [](std::size_t n) {
        const auto model = SpreadingModel::mean_field(n, 1.5, 0.3);
        return FamilyMember{spreading_rule(model), BitState(n, 1), Vector::Ones(static_cast<Eigen::Index>(n))};
    };
    CltSweepOptions o;
    o.ns = {60};
    o.t = 2;
    o.seed = 11;
    o.R = 2000;
    const auto small = clt_sweep(family, o);
    o.R = 8000;
    const auto big = clt_sweep(family, o);
    const double ks_ratio = small.points[0].ks.standard_error / big.points[0].ks.standard_error;
    const double w1_ratio = small.points[0].w1.standard_error / big.points[0].w1.standard_error;
    CHECK(ks_ratio == doctest::Approx(2.0).epsilon(0.3));
    CHECK(w1_ratio == doctest::Approx(2.0).epsilon(0.3));
}
