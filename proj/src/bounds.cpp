#include "occlab/bounds.hpp"

#include "occlab/errors.hpp"
#include "occlab/rng.hpp"

#include <cmath>

namespace occlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_coeffs(const CoefficientSequence &coeffs, int upto)
{
    if (upto >= 0 && coeffs.size() < static_cast<std::size_t>(upto) + 1)
        throw DomainError("coefficient sequence is too short for the requested time");
}

void stamp_provenance(BoundReport &rep, const CoefficientSequence &coeffs, int upto)
{
    if (upto >= 0 && any_sampled(coeffs, upto)) {
        rep.lower_estimate_inputs = true;
        rep.coefficient_provenance = "sampled";
        rep.caveats.push_back("lower-estimate inputs: sampled coefficients");
    }
}

double lp_norm(const Eigen::ArrayXd &v, double p)
{
    if (v.size() == 0)
        return 0.0;
    if (std::isinf(p))
        return v.abs().maxCoeff();
    return std::pow(v.abs().pow(p).sum(), 1.0 / p);
}

} // namespace

nlohmann::json BoundReport::to_json() const
{
    nlohmann::json j;
    j["value"] = value;
    j["formula_id"] = formula_id;
    j["universal_constant"] = 1.0;
    j["inputs"] = inputs;
    j["coefficient_provenance"] = coefficient_provenance;
    j["lower_estimate_inputs"] = lower_estimate_inputs;
    j["vacuous"] = vacuous;
    j["caveats"] = caveats;
    return j;
}

double matrix_qr_norm(const Matrix &A, double q, double r)
{
    if (!(q >= 1.0) || !(r >= 1.0))
        throw DomainError("matrix norm exponents must be >= 1");
    const Eigen::ArrayXXd a = A.array().abs();
    if (q >= r) {
        Eigen::ArrayXd rows(a.rows());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            rows[i] = lp_norm(a.row(i).transpose(), q);
        return lp_norm(rows, r);
    }
    Eigen::ArrayXd cols(a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        cols[j] = lp_norm(a.col(j), r);
    return lp_norm(cols, q);
}

double induced_l1_norm(const Matrix &A)
{
    if (A.size() == 0)
        return 0.0;
    return A.cwiseAbs().colwise().sum().maxCoeff();
}

BoundReport clt_rate_bound(const CoefficientSequence &coeffs, const Vector &h, double q,
                           const GaussianApprox &approx, int t)
{
    if (!(q >= 1.0))
        throw DomainError("q must be >= 1");
    if (t < 1 || t > approx.horizon())
        throw DomainError("CLT bound needs 1 <= t <= T");
    check_coeffs(coeffs, t - 1);
    const std::size_t n = approx.size();
    const double inv_q = std::isinf(q) ? 0.0 : 1.0 / q;
    const double h_sup = h.cwiseAbs().maxCoeff();
    const double nn = static_cast<double>(n);

    BoundReport rep;
    rep.formula_id = "clt_rate";
    double sum = 0.0;
    bool independent = true;
    for (int s = 0; s < t; ++s) {
        independent = independent && coeffs[static_cast<std::size_t>(s)].psi == 0.0;
        const double k = kappa(coeffs, s, n);
        if (k == 0.0)
            continue; // kappa_0 = 0: the term vanishes whatever sigma is
        const Vector g = approx.propagate(s + 1, t, h);
        const double sig = std::sqrt(sigma_form(approx.p(s + 1), g, g));
        if (!(sig > kSigmaFloor))
            throw DegenerateSigma("sigma_" + std::to_string(s + 1) + "[D h] vanishes");
        sum += k * std::exp((4.0 - inv_q) * alpha_window(coeffs, s, t)) / std::pow(sig, 4.0 - 2.0 * inv_q);
    }
    rep.value = std::pow(h_sup, 4.0 - inv_q) * std::sqrt((1.0 + std::log(nn)) / nn) * sum;
    rep.inputs = {{"q", q}, {"t", t}, {"n", nn}, {"h_sup", h_sup}};
    if (independent)
        rep.caveats.push_back("Berry-Esseen regime: order improves to n^-1/2");
    stamp_provenance(rep, coeffs, t - 1);
    return rep;
}

FunctionalNorms functional_norms(const Matrix &Df_sup, const Matrix &D2f_sup, double q)
{
    FunctionalNorms out;
    out.Df_1 = induced_l1_norm(Df_sup);
    out.Df_2q = matrix_qr_norm(Df_sup, 2.0, q);
    out.D2f_1q = D2f_sup.size() == 0 ? 0.0 : matrix_qr_norm(D2f_sup, 1.0, q);
    return out;
}

BoundReport lqr_error_bound(const FunctionalNorms &norms, const CoefficientSequence &coeffs, double q,
                            double r, int t, std::size_t n)
{
    if (!(q >= 1.0) || !(r >= 1.0))
        throw DomainError("q and r must be >= 1");
    if (t < 1)
        throw DomainError("functional error bound needs t >= 1");
    if (norms.Df_1 < 0 || norms.Df_2q < 0 || norms.D2f_1q < 0 ||
        !std::isfinite(norms.Df_1 + norms.Df_2q + norms.D2f_1q))
        throw DomainError("derivative norms must be finite and nonnegative");
    check_coeffs(coeffs, t - 1);
    const double nn = static_cast<double>(n);
    double sum = 0.0;
    for (int s = 0; s < t; ++s)
        sum += (1.0 / nn + coeffs[static_cast<std::size_t>(s)].psi) *
               std::exp(4.0 * r * alpha_window(coeffs, s, t));
    BoundReport rep;
    rep.formula_id = "lqr_error";
    rep.value = 6.0 * std::sqrt(kPi) * nn * std::pow(r, 1.5) * norms.Df_1 * sum +
                std::sqrt(kPi * (q + r)) * norms.Df_2q + 0.5 * norms.D2f_1q;
    rep.inputs = {{"q", q},           {"r", r},
                  {"t", t},           {"n", nn},
                  {"Df_1", norms.Df_1}, {"Df_2q", norms.Df_2q},
                  {"D2f_1q", norms.D2f_1q}};
    stamp_provenance(rep, coeffs, t - 1);
    return rep;
}

BoundReport jbar_moment_bound(const CoefficientSequence &coeffs, double q, int t, std::size_t n)
{
    if (!(q >= 1.0))
        throw DomainError("q must be >= 1");
    if (t < 1)
        throw DomainError("moment bound needs t >= 1");
    check_coeffs(coeffs, t - 1);
    const double nn = static_cast<double>(n);
    if (std::isinf(q)) {
        // 2q grows without limit: no sup-norm statement
        BoundReport rep;
        rep.formula_id = "jbar_moment";
        rep.value = INFINITY;
        rep.inputs = {{"q", q}, {"t", t}, {"n", nn}};
        rep.caveats.push_back("q = inf: the moment bound is infinite");
        stamp_provenance(rep, coeffs, t - 1);
        return rep;
    }
    double sum = 0.0;
    for (int s = 0; s < t; ++s) {
        const auto &c = coeffs[static_cast<std::size_t>(s)];
        sum += (2.0 / nn + 3.0 * c.beta * std::sqrt(kPi * q) + c.gamma) *
               std::exp(4.0 * q * alpha_window(coeffs, s, t));
    }
    BoundReport rep;
    rep.formula_id = "jbar_moment";
    rep.value = 2.0 * q * sum;
    rep.inputs = {{"q", q}, {"t", t}, {"n", nn}};
    stamp_provenance(rep, coeffs, t - 1);
    return rep;
}

double concentration_psi(const CoefficientSequence &coeffs, int t, std::size_t n)
{
    check_coeffs(coeffs, t);
    double max_psi = 0.0;
    for (int s = 0; s <= t; ++s)
        max_psi = std::max(max_psi, coeffs[static_cast<std::size_t>(s)].psi);
    return 12.0 * std::sqrt(kPi) * (1.0 / static_cast<double>(n) + max_psi);
}

double concentration_threshold(const CoefficientSequence &coeffs, double H, double rad, int t,
                               std::size_t n, double x)
{
    return H * t * concentration_psi(coeffs, t, n) * x + rad;
}

BoundReport concentration_bound(const CoefficientSequence &coeffs, double H, double rad, int t,
                                std::size_t n, double x)
{
    if (!(x > 1.0))
        throw DomainError("concentration bound needs x > 1");
    if (t < 0)
        throw DomainError("time must be nonnegative");
    const double nn = static_cast<double>(n);
    const double Psi = concentration_psi(coeffs, t, n);
    const double lx = std::log(x);
    const double a0t = alpha_window(coeffs, 0, t);
    double value = std::exp(-0.5 * nn * t * t * x * x * Psi * Psi);
    for (int s = 1; s <= t; ++s) {
        const double a0s = alpha_window(coeffs, 0, s);
        value += std::exp(-4.0 * a0s * lx * lx / ((1.0 + 4.0 * a0t) * (1.0 + 4.0 * a0t)) + 4.0 * a0s);
    }
    BoundReport rep;
    rep.formula_id = "concentration";
    rep.inputs = {{"H", H},     {"rad", rad},     {"t", t},
                  {"n", nn},    {"x", x},         {"Psi", Psi},
                  {"threshold", H * t * Psi * x + rad}, {"unclamped", value}};
    if (value > 1.0) {
        value = 1.0;
        rep.vacuous = true;
        rep.caveats.push_back("vacuous: bound exceeds one");
    }
    rep.value = value;
    stamp_provenance(rep, coeffs, t);
    return rep;
}

MonteCarloEstimate rademacher_mc(const std::vector<Vector> &H_set, std::size_t R, std::uint64_t seed)
{
    if (H_set.empty())
        throw DomainError("function class is empty");
    if (R < 2)
        throw DomainError("need at least two Rademacher draws");
    const Eigen::Index n = H_set.front().size();
    for (const auto &h : H_set) {
        if (h.size() != n)
            throw DomainError("class vectors must share one length");
    }
    Matrix Hm(static_cast<Eigen::Index>(H_set.size()), n);
    for (std::size_t k = 0; k < H_set.size(); ++k)
        Hm.row(static_cast<Eigen::Index>(k)) = H_set[k].transpose();
    double s1 = 0.0, s2 = 0.0;
    Vector sigma(n);
    for (std::size_t r = 0; r < R; ++r) {
        const CounterRng rng(seed, r, Stream::rademacher);
        for (Eigen::Index i = 0; i < n; ++i)
            sigma[i] = (rng.bits(0, static_cast<std::uint64_t>(i)) & 1u) ? 1.0 : -1.0;
        const double v = (Hm * sigma).maxCoeff() / static_cast<double>(n);
        s1 += v;
        s2 += v * v;
    }
    const double Rd = static_cast<double>(R);
    MonteCarloEstimate est;
    est.value = s1 / Rd;
    est.standard_error = std::sqrt(std::max(0.0, s2 / Rd - est.value * est.value) / (Rd - 1.0));
    return est;
}

double rademacher_exact(const std::vector<Vector> &H_set)
{
    if (H_set.empty())
        throw DomainError("function class is empty");
    const Eigen::Index n = H_set.front().size();
    if (n > 24)
        throw TooLarge("exact Rademacher enumeration needs n <= 24");
    Matrix Hm(static_cast<Eigen::Index>(H_set.size()), n);
    for (std::size_t k = 0; k < H_set.size(); ++k) {
        if (H_set[k].size() != n)
            throw DomainError("class vectors must share one length");
        Hm.row(static_cast<Eigen::Index>(k)) = H_set[k].transpose();
    }
    const std::size_t patterns = std::size_t{1} << n;
    double total = 0.0;
    Vector sigma(n);
    for (std::size_t m = 0; m < patterns; ++m) {
        for (Eigen::Index i = 0; i < n; ++i)
            sigma[i] = (m >> i & 1u) ? 1.0 : -1.0;
        total += (Hm * sigma).maxCoeff();
    }
    return total / static_cast<double>(patterns) / static_cast<double>(n);
}

double massart_bound(double H, std::size_t class_size, std::size_t n)
{
    if (class_size == 0 || n == 0)
        throw DomainError("class size and n must be positive");
    return H * std::sqrt(2.0 * std::log(static_cast<double>(class_size)) / static_cast<double>(n));
}

BoundReport linearization_error_bound(const LinearizationNorms &norms, const CoefficientSequence &coeffs,
                                      int t, std::size_t n)
{
    if (t < 1)
        throw DomainError("linearisation bound needs t >= 1");
    if (norms.max_second < 0 || norms.max_third_row_sum < 0 ||
        !std::isfinite(norms.max_second + norms.max_third_row_sum))
        throw DomainError("derivative norms must be finite and nonnegative");
    check_coeffs(coeffs, t - 1);
    const double nn = static_cast<double>(n);
    double sum = 0.0;
    for (int s = 0; s < t; ++s) {
        const double psi = coeffs[static_cast<std::size_t>(s)].psi;
        sum += (1.0 / nn + nn * psi * psi) * t * std::exp(16.0 * alpha_window(coeffs, s, t));
    }
    BoundReport rep;
    rep.formula_id = "linearization";
    rep.value = std::sqrt(1.0 + std::log(nn)) * (1.0 + sum) *
                (nn * norms.max_second + std::sqrt(nn) * norms.max_third_row_sum);
    rep.inputs = {{"t", t},
                  {"n", nn},
                  {"max_second", norms.max_second},
                  {"max_third_row_sum", norms.max_third_row_sum}};
    stamp_provenance(rep, coeffs, t - 1);
    return rep;
}

} // namespace occlab
