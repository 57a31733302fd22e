#pragma once

#include "occlab/rule.hpp"
#include "occlab/types.hpp"

#include <array>
#include <functional>
#include <optional>

namespace occlab::models {

using Point = std::array<double, 2>; ///< second coordinate unused when d = 1

/// Colonization curve c: [0, inf) -> [0, 1] with bounded derivatives.
struct ColonizationCurve
{
    enum class Kind
    {
        rational,    ///< b y / (1 + b y)
        exponential, ///< 1 - exp(-b y)
    };
    Kind kind = Kind::rational;
    double b = 1.0;

    double value(double y) const;
    double d1(double y) const;
    double d2(double y) const;
    /// sup over [0, inf) of |c^(k)| for k = 1, 2, 3.
    double sup_derivative(int k) const;
};

using SpatialFn = std::function<double(const Point &, int)>;

/// Incidence-function model on Omega = [0,1]^d with weights
/// A_{i,t} = a_t(z_i)/n, survival s_t(z_i) and kernel D = exp(-|z - z'|/ell).
struct HanskiModel
{
    int dim = 1;
    std::vector<Point> z;
    SpatialFn a;  ///< weight density a_t(z)
    SpatialFn s;  ///< survival probability s_t(z)
    ColonizationCurve c;
    double ell = 0.2;
    bool homogeneous = true;
    std::size_t grid = 512; ///< cells for the limit recursion (per side sqrt(G) when d = 2)

    /// Optional per-patch values (from a patch table); override a and s in the rule.
    std::optional<Vector> patch_a;
    std::optional<Vector> patch_s;

    std::size_t size() const { return z.size(); }
    double kernel(const Point &u, const Point &v) const;
    double weight_density(const Point &u, int t) const { return a(u, t); }
    void validate() const;

    /// z_i = (i - 1/2)/n on [0,1], constant a and s.
    static HanskiModel equidistributed(std::size_t n, double a, double s, double b = 1.0,
                                       double ell = 0.2);
};

RulePtr hanski_rule(const HanskiModel &model);

/// Midpoint grid on [0,1]^d.
struct HanskiGrid
{
    std::vector<Point> nodes;
    std::vector<double> weights;
    std::size_t size() const { return nodes.size(); }
};

HanskiGrid make_grid(int dim, std::size_t G);

/// Densities (w.r.t. m) of pi_t and sigma_t and the connectivity C_t on the
/// grid, t = 0..T.
struct HanskiLimit
{
    HanskiGrid grid;
    std::vector<Vector> pi;
    std::vector<Vector> sigma;
    std::vector<Vector> C;
    Matrix kernel; ///< D(z_g, z_h) * m-weight of cell h

    /// int h dpi_t by quadrature.
    double integrate_pi(const Vector &h, int t) const;
};

/// Advances pi_{t+1} = s pi + c[C](1 - pi) and the sigma_t density recursion
/// from sigma_0 = 0. pi0 holds the initial density on the grid.
HanskiLimit hanski_limit_measure(const HanskiModel &model, const Vector &pi0, int T);

/// (J_t h)(z) = (s_t - c[C_t]) h(z) + a_t(z) int D(z, y) h(y) c'[C_t(y)] (1 - pi_t(y)) m(dy).
Vector hanski_apply_J(const HanskiModel &model, const HanskiLimit &limit, int t, const Vector &h);

/// Binary initial state whose empirical measure tracks the density pi0
/// (error diffusion along the patch order): X_i = floor(S_i) - floor(S_{i-1})
/// with S_i the running sum of pi0(z_i).
BitState error_diffusion_state(const HanskiModel &model, const std::function<double(const Point &)> &pi0);

} // namespace occlab::models
