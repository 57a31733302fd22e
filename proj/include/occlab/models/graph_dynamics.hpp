#pragma once

#include "occlab/gaussian.hpp"
#include "occlab/rule.hpp"
#include "occlab/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace occlab::models {

/// Attachment function f(u) = c0 + c1 u + c2 u^2 on [0,1].
struct AttachmentFn
{
    double c0 = 0.1;
    double c1 = 0.6;
    double c2 = 0.0;

    double value(double u) const { return c0 + u * (c1 + u * c2); }
    double d1(double u) const { return c1 + 2.0 * c2 * u; }
    double d2(double) const { return 2.0 * c2; }
    /// sup over [0,1] of |f^(k)|, k = 1, 2, 3.
    double sup_derivative(int k) const;
    /// f must map [0,1] into [0,1].
    void validate() const;
};

/// Dynamic random graph on a host graph: each host edge is a node of the
/// occupancy process. A present edge survives with probability q_t; an absent
/// host edge ij appears with probability f((deg i + deg j)/(2v)).
struct GraphDynModel
{
    std::size_t v = 0;                                         ///< vertices
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges; ///< host edges, i < j
    std::vector<double> q{0.6}; ///< retention q_t; the last entry is reused for later t
    AttachmentFn f;

    std::size_t size() const { return edges.size(); }
    double q_at(int t) const;
    void validate() const;

    static GraphDynModel complete(std::size_t v, double q, AttachmentFn f);
    /// Host adjacency as a v x v 0/1 matrix.
    Matrix host() const;
};

/// Edge-node rule; degrees in C_e leave out edge e itself (this only matters
/// off the vertices of the cube, where it keeps C_e independent of x_e).
RulePtr graph_rule(const GraphDynModel &model);

/// Host edge e present iff W0(x_i, x_j) >= 1/2 at the midpoints x_i = (i + 1/2)/v.
BitState graph_state_from_graphon(const GraphDynModel &model,
                                  const std::function<double(double, double)> &W0);

/// Symmetric v x v matrix of an edge-node vector.
Matrix edge_matrix(const GraphDynModel &model, const Vector &x);
Matrix edge_matrix(const GraphDynModel &model, std::span<const std::uint8_t> x);

/// W_{t+1} = q W_t + W (1 - W_t) f[(d(x) + d(y))/2] on the step representation.
Matrix graphon_step(const Matrix &Wt, const Matrix &host, double q, const AttachmentFn &f);

/// Graphon limit W_0..W_T together with the variance density
/// s_{t+1} = q(1-q) W_t + W w(1-w)(1 - W_t) + (q - w)^2 s_t, s_0 = 0.
struct GraphonTrajectory
{
    Matrix host;
    std::vector<Matrix> W;
    std::vector<Matrix> s;
    /// One-step part alone, q(1-q) W_{t-1} + W w(1-w)(1 - W_{t-1}); zero at t = 0.
    std::vector<Matrix> noise;
};

GraphonTrajectory graphon_trajectory(const Matrix &W0, const Matrix &host, const GraphDynModel &model,
                                     int T);

struct CltFunctionals
{
    Matrix Lambda; ///< 3 int W_t(x,z) W_t(z,y) dz
    Matrix JU;     ///< J_t U
    double sigma2_next = 0.0; ///< sigma^2_{t+1}[U]
};

/// Lambda_t, J_t U and sigma^2_{t+1}[U] at step t of the trajectory. J_t is
/// the linearisation of the graphon map at W_t:
/// W(x,y){U(x,y)(q - w_t(x,y)) + 1/2 int W(x,z)(1 - W_t(x,z)) U(x,z) f'[..] + (y,z) term dz},
/// and sigma^2_t[U] = int U^2 s_t / int W (the average over host edges).
CltFunctionals clt_functionals(const GraphonTrajectory &traj, const GraphDynModel &model, int t,
                               const Matrix &U);

/// sigma_t^2[U] with s_t (marginal) or with the one-step density (conditional).
double graphon_sigma2(const GraphonTrajectory &traj, int t, const Matrix &U,
                      NoiseModel noise = NoiseModel::marginal);
Matrix graphon_apply_J(const GraphonTrajectory &traj, const GraphDynModel &model, int t, const Matrix &U);
Matrix triangle_kernel(const Matrix &W);

/// V_t[U] = sum_{r=1}^t sigma_r^2[J_r ... J_{t-1} U].
double graphon_variance(const GraphonTrajectory &traj, const GraphDynModel &model, int t,
                        const Matrix &U, NoiseModel noise = NoiseModel::marginal);

struct CutNorm
{
    double value = 0.0;
    bool exact = false;
    std::string method;
};

inline constexpr std::size_t kCutNormExactCap = 16;

/// ||M||_box = v^-2 max_{S,T} |sum_{i in S, j in T} M_ij| for the step kernel
/// M. Exact enumeration for v <= 16, otherwise TooLarge unless `heuristic`.
CutNorm cut_norm(const Matrix &M, bool heuristic = false, std::uint64_t seed = 0);

/// Exact value by enumerating u with the best v per sign.
double cut_norm_exact(const Matrix &M);

/// Best of `restarts` alternating local searches; a lower bound.
double cut_norm_heuristic(const Matrix &M, std::size_t restarts = 200, std::uint64_t seed = 0);

/// Enumerates every (u, v) pair (v <= 12); test oracle.
double cut_norm_bruteforce(const Matrix &M);

/// (1/v^3) sum_{ijk} M_ij M_jk M_ik
double triangle_density(const Matrix &M);

/// t(F, M) for a simple graph F on k <= 5 vertices given as an edge list.
double homomorphism_density(std::size_t k, const std::vector<std::pair<int, int>> &F, const Matrix &M);

} // namespace occlab::models
