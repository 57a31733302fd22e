#pragma once

#include "occlab/rng.hpp"
#include "occlab/rule.hpp"
#include "occlab/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace occlab {

/// R replicate trajectories X_0..X_T, optionally with the coupled
/// independent-node chain W_t and the discrepancy flags J_{i,t}.
struct BinaryEnsemble
{
    std::size_t n = 0;
    int T = 0;
    std::size_t R = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint8_t> states;      ///< [(r*(T+1) + t)*n + i]
    std::vector<std::uint8_t> coupled;     ///< same layout, empty when uncoupled
    std::vector<std::uint8_t> discrepancy; ///< same layout, empty when uncoupled

    bool is_coupled() const { return !coupled.empty(); }
    std::span<const std::uint8_t> state(std::size_t r, int t) const;
    std::span<const std::uint8_t> coupled_state(std::size_t r, int t) const;
    std::span<const std::uint8_t> discrepancy_state(std::size_t r, int t) const;

    /// Jbar_t = n^-1 sum_i J_{i,t} for replicate r.
    double jbar(std::size_t r, int t) const;

private:
    std::size_t offset(std::size_t r, int t) const;
};

/// One transition of the chain: node i draws U_{i,t} from `rng` and becomes
/// occupied iff U <= S_i(x) (when occupied) or U <= C_i(x) (when empty).
/// Rules without a split use U <= P_i(x), which has the same law.
BitState step(const OccupancyRule &rule, const BitState &x, int t, const CounterRng &rng);

struct CoupledState
{
    BitState x; ///< X_t
    BitState w; ///< W_t
    BitState j; ///< J_{.,t}
};

/// Joint update of X (thresholds evaluated at X_t) and W (thresholds at the
/// deterministic p_t) driven by the same uniforms.
CoupledState coupled_step(const OccupancyRule &rule, const CoupledState &state, const Vector &p_det,
                          int t, const CounterRng &rng);

/// What the streaming driver hands to observers after each time step.
struct StepView
{
    std::size_t replicate;
    int t;
    const BitState &x;
    const BitState *w; ///< null when uncoupled
    const BitState *j; ///< null when uncoupled
};

struct SimulationOptions
{
    bool couple = false;
    /// Deterministic trajectory p_0..p_T, required when couple is set.
    std::span<const Vector> p_traj;
    /// Worker threads; 0 selects the hardware concurrency. Results do not depend on it.
    unsigned workers = 0;
};

/// Streams R replicates through `observer` (called for t = 0..T). Replicate r
/// uses the stream keyed (seed, r); observers are invoked concurrently for
/// different replicates and must only touch replicate-owned state.
void run_replicates(const OccupancyRule &rule, const BitState &x0, int T, std::size_t R,
                    std::uint64_t seed, const SimulationOptions &options,
                    const std::function<void(const StepView &)> &observer);

/// Materialises every replicate in memory.
BinaryEnsemble simulate_ensemble(const OccupancyRule &rule, const BitState &x0, int T, std::size_t R,
                                 std::uint64_t seed, const SimulationOptions &options = {});

/// Distribution over {0,1}^n (bit i of the index is node i) for t = 0..T.
using ExactLaw = std::vector<std::vector<double>>;

inline constexpr std::size_t kExactLawDefaultCap = 12;
inline constexpr std::size_t kExactLawHardCap = 16;

/// Forward iteration of the product-Bernoulli transition kernel.
/// Throws TooLarge when n exceeds n_cap (n_cap itself is limited to 16).
ExactLaw exact_law(const OccupancyRule &rule, const BitState &x0, int T,
                   std::size_t n_cap = kExactLawDefaultCap);

/// E X_i under a distribution over {0,1}^n.
Vector marginal_means(const std::vector<double> &law, std::size_t n);

/// Encodes a binary state as a law index.
std::size_t state_index(std::span<const std::uint8_t> x);

} // namespace occlab
