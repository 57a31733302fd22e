#pragma once

#include "occlab/models/domany_kinzel.hpp"
#include "occlab/models/graph_dynamics.hpp"
#include "occlab/models/hanski.hpp"
#include "occlab/models/spreading.hpp"
#include "occlab/rule.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace occlab::models {

/// A model built from a JSON descriptor. `resolved` is the descriptor with
/// every default filled in, so it rebuilds the same model on its own.
///
/// Types and their keys (file paths are relative to the descriptor's directory):
///   constant       n, value (number or list)
///   linear         matrix (nested list) | matrix_file (dense CSV)
///   spreading      structure: mean_field | dense | weighted_graph; form: product | exponential;
///                  mu, reinfection; mean_field: n, rbar; dense: reaction | reaction_file;
///                  weighted_graph: n, edges_file (two-column CSV, 0-based), lambda, kappa
///   domany_kinzel  n, q1, q2, p0, iid_start
///   hanski         n, a, s, b, curve: rational | exponential, ell, grid, initial_density,
///                  patch_file (CSV with columns z, a, s; overrides n)
///   graph          v, q (number or list), f {c0, c1, c2}, edges_file (host; complete when absent),
///                  initial: host | empty
/// Every type also accepts x0: "ones" | "zeros" | list of 0/1.
struct ModelSpec
{
    std::string type;
    RulePtr rule;
    BitState x0;
    nlohmann::json resolved;

    std::optional<SpreadingModel> spreading;
    std::optional<DomanyKinzel> dk;
    std::optional<HanskiModel> hanski;
    std::optional<GraphDynModel> graph;
};

/// Throws SchemaError naming the offending field (e.g. "model.mu").
/// `n_override` replaces the size parameter (used by sweeps across n).
ModelSpec build_model(const nlohmann::json &descriptor, const std::filesystem::path &base_dir = {},
                      std::optional<std::size_t> n_override = std::nullopt);

/// Reads a two-column 0-based edge list; rejects self-loops and out-of-range ends.
std::vector<std::pair<std::uint32_t, std::uint32_t>> read_edge_list(const std::filesystem::path &path,
                                                                    std::size_t v);

} // namespace occlab::models
