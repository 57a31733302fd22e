#pragma once

#include "occlab/io.hpp"

#include <cstdint>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace occlab {

/// Outcome of one acceptance check. Informational lines are printed but do
/// not decide the exit status.
struct CriterionResult
{
    int criterion = 0;
    std::string label; ///< "1".."11", or e.g. "2b" for supplementary lines
    std::string title;
    bool pass = false;
    bool informational = false;
    std::string summary;
    Table record; ///< (key, value) rows; compared byte-for-byte by criterion 11
    double seconds = 0.0;
};

struct AcceptanceOptions
{
    std::uint64_t seed = 20240611;
    unsigned workers = 0;
    /// Worker count of the repeat run in criterion 11 (0 = half of the first).
    unsigned repeat_workers = 0;
    std::set<int> only; ///< empty = all
    std::ostream *progress = nullptr;
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions &options);

/// "PASS  1  <title>: <summary>" style line.
std::string format_result(const CriterionResult &r);

/// True when every non-informational line passed.
bool all_passed(const std::vector<CriterionResult> &results);

} // namespace occlab
