#pragma once

#include "occlab/types.hpp"

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace occlab {

/// Shortest round-trip decimal with 17 significant digits at most.
std::string format_double(double x);

using Cell = std::variant<std::string, double, std::int64_t>;

struct Table
{
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row);
};

/// RFC 4180 quoting; doubles through format_double.
void write_csv(const Table &table, std::ostream &out);
void write_csv(const Table &table, const std::filesystem::path &path);

/// Dense numeric CSV (reaction matrices); rejects ragged rows.
Matrix read_matrix_csv(const std::filesystem::path &path);

/// Header row plus numeric columns by name.
struct NumericCsv
{
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
    const std::vector<double> &column(const std::string &name) const;
};

NumericCsv read_numeric_csv(const std::filesystem::path &path, bool has_header = true);

/// SHA-256 of a file or string, lower-case hex.
std::string sha256_hex(const std::string &bytes);
std::string sha256_file(const std::filesystem::path &path);

} // namespace occlab
