#include "occlab/io.hpp"

#include "occlab/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace occlab {

std::string format_double(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
    return {buf.data(), res.ptr};
}

void Table::add(std::vector<Cell> row)
{
    if (!header.empty() && row.size() != header.size())
        throw DomainError("table row width does not match the header");
    rows.push_back(std::move(row));
}

namespace {

std::string quote(const std::string &s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + '"';
}

std::string render(const Cell &c)
{
    if (const auto *s = std::get_if<std::string>(&c))
        return quote(*s);
    if (const auto *d = std::get_if<double>(&c))
        return format_double(*d);
    return std::to_string(std::get<std::int64_t>(c));
}

std::vector<std::string> split_line(const std::string &line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string &s, const std::filesystem::path &path, std::size_t line)
{
    std::size_t start = s.find_first_not_of(" \t");
    std::size_t end = s.find_last_not_of(" \t");
    if (start == std::string::npos)
        throw SchemaError(path.string() + ":" + std::to_string(line) + ": empty field");
    const std::string t = s.substr(start, end - start + 1);
    double v = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw SchemaError(path.string() + ":" + std::to_string(line) + ": not a number: '" + t + "'");
    return v;
}

std::ifstream open_input(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw SchemaError("cannot read " + path.string());
    return in;
}

} // namespace

void write_csv(const Table &table, std::ostream &out)
{
    for (std::size_t k = 0; k < table.header.size(); ++k)
        out << (k ? "," : "") << quote(table.header[k]);
    out << '\n';
    for (const auto &row : table.rows) {
        for (std::size_t k = 0; k < row.size(); ++k)
            out << (k ? "," : "") << render(row[k]);
        out << '\n';
    }
}

void write_csv(const Table &table, const std::filesystem::path &path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    write_csv(table, out);
}

Matrix read_matrix_csv(const std::filesystem::path &path)
{
    auto in = open_input(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::vector<double> row;
        for (const auto &field : split_line(line))
            row.push_back(parse_number(field, path, lineno));
        if (!rows.empty() && row.size() != rows.front().size())
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw SchemaError(path.string() + ": empty matrix");
    Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return M;
}

const std::vector<double> &NumericCsv::column(const std::string &name) const
{
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == name)
            return columns[k];
    }
    throw SchemaError("CSV has no column '" + name + "'");
}

NumericCsv read_numeric_csv(const std::filesystem::path &path, bool has_header)
{
    auto in = open_input(path);
    NumericCsv out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto fields = split_line(line);
        if (has_header && out.header.empty()) {
            for (auto &f : fields) {
                const auto a = f.find_first_not_of(" \t"), b = f.find_last_not_of(" \t");
                out.header.push_back(a == std::string::npos ? "" : f.substr(a, b - a + 1));
            }
            out.columns.resize(out.header.size());
            continue;
        }
        if (out.columns.empty())
            out.columns.resize(fields.size());
        if (fields.size() != out.columns.size())
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
        for (std::size_t k = 0; k < fields.size(); ++k)
            out.columns[k].push_back(parse_number(fields[k], path, lineno));
    }
    return out;
}

std::string sha256_hex(const std::string &bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 failed");
    std::ostringstream os;
    for (unsigned int k = 0; k < len; ++k)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
    return os.str();
}

std::string sha256_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

} // namespace occlab
