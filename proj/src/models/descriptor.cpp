#include "occlab/models/descriptor.hpp"

#include "occlab/errors.hpp"
#include "occlab/io.hpp"
#include "occlab/schema.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace occlab::models {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &file)
{
    // absolute, so a resolved descriptor rebuilds from any directory
    std::filesystem::path p(file);
    return std::filesystem::absolute(p.is_absolute() || base.empty() ? p : base / p).lexically_normal();
}

Matrix matrix_from_json(const json &v, const std::string &where)
{
    if (!v.is_array() || v.empty())
        throw SchemaError(where + ": expected a nonempty list of rows");
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto cols = static_cast<Eigen::Index>(v.front().is_array() ? v.front().size() : 0);
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto &row = v[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw SchemaError(where + ": row " + std::to_string(i) + " has the wrong length");
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto &e = row[static_cast<std::size_t>(j)];
            if (!e.is_number())
                throw SchemaError(where + ": entry (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") is not a number");
            M(i, j) = e.get<double>();
        }
    }
    return M;
}

json matrix_to_json(const Matrix &M)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Vector vector_or_scalar(const json &v, std::size_t n, const std::string &where)
{
    const auto N = static_cast<Eigen::Index>(n);
    if (v.is_number())
        return Vector::Constant(N, v.get<double>());
    if (!v.is_array() || v.size() != n)
        throw SchemaError(where + ": expected a number or a list of length " + std::to_string(n));
    Vector out(N);
    for (std::size_t i = 0; i < n; ++i) {
        if (!v[i].is_number())
            throw SchemaError(where + ": entry " + std::to_string(i) + " is not a number");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

// Wraps library validation errors so they surface as schema problems.
template <class F>
void validated(const std::string &where, F &&f)
{
    try {
        f();
    } catch (const DomainError &e) {
        throw SchemaError(where + ": " + e.what());
    }
}

BitState parse_x0(const Fields &fields, json &resolved, std::size_t n, BitState fallback,
                  const std::string &fallback_name)
{
    if (!fields.has("x0")) {
        resolved["x0"] = fallback_name;
        return fallback;
    }
    const auto &v = fields.raw("x0");
    resolved["x0"] = v;
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "ones")
            return BitState(n, 1);
        if (s == "zeros")
            return BitState(n, 0);
        if (s == fallback_name)
            return fallback;
        throw SchemaError(fields.where("x0") + ": expected \"ones\", \"zeros\" or a 0/1 list");
    }
    if (!v.is_array() || v.size() != n)
        throw SchemaError(fields.where("x0") + ": list must have length " + std::to_string(n));
    BitState x(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!v[i].is_number_integer() || (v[i].get<int>() != 0 && v[i].get<int>() != 1))
            throw SchemaError(fields.where("x0") + ": entries must be 0 or 1");
        x[i] = static_cast<std::uint8_t>(v[i].get<int>());
    }
    return x;
}

std::size_t size_param(const Fields &f, const std::string &key, std::optional<std::size_t> n_override,
                       std::optional<std::size_t> fallback = std::nullopt)
{
    if (n_override) {
        f.has(key); // mark as seen
        return *n_override;
    }
    const auto n = f.count(key, fallback);
    if (n == 0)
        throw SchemaError(f.where(key) + ": must be positive");
    return n;
}

ModelSpec build_constant(const Fields &f, const std::filesystem::path &, std::optional<std::size_t> n_over)
{
    ModelSpec spec;
    const std::size_t n = size_param(f, "n", n_over);
    if (!f.has("value"))
        throw SchemaError(f.where("value") + ": required");
    const Vector c = vector_or_scalar(f.raw("value"), n, f.where("value"));
    if ((c.array() < 0.0).any() || (c.array() > 1.0).any())
        throw SchemaError(f.where("value") + ": entries must lie in [0,1]");
    spec.rule = make_constant_rule(c);
    spec.resolved = {{"type", "constant"}, {"n", n}, {"value", f.raw("value")}};
    spec.x0 = parse_x0(f, spec.resolved, n, BitState(n, 0), "zeros");
    return spec;
}

ModelSpec build_linear(const Fields &f, const std::filesystem::path &base, std::optional<std::size_t>)
{
    ModelSpec spec;
    Matrix A;
    if (f.has("matrix"))
        A = matrix_from_json(f.raw("matrix"), f.where("matrix"));
    else if (f.has("matrix_file"))
        A = read_matrix_csv(resolve(base, f.text("matrix_file")));
    else
        throw SchemaError(f.where("matrix") + ": give matrix or matrix_file");
    validated(f.where("matrix"), [&] { spec.rule = make_linear_rule(A); });
    const auto n = static_cast<std::size_t>(A.rows());
    spec.resolved = {{"type", "linear"}, {"matrix", matrix_to_json(A)}};
    spec.x0 = parse_x0(f, spec.resolved, n, BitState(n, 1), "ones");
    return spec;
}

ModelSpec build_spreading(const Fields &f, const std::filesystem::path &base, std::optional<std::size_t> n_over)
{
    ModelSpec spec;
    const auto structure = f.choice("structure", {"mean_field", "dense", "weighted_graph"}, "mean_field");
    const auto form_name = f.choice("form", {"product", "exponential"}, "product");
    const double mu = f.unit("mu", 0.5);
    const bool reinf = f.flag("reinfection", false);
    spec.resolved = {{"type", "spreading"}, {"structure", structure}, {"form", form_name},
                     {"mu", mu}, {"reinfection", reinf}};
    SpreadingModel model;
    validated(f.where("structure"), [&] {
        if (structure == "mean_field") {
            const std::size_t n = size_param(f, "n", n_over);
            const double rbar = f.number("rbar");
            model = SpreadingModel::mean_field(n, rbar, mu, reinf);
            spec.resolved["n"] = n;
            spec.resolved["rbar"] = rbar;
        } else if (structure == "dense") {
            Matrix R;
            if (f.has("reaction"))
                R = matrix_from_json(f.raw("reaction"), f.where("reaction"));
            else if (f.has("reaction_file"))
                R = read_matrix_csv(resolve(base, f.text("reaction_file")));
            else
                throw SchemaError(f.where("reaction") + ": give reaction or reaction_file");
            model = SpreadingModel::dense(R, mu, reinf);
            spec.resolved["reaction"] = matrix_to_json(R);
        } else {
            const std::size_t n = size_param(f, "n", n_over);
            const auto edges = read_edge_list(resolve(base, f.text("edges_file")), n);
            Matrix W = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (const auto &[i, j] : edges)
                W(i, j) = W(j, i) = 1.0;
            const Vector lambda = f.has("lambda") ? vector_or_scalar(f.raw("lambda"), n, f.where("lambda"))
                                                  : Vector::Ones(static_cast<Eigen::Index>(n));
            std::optional<double> kappa;
            if (f.has("kappa"))
                kappa = f.number("kappa");
            model = SpreadingModel::weighted_graph(W, lambda, mu, reinf, kappa);
            spec.resolved["n"] = n;
            spec.resolved["edges_file"] = resolve(base, f.text("edges_file")).string();
            spec.resolved["lambda"] = f.has("lambda") ? f.raw("lambda") : json(1.0);
            if (kappa)
                spec.resolved["kappa"] = *kappa;
        }
    });
    const auto form = form_name == "product" ? SpreadingForm::product : SpreadingForm::exponential;
    spec.rule = spreading_rule(model, form);
    spec.spreading = model;
    spec.x0 = parse_x0(f, spec.resolved, model.n, BitState(model.n, 1), "ones");
    return spec;
}

ModelSpec build_dk(const Fields &f, const std::filesystem::path &, std::optional<std::size_t> n_over)
{
    ModelSpec spec;
    DomanyKinzel dk;
    dk.n = size_param(f, "n", n_over, 3);
    dk.q1 = f.unit("q1");
    dk.q2 = f.unit("q2");
    dk.p0 = f.unit("p0", 0.5);
    const bool iid = f.flag("iid_start", true);
    validated(f.where("q1"), [&] { dk.validate(); });
    spec.rule = iid ? dk_iid_rule(dk) : dk_rule(dk);
    spec.dk = dk;
    spec.resolved = {{"type", "domany_kinzel"}, {"n", dk.n},   {"q1", dk.q1},
                     {"q2", dk.q2},             {"p0", dk.p0}, {"iid_start", iid}};
    spec.x0 = parse_x0(f, spec.resolved, dk.n, BitState(dk.n, 0), "zeros");
    return spec;
}

ModelSpec build_hanski(const Fields &f, const std::filesystem::path &base, std::optional<std::size_t> n_over)
{
    ModelSpec spec;
    const double a = f.number("a", 5.0);
    const double s = f.unit("s", 0.7);
    const double b = f.number("b", 1.0);
    const double ell = f.number("ell", 0.2);
    const auto curve = f.choice("curve", {"rational", "exponential"}, "rational");
    const std::size_t grid = f.count("grid", 512);
    const double pi0 = f.unit("initial_density", 0.5);
    spec.resolved = {{"type", "hanski"}, {"a", a}, {"s", s}, {"b", b}, {"ell", ell},
                     {"curve", curve}, {"grid", grid}, {"initial_density", pi0}};
    HanskiModel model;
    if (f.has("patch_file")) {
        const auto path = resolve(base, f.text("patch_file"));
        const auto table = read_numeric_csv(path);
        const auto &z = table.column("z");
        const auto &pa = table.column("a");
        const auto &ps = table.column("s");
        const std::size_t n = z.size();
        if (n == 0)
            throw SchemaError(path.string() + ": patch table is empty");
        model = HanskiModel::equidistributed(n, a, s, b, ell);
        Vector av(static_cast<Eigen::Index>(n)), sv(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            model.z[i] = {z[i], 0.0};
            av[static_cast<Eigen::Index>(i)] = pa[i];
            sv[static_cast<Eigen::Index>(i)] = ps[i];
        }
        model.patch_a = av;
        model.patch_s = sv;
        spec.resolved["patch_file"] = path.string();
        if (f.has("n"))
            throw SchemaError(f.where("n") + ": n comes from the patch table");
    } else {
        const std::size_t n = size_param(f, "n", n_over);
        model = HanskiModel::equidistributed(n, a, s, b, ell);
        spec.resolved["n"] = n;
    }
    model.c.kind = curve == "rational" ? ColonizationCurve::Kind::rational : ColonizationCurve::Kind::exponential;
    model.grid = grid;
    validated(f.where("a"), [&] { model.validate(); });
    spec.rule = hanski_rule(model);
    const BitState diffused = error_diffusion_state(model, [pi0](const Point &) { return pi0; });
    spec.x0 = parse_x0(f, spec.resolved, model.size(), diffused, "initial_density");
    spec.hanski = std::move(model);
    return spec;
}

ModelSpec build_graph(const Fields &f, const std::filesystem::path &base, std::optional<std::size_t> n_over)
{
    ModelSpec spec;
    GraphDynModel model;
    model.v = size_param(f, "v", n_over);
    if (f.has("q")) {
        const auto &q = f.raw("q");
        if (q.is_number())
            model.q = {q.get<double>()};
        else if (q.is_array() && !q.empty() && std::all_of(q.begin(), q.end(), [](const json &e) { return e.is_number(); }))
            model.q = q.get<std::vector<double>>();
        else
            throw SchemaError(f.where("q") + ": expected a number or a nonempty list of numbers");
    }
    if (f.has("f")) {
        const Fields ff(f.raw("f"), f.where("f"));
        model.f.c0 = ff.number("c0", 0.1);
        model.f.c1 = ff.number("c1", 0.6);
        model.f.c2 = ff.number("c2", 0.0);
        ff.finish();
    }
    spec.resolved = {{"type", "graph"}, {"v", model.v}, {"q", model.q},
                     {"f", {{"c0", model.f.c0}, {"c1", model.f.c1}, {"c2", model.f.c2}}}};
    if (f.has("edges_file")) {
        const auto path = resolve(base, f.text("edges_file"));
        model.edges = read_edge_list(path, model.v);
        spec.resolved["edges_file"] = path.string();
    } else {
        model.edges = GraphDynModel::complete(model.v, model.q.front(), model.f).edges;
    }
    validated(f.where("q"), [&] { model.validate(); });
    const auto initial = f.choice("initial", {"host", "empty"}, "host");
    spec.resolved["initial"] = initial;
    spec.rule = graph_rule(model);
    const BitState start(model.size(), initial == "host" ? 1 : 0);
    spec.x0 = parse_x0(f, spec.resolved, model.size(), start, "initial");
    spec.graph = std::move(model);
    return spec;
}

} // namespace

std::vector<std::pair<std::uint32_t, std::uint32_t>> read_edge_list(const std::filesystem::path &path,
                                                                    std::size_t v)
{
    const auto table = read_numeric_csv(path, false);
    if (table.columns.size() != 2)
        throw SchemaError(path.string() + ": edge list needs exactly two columns");
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::size_t k = 0; k < table.columns[0].size(); ++k) {
        const double a = table.columns[0][k], b = table.columns[1][k];
        const std::string line = path.string() + ":" + std::to_string(k + 1);
        if (a != std::floor(a) || b != std::floor(b) || a < 0 || b < 0 || a >= static_cast<double>(v) ||
            b >= static_cast<double>(v))
            throw SchemaError(line + ": vertex ids must be integers in [0, " + std::to_string(v) + ")");
        if (a == b)
            throw SchemaError(line + ": self-loop");
        const auto i = static_cast<std::uint32_t>(std::min(a, b)), j = static_cast<std::uint32_t>(std::max(a, b));
        edges.insert({i, j});
    }
    return {edges.begin(), edges.end()};
}

ModelSpec build_model(const json &descriptor, const std::filesystem::path &base_dir,
                      std::optional<std::size_t> n_override)
{
    const Fields f(descriptor, "model");
    const auto type = f.choice("type", {"constant", "linear", "spreading", "domany_kinzel", "hanski", "graph"}, "");
    ModelSpec spec;
    if (type == "constant")
        spec = build_constant(f, base_dir, n_override);
    else if (type == "linear")
        spec = build_linear(f, base_dir, n_override);
    else if (type == "spreading")
        spec = build_spreading(f, base_dir, n_override);
    else if (type == "domany_kinzel")
        spec = build_dk(f, base_dir, n_override);
    else if (type == "hanski")
        spec = build_hanski(f, base_dir, n_override);
    else
        spec = build_graph(f, base_dir, n_override);
    f.finish();
    spec.type = type;
    return spec;
}

} // namespace occlab::models
