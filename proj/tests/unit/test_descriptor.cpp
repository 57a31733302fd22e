#include <doctest.h>

#include "occlab/errors.hpp"
#include "occlab/models/descriptor.hpp"
#include "occlab/rule.hpp"

#include <filesystem>
#include <fstream>

using namespace occlab;
using namespace occlab::models;
using nlohmann::json;

namespace {

Vector eval_at(const ModelSpec &m, double v)
{
    return evaluate_rule(*m.rule, Vector::Constant(static_cast<Eigen::Index>(m.rule->size()), v), 0);
}

void same_model(const ModelSpec &a, const ModelSpec &b)
{
    REQUIRE(a.rule->size() == b.rule->size());
    CHECK(a.x0 == b.x0);
    for (double v : {0.0, 0.3, 1.0})
        CHECK((eval_at(a, v) - eval_at(b, v)).cwiseAbs().maxCoeff() == 0.0);
}

} // namespace

TEST_CASE("descriptor defaults resolve and rebuild the same model")
{
    const auto mf = build_model(json{{"type", "spreading"}, {"n", 50}, {"rbar", 1.5}});
    CHECK(mf.resolved["mu"] == 0.5);
    CHECK(mf.resolved["form"] == "product");
    CHECK(mf.x0 == BitState(50, 1));
    same_model(mf, build_model(mf.resolved));

    const auto dk = build_model(json{{"type", "domany_kinzel"}, {"q1", 0.4}, {"q2", 0.7}});
    CHECK(dk.resolved["n"] == 3);
    same_model(dk, build_model(dk.resolved));

    const auto hk = build_model(json{{"type", "hanski"}, {"n", 40}});
    CHECK(hk.resolved["grid"] == 512);
    same_model(hk, build_model(hk.resolved));

    const auto g = build_model(json{{"type", "graph"}, {"v", 5}, {"q", 0.6}});
    CHECK(g.rule->size() == 10);
    same_model(g, build_model(g.resolved));

    // n_override resizes
    CHECK(build_model(mf.resolved, {}, 80).rule->size() == 80);
}

TEST_CASE("descriptor errors name the field")
{
    const auto fails_on = [](const json &j, const std::string &field) {
        try {
            build_model(j);
        } catch (const SchemaError &e) {
            return std::string(e.what()).find(field) != std::string::npos;
        }
        return false;
    };
    CHECK(fails_on(json{{"type", "spreading"}, {"n", 5}, {"rbar", 1.0}, {"colour", 1}}, "colour"));
    CHECK(fails_on(json{{"type", "spreading"}, {"n", 5}, {"rbar", 1.0}, {"mu", 1.5}}, "mu"));
    CHECK(fails_on(json{{"type", "spreading"}, {"n", 5}}, "rbar"));
    CHECK(fails_on(json{{"type", "teleport"}}, "type"));
    CHECK(fails_on(json{{"type", "constant"}, {"n", 3}, {"value", 0.5}, {"x0", {1, 0}}}, "x0"));
    CHECK(fails_on(json{{"type", "linear"}, {"matrix", {{0.7, 0.7}, {0.0, 0.5}}}}, "matrix"));
}

TEST_CASE("descriptor files load relative to the descriptor")
{
    const auto dir = std::filesystem::temp_directory_path() / "occlab_descriptor_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "edges.csv") << "0,1\n1,2\n2,3\n1,0\n";
        std::ofstream(dir / "A.csv") << "0.5,0.25\n0,1\n";
    }
    const auto wg = build_model(json{{"type", "spreading"}, {"structure", "weighted_graph"}, {"n", 4},
                                     {"edges_file", "edges.csv"}},
                                dir);
    CHECK(wg.rule->size() == 4);
    const auto lin = build_model(json{{"type", "linear"}, {"matrix_file", "A.csv"}, {"x0", {1, 0}}}, dir);
    CHECK(eval_at(lin, 1.0)[0] == doctest::Approx(0.75));
    CHECK(lin.x0 == BitState{1, 0});
    same_model(lin, build_model(lin.resolved, dir));
    CHECK_THROWS_AS(build_model(json{{"type", "linear"}, {"matrix_file", "missing.csv"}}, dir), Error);

    std::ofstream(dir / "bad.csv") << "0,0\n";
    CHECK_THROWS_AS(read_edge_list(dir / "bad.csv", 4), SchemaError);
    std::ofstream(dir / "bad.csv") << "0,9\n";
    CHECK_THROWS_AS(read_edge_list(dir / "bad.csv", 4), SchemaError);
    std::filesystem::remove_all(dir);
}
