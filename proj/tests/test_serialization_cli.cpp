#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hsd/serialization.hpp"

using namespace hsd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(HSD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

fs::path tmpdir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("hsd_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, -2.75e-13, 123456789.123456789, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("grid and field round-trip through sbvfield-v1") {
    Grid g(2, 3, {-1.0, 0.0}, {1.0, 2.0}, Matrix::identity(2), true);
    SBVField u(g, 2);
    for (int c = 0; c < g.cell_count(); ++c) {
        u.offset(c) = {0.1 * c, -0.2};
        u.slope(c) = Matrix{{1.0, 0.5 * c}, {0.0, -1.0}};
    }
    const json j = field_to_json(u);
    CHECK(j.at("version") == "sbvfield-v1");
    SBVField v = field_from_json(j);
    CHECK(v.grid().cell_count() == g.cell_count());
    CHECK(v.grid().split_diagonal());
    for (int c = 0; c < g.cell_count(); ++c) {
        CHECK(v.offset(c) == u.offset(c));
        CHECK((v.slope(c) - u.slope(c)).frobenius() == 0.0);
    }
}

TEST_CASE("graded grids keep their boundary layer through serialization") {
    Grid g = Grid::with_boundary_layer(2, 4, 0.125, true);
    Grid h = grid_from_json(grid_to_json(g));
    CHECK(h.graded());
    CHECK(h.boundary_layer() == 0.125);
    CHECK(h.cell_count() == g.cell_count());
}

TEST_CASE("family round-trip through sbvfamily-v1") {
    IndexedFamily fam;
    fam.index_values = {{4, 8}};
    fam.fields = {affine_field(Grid(1, 4), Matrix{{1.0}}), affine_field(Grid(1, 8), Matrix{{1.0}})};
    IndexedFamily back = family_from_json(family_to_json(fam));
    CHECK(back.index_values == fam.index_values);
    CHECK(back.fields.size() == 2);
    CHECK(back.fields[1].grid().cells_per_side() == 8);
}

TEST_CASE("bulk problem round-trip through bulkproblem-v1") {
    BulkProblem p;
    p.x = {0.25};
    p.A = Matrix{{2.0}};
    p.B = Matrix{{0.5}};
    DensitySpec ds;
    p.pair = ds.make();
    p.n = 6;
    p.options.seed = 7;
    BulkProblem q = bulk_problem_from_json(bulk_problem_to_json(p, ds));
    CHECK(q.x == p.x);
    CHECK(q.A(0, 0) == 2.0);
    CHECK(q.n == 6);
    CHECK(q.options.seed == 7);
    CHECK(q.pair.bulk_name == "quadratic");
}

TEST_CASE("density cache round-trip through densitycache-v1") {
    std::map<std::string, double> c{{"b;o|8;1;k;1,2,", 1.25}, {"s;o|8;0;k;0,", 0.5}};
    CHECK(cache_from_json(cache_to_json(c)) == c);
    CHECK_THROWS_AS(cache_from_json(json{{"version", "other"}}), std::invalid_argument);
}

TEST_CASE("config hash is stable and content sensitive") {
    json a = {{"n", 4}, {"density", {{"bulk", "quadratic"}}}};
    json b = a;
    CHECK(config_hash(a) == config_hash(b));
    b["n"] = 8;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("cli reruns are byte identical") {
    const fs::path d1 = tmpdir("ve1"), d2 = tmpdir("ve2");
    REQUIRE(run_cli("verify-example --out " + d1.string()) == 0);
    REQUIRE(run_cli("verify-example --out " + d2.string()) == 0);
    CHECK(slurp(d1 / "results.json") == slurp(d2 / "results.json"));
    CHECK(slurp(d1 / "results.csv") == slurp(d2 / "results.csv"));

    const fs::path cfgp = tmpdir("cfg") / "rb.json";
    save_json(cfgp.string(), json{{"density", {{"bulk", "quadratic"}, {"surface", "trace-interfacial"}}},
                                  {"problems", {{{"A", {{2.0}}}, {"B", {{0.5}}}}}}});
    const fs::path d3 = tmpdir("rb1"), d4 = tmpdir("rb2");
    REQUIRE(run_cli("relax-bulk --config " + cfgp.string() + " --seed 3 --out " + d3.string()) == 0);
    REQUIRE(run_cli("relax-bulk --config " + cfgp.string() + " --seed 3 --out " + d4.string()) == 0);
    CHECK(slurp(d3 / "results.json") == slurp(d4 / "results.json"));
    CHECK(slurp(d3 / "results.csv") == slurp(d4 / "results.csv"));
}

TEST_CASE("csv numbers match the json numbers") {
    const fs::path cfgp = tmpdir("cfg2") / "rb.json";
    save_json(cfgp.string(), json{{"density", {{"bulk", "quadratic"}, {"surface", "trace-interfacial"}}},
                                  {"problems", {{{"A", {{2.0}}}, {"B", {{0.5}}}}}}});
    const fs::path d = tmpdir("rb3");
    REQUIRE(run_cli("relax-bulk --config " + cfgp.string() + " --out " + d.string()) == 0);
    const json r = load_json((d / "results.json").string());
    const double value = r.at("results")[0].at("value").get<double>();
    const std::string csv = slurp(d / "results.csv");
    CHECK(csv.find(format_double(value)) != std::string::npos);
    CHECK(r.contains("config_hash"));
    CHECK(r.at("version") == kVersion);
}

TEST_CASE("cli exit codes distinguish config and runtime failures") {
    CHECK(run_cli("relax-bulk") == 2); // missing config
    const fs::path bad = tmpdir("bad") / "bad.json";
    {
        std::ofstream out(bad);
        out << "{ not json";
    }
    CHECK(run_cli("relax-bulk --config " + bad.string()) == 2);
    const fs::path noprob = tmpdir("noprob") / "c.json";
    save_json(noprob.string(), json{{"density", {{"bulk", "quadratic"}, {"surface", "trace-interfacial"}}}});
    CHECK(run_cli("relax-bulk --config " + noprob.string()) == 2);
}

TEST_CASE("recurse persists its density cache") {
    const fs::path d = tmpdir("rec");
    const fs::path cfgp = d / "cfg.json";
    save_json(cfgp.string(),
              json{{"density", {{"bulk", "quadratic"}, {"surface", "trace-interfacial"}}},
                   {"backend", "oracle"},
                   {"tuples", {{{"A", {{1.5}}}, {"tuple", {{{0.25}}}}}}}});
    const fs::path cache = d / "cache.json";
    REQUIRE(run_cli("recurse --config " + cfgp.string() + " --cache " + cache.string() + " --out " +
                    d.string()) == 0);
    REQUIRE(fs::exists(cache));
    const auto entries = cache_from_json(load_json(cache.string()));
    CHECK_FALSE(entries.empty());
    const json r = load_json((d / "results.json").string());
    CHECK(r.at("results")[0].at("relative_error").get<double>() <= 1e-12);
}
