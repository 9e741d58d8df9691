#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hsd/approx.hpp"
#include "hsd/cell_solver.hpp"
#include "hsd/class_check.hpp"
#include "hsd/density.hpp"
#include "hsd/hierarchy.hpp"
#include "hsd/oracle.hpp"
#include "hsd/rng.hpp"
#include "hsd/serialization.hpp"
#include "hsd/version.hpp"

namespace fs = std::filesystem;
using hsd::json;
using hsd::Matrix;
using hsd::Vec;

namespace {

struct CliArgs {
    std::string config_path;
    std::string cache_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> tolerance;
    int threads = 1;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_error(const std::string& kind, const std::string& message) {
    json e;
    e["error"] = {{"kind", kind}, {"message", message}};
    e["version"] = hsd::kVersion;
    std::cout << hsd::dump_json(e);
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

std::string fd(double v) { return hsd::format_double(v); }

json load_config(const CliArgs& args, bool required) {
    if (args.config_path.empty()) {
        if (required) throw ConfigError("--config is required for this subcommand");
        return json::object();
    }
    std::ifstream in(args.config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + args.config_path);
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

hsd::SolverOptions options_from_config(const json& cfg, const CliArgs& args) {
    hsd::SolverOptions opt;
    if (cfg.contains("options")) opt = hsd::options_from_json(cfg.at("options"));
    if (args.seed) opt.seed = *args.seed;
    if (args.tolerance) opt.tolerance = *args.tolerance;
    return opt;
}

hsd::DensitySpec density_from_config(const json& cfg) {
    if (!cfg.contains("density")) throw ConfigError("config is missing \"density\"");
    try {
        hsd::DensitySpec d = hsd::density_from_json(cfg.at("density"));
        d.make(); // validates the catalog names
        return d;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("density: ") + e.what());
    }
}

hsd::HierarchicalDeformation deformation_from_json(const json& j) {
    hsd::HierarchicalDeformation def;
    def.g = hsd::field_from_json(j.at("g"));
    for (const json& lvl : j.at("levels")) {
        std::vector<Matrix> ms;
        for (const json& m : lvl) ms.push_back(hsd::mat_from_json(m));
        def.levels.push_back(std::move(ms));
    }
    def.p = j.value("p", 2.0);
    def.validate();
    return def;
}

json stamped(const json& config, const std::string& command) {
    json out;
    out["version"] = hsd::kVersion;
    out["command"] = command;
    out["config_hash"] = hsd::config_hash(config);
    return out;
}

hsd::RelaxBackend backend_from_config(const json& cfg, const hsd::DensityPair& pair) {
    const std::string b = cfg.value("backend", "auto");
    if (b == "oracle") return hsd::RelaxBackend::ClosedFormOracle;
    if (b == "nested") return hsd::RelaxBackend::NestedSolver;
    if (b != "auto") throw ConfigError("backend must be auto, oracle or nested");
    return hsd::is_trace_example_pair(pair) ? hsd::RelaxBackend::ClosedFormOracle
                                            : hsd::RelaxBackend::NestedSolver;
}

// ---------------------------------------------------------------------------
// relax-bulk

int run_relax_bulk(const CliArgs& args, const json& cfg) {
    const hsd::DensitySpec ds = density_from_config(cfg);
    const hsd::SolverOptions opt = options_from_config(cfg, args);
    const int n = cfg.value("n", 8);

    struct Item { Vec x; Matrix A, B; };
    std::vector<Item> items;
    if (cfg.contains("problems")) {
        for (const json& p : cfg.at("problems")) {
            Item it;
            it.A = hsd::mat_from_json(p.at("A"));
            it.B = hsd::mat_from_json(p.at("B"));
            it.x = p.contains("x") ? hsd::vec_from_json(p.at("x"))
                                   : Vec(static_cast<std::size_t>(it.A.cols()), 0.0);
            items.push_back(std::move(it));
        }
    } else if (cfg.contains("sampled")) {
        const json& s = cfg.at("sampled");
        const int count = s.value("count", 10);
        const int rows = s.value("rows", 1);
        const int cols = s.value("cols", 1);
        const double lo = s.value("lo", -2.0);
        const double hi = s.value("hi", 2.0);
        for (int i = 0; i < count; ++i) {
            Item it;
            it.A = Matrix(rows, cols);
            it.B = Matrix(rows, cols);
            int dim = 0;
            for (double& v : it.A.data()) v = hsd::halton_in(static_cast<std::uint64_t>(i + 1), dim++, lo, hi);
            for (double& v : it.B.data()) v = hsd::halton_in(static_cast<std::uint64_t>(i + 1), dim++, lo, hi);
            it.x = Vec(static_cast<std::size_t>(cols), 0.0);
            items.push_back(std::move(it));
        }
    }
    if (items.empty()) throw ConfigError("relax-bulk: no problems given (use \"problems\" or \"sampled\")");

    json out = stamped(cfg, "relax-bulk");
    json results = json::array();
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < items.size(); ++i) {
        hsd::BulkProblem prob;
        prob.x = items[i].x;
        prob.A = items[i].A;
        prob.B = items[i].B;
        prob.pair = ds.make();
        prob.n = n;
        prob.options = opt;
        const hsd::SolveResult r = hsd::solve_bulk(prob);
        json jr = hsd::result_to_json(r);
        jr["problem"] = hsd::bulk_problem_to_json(prob, ds);
        results.push_back(std::move(jr));
        rows.push_back({std::to_string(i), std::to_string(n), fd(r.value), hsd::mode_name(r.mode),
                        fd(r.boundary_residual), fd(r.mean_gradient_residual),
                        std::to_string(r.iterations), r.converged ? "1" : "0"});
    }
    out["results"] = std::move(results);
    hsd::save_json((fs::path(args.out_dir) / "results.json").string(), out);
    write_csv(fs::path(args.out_dir) / "results.csv",
              {"index", "n", "value", "mode", "boundary_residual", "mean_gradient_residual",
               "iterations", "converged"},
              rows);

    // value-vs-resolution series for the first problem
    if (cfg.contains("ns")) {
        std::vector<std::vector<std::string>> series;
        for (int nn : cfg.at("ns").get<std::vector<int>>()) {
            hsd::BulkProblem prob;
            prob.x = items[0].x;
            prob.A = items[0].A;
            prob.B = items[0].B;
            prob.pair = ds.make();
            prob.n = nn;
            prob.options = opt;
            const hsd::SolveResult r = hsd::solve_bulk(prob);
            series.push_back({std::to_string(nn), fd(r.value)});
        }
        write_csv(fs::path(args.out_dir) / "series.csv", {"n", "value"}, series);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// relax-surface

int run_relax_surface(const CliArgs& args, const json& cfg) {
    const hsd::DensitySpec ds = density_from_config(cfg);
    const hsd::SolverOptions opt = options_from_config(cfg, args);
    const int n = cfg.value("n", 4);

    struct Item { Vec lambda, nu; };
    std::vector<Item> items;
    if (cfg.contains("samples")) {
        for (const json& p : cfg.at("samples"))
            items.push_back({hsd::vec_from_json(p.at("lambda")), hsd::vec_from_json(p.at("nu"))});
    } else if (cfg.contains("sampled")) {
        const json& s = cfg.at("sampled");
        const int count = s.value("count", 10);
        const int dim = s.value("dim", 2);
        for (int i = 0; i < count; ++i) {
            Item it;
            it.lambda.resize(static_cast<std::size_t>(dim));
            for (int k = 0; k < dim; ++k)
                it.lambda[static_cast<std::size_t>(k)] =
                    hsd::halton_in(static_cast<std::uint64_t>(i + 1), k, -2.0, 2.0);
            if (dim == 1) {
                it.nu = {1.0};
            } else {
                const double th = 2.0 * M_PI * hsd::halton(static_cast<std::uint64_t>(i + 1), 7);
                it.nu = {std::cos(th), std::sin(th)};
            }
            items.push_back(std::move(it));
        }
    }
    if (items.empty()) throw ConfigError("relax-surface: no samples given");

    json out = stamped(cfg, "relax-surface");
    json results = json::array();
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < items.size(); ++i) {
        hsd::SurfaceProblem prob;
        prob.x = Vec(items[i].nu.size(), 0.0);
        prob.lambda = items[i].lambda;
        prob.nu = items[i].nu;
        prob.pair = ds.make();
        prob.n = n;
        prob.options = opt;
        const hsd::SolveResult r = hsd::solve_surface(prob);
        const double direct = prob.pair.eval_surface(prob.x, prob.lambda, prob.nu);
        json jr = hsd::result_to_json(r);
        jr["lambda"] = prob.lambda;
        jr["nu"] = prob.nu;
        jr["direct_value"] = direct;
        results.push_back(std::move(jr));
        rows.push_back({std::to_string(i), fd(r.value), fd(direct), r.converged ? "1" : "0"});
    }
    out["results"] = std::move(results);
    hsd::save_json((fs::path(args.out_dir) / "results.json").string(), out);
    write_csv(fs::path(args.out_dir) / "results.csv", {"index", "value", "direct_value", "converged"},
              rows);
    return 0;
}

// ---------------------------------------------------------------------------
// recurse

int run_recurse(const CliArgs& args, const json& cfg) {
    const hsd::DensitySpec ds = density_from_config(cfg);
    const hsd::DensityPair pair = ds.make();
    const hsd::SolverOptions opt = options_from_config(cfg, args);
    const int n = cfg.value("n", 8);
    const hsd::RelaxBackend backend = backend_from_config(cfg, pair);

    hsd::RelaxedDensityHandle handle(pair, backend, opt, n);
    if (!args.cache_path.empty() && fs::exists(args.cache_path))
        handle.cache() = hsd::cache_from_json(hsd::load_json(args.cache_path));

    if (!cfg.contains("tuples")) throw ConfigError("recurse: config needs \"tuples\"");

    json out = stamped(cfg, "recurse");
    json results = json::array();
    std::vector<std::vector<std::string>> rows;
    int idx = 0;
    for (const json& t : cfg.at("tuples")) {
        const Matrix A = hsd::mat_from_json(t.at("A"));
        const Vec x = t.contains("x") ? hsd::vec_from_json(t.at("x"))
                                      : Vec(static_cast<std::size_t>(A.cols()), 0.0);
        hsd::RelaxedDensityHandle h = handle;
        // config lists the tuple outermost-last: B_1, ..., B_k
        for (const json& b : t.at("tuple")) h = h.next(hsd::mat_from_json(b));
        const double value = h.bulk(x, A);
        json jr;
        jr["A"] = hsd::mat_to_json(A);
        jr["x"] = x;
        jr["stage"] = h.stage();
        jr["value"] = value;
        std::string oracle_s = "", err_s = "";
        if (hsd::is_trace_example_pair(pair)) {
            const double ov = hsd::oracle::exact_Wk(
                A, h.tuple(), [&](const Matrix& B) { return pair.eval_bulk(x, B); });
            jr["oracle_value"] = ov;
            jr["relative_error"] = std::abs(value - ov) / std::max(1e-12, std::abs(ov));
            oracle_s = fd(ov);
            err_s = fd(jr["relative_error"].get<double>());
        }
        results.push_back(std::move(jr));
        rows.push_back({std::to_string(idx++), std::to_string(h.stage()), fd(value), oracle_s, err_s});
    }
    out["results"] = std::move(results);
    hsd::save_json((fs::path(args.out_dir) / "results.json").string(), out);
    write_csv(fs::path(args.out_dir) / "results.csv",
              {"index", "stage", "value", "oracle_value", "relative_error"}, rows);
    if (!args.cache_path.empty()) hsd::save_json(args.cache_path, hsd::cache_to_json(handle.cache()));
    return 0;
}

// ---------------------------------------------------------------------------
// energy

int run_energy(const CliArgs& args, const json& cfg) {
    const hsd::DensitySpec ds = density_from_config(cfg);
    const hsd::SolverOptions opt = options_from_config(cfg, args);
    if (!cfg.contains("deformation")) throw ConfigError("energy: config needs \"deformation\"");
    hsd::HierarchicalDeformation def;
    try {
        def = deformation_from_json(cfg.at("deformation"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("deformation: ") + e.what());
    }
    const int level = cfg.value("level", 1);
    const int solver_n = cfg.value("solver_n", 8);

    const hsd::EnergyAssignment ea = hsd::assign_energy(def, ds.make(), level, opt, solver_n);

    json out = stamped(cfg, "energy");
    out["result"] = {{"level", ea.level},
                     {"bulk", ea.bulk},
                     {"surface", ea.surface},
                     {"total", ea.total},
                     {"disarrangement_norms", ea.disarrangement_norms}};
    hsd::save_json((fs::path(args.out_dir) / "results.json").string(), out);
    std::vector<std::vector<std::string>> rows{
        {std::to_string(ea.level), fd(ea.bulk), fd(ea.surface), fd(ea.total)}};
    write_csv(fs::path(args.out_dir) / "results.csv", {"level", "bulk", "surface", "total"}, rows);
    std::vector<std::vector<std::string>> dn;
    for (std::size_t l = 0; l < ea.disarrangement_norms.size(); ++l)
        dn.push_back({std::to_string(l + 1), fd(ea.disarrangement_norms[l])});
    write_csv(fs::path(args.out_dir) / "disarrangement.csv", {"level", "l1_norm"}, dn);
    return 0;
}

// ---------------------------------------------------------------------------
// approximate

int run_approximate(const CliArgs& args, const json& cfg) {
    if (!cfg.contains("target")) throw ConfigError("approximate: config needs \"target\"");
    hsd::ApproximationPlan plan;
    try {
        plan.target = deformation_from_json(cfg.at("target"));
        plan.index_values = cfg.at("index_values").get<std::vector<std::vector<int>>>();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("target: ") + e.what());
    }
    const double tol = args.tolerance ? *args.tolerance : cfg.value("tolerance", 1e-6);

    const hsd::IndexedFamily family = hsd::build_hierarchical_sequence(plan);
    const hsd::ConvergenceReport rep = hsd::verify_convergence(family, plan.target, {}, tol);
    const double tv_constant = hsd::verify_tv_bound(family, plan.target);

    hsd::save_json((fs::path(args.out_dir) / "family.json").string(), hsd::family_to_json(family));

    json out = stamped(cfg, "approximate");
    json entries = json::array();
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : rep.entries) {
        entries.push_back({{"tuple", e.tuple},
                           {"l1_distance_to_g", e.l1_distance_to_g},
                           {"moment_residual", e.moment_residual},
                           {"total_variation", e.total_variation}});
        std::string ts;
        for (std::size_t i = 0; i < e.tuple.size(); ++i)
            ts += (i ? ";" : "") + std::to_string(e.tuple[i]);
        rows.push_back({ts, fd(e.l1_distance_to_g), fd(e.moment_residual), fd(e.total_variation)});
    }
    out["report"] = {{"entries", std::move(entries)},
                     {"sd_norm", rep.sd_norm},
                     {"measured_constant", rep.measured_constant},
                     {"tv_bound_constant", tv_constant},
                     {"monotone", rep.monotone},
                     {"converged", rep.converged},
                     {"passed", rep.passed},
                     {"tolerance", rep.tolerance}};
    hsd::save_json((fs::path(args.out_dir) / "results.json").string(), out);
    write_csv(fs::path(args.out_dir) / "results.csv",
              {"tuple", "l1_distance_to_g", "moment_residual", "total_variation"}, rows);
    return 0;
}

// ---------------------------------------------------------------------------
// check-class

int run_check_class(const CliArgs& args, const json& cfg) {
    const hsd::DensitySpec ds = density_from_config(cfg);
    hsd::SamplingPlan plan;
    if (cfg.contains("plan")) {
        const json& p = cfg.at("plan");
        plan.d = p.value("d", plan.d);
        plan.N = p.value("N", plan.N);
        plan.count = p.value("count", plan.count);
        plan.matrix_lo = p.value("matrix_lo", plan.matrix_lo);
        plan.matrix_hi = p.value("matrix_hi", plan.matrix_hi);
        plan.t_hi = p.value("t_hi", plan.t_hi);
        plan.require_coercivity = p.value("require_coercivity", plan.require_coercivity);
        plan.tolerance = p.value("tolerance", plan.tolerance);
    }
    if (args.tolerance) plan.tolerance = *args.tolerance;

    const hsd::ClassReport rep = hsd::check_density_class(ds.make(), plan);

    json out = stamped(cfg, "check-class");
    json props = json::object();
    std::vector<std::vector<std::string>> rows;
    for (const auto& [name, pr] : rep.properties) {
        const char* v = pr.verdict == hsd::Verdict::Pass      ? "pass"
                        : pr.verdict == hsd::Verdict::Fail    ? "fail"
                                                              : "not-required";
        props[name] = {{"verdict", v}, {"witness", pr.witness}, {"measured", pr.measured}};
        rows.push_back({name, v, fd(pr.measured), pr.witness});
    }
    out["properties"] = std::move(props);
    out["all_pass"] = rep.all_pass();
    hsd::save_json((fs::path(args.out_dir) / "results.json").string(), out);
    write_csv(fs::path(args.out_dir) / "results.csv", {"property", "verdict", "measured", "witness"},
              rows);
    return 0;
}

// ---------------------------------------------------------------------------
// verify-example

int run_verify_example(const CliArgs& args, const json& cfg) {
    hsd::SolverOptions opt = options_from_config(cfg, args);
    const hsd::DensityPair pair = hsd::make_quadratic_trace_pair();

    struct Row { std::string name; double analytic, computed; double tol; };
    std::vector<Row> checks;

    // bulk cell formula, exact 1D mode
    {
        double worst = 0.0, analytic = 0.0, computed = 0.0;
        for (int i = 1; i <= 5; ++i) {
            const double a = hsd::halton_in(static_cast<std::uint64_t>(i), 0, -3.0, 3.0);
            const double b = hsd::halton_in(static_cast<std::uint64_t>(i), 1, -3.0, 3.0);
            hsd::BulkProblem prob;
            prob.x = {0.0};
            prob.A = Matrix{{a}};
            prob.B = Matrix{{b}};
            prob.pair = pair;
            prob.options = opt;
            const double v = hsd::solve_bulk(prob).value;
            const double ex = b * b + std::abs(a - b);
            if (std::abs(v - ex) > worst) { worst = std::abs(v - ex); analytic = ex; computed = v; }
        }
        if (worst == 0.0) { analytic = computed = 1.0; }
        checks.push_back({"bulk-1d-exact", analytic, computed, 1e-8});
    }
    // bulk cell formula, 2D numeric upper bound
    {
        hsd::BulkProblem prob;
        prob.x = {0.0, 0.0};
        prob.A = Matrix{{1.0, 0.5}, {0.0, 1.0}};
        prob.B = Matrix{{0.25, 0.0}, {0.0, -0.5}};
        prob.pair = pair;
        prob.n = 8;
        prob.options = opt;
        prob.options.restarts = 4;
        prob.options.max_iterations = 150;
        prob.options.tolerance = 1e-7;
        prob.options.eps_end = 1e-4;
        const double v = hsd::solve_bulk(prob).value;
        const double f = prob.B.frobenius();
        const double ex = f * f + std::abs((prob.A - prob.B).trace());
        checks.push_back({"bulk-2d-numeric", ex, v, 0.10});
    }
    // surface cell formula
    {
        hsd::SurfaceProblem prob;
        prob.x = {0.0, 0.0};
        prob.lambda = {1.0, 0.5};
        prob.nu = {std::cos(0.3), std::sin(0.3)};
        prob.pair = pair;
        prob.n = 4;
        prob.options = opt;
        const double v = hsd::solve_surface(prob).value;
        checks.push_back({"surface", std::abs(hsd::dot(prob.lambda, prob.nu)), v, 1e-6});
    }
    // stage-2 recursion against the closed form, 1D
    {
        hsd::RelaxedDensityHandle h(pair, hsd::RelaxBackend::NestedSolver, opt, 8);
        h = h.next(Matrix{{-0.5}}).next(Matrix{{0.25}});
        const Matrix A{{1.5}};
        const double v = h.bulk({0.0}, A);
        const double ex = hsd::oracle::exact_Wk(A, h.tuple(), [&](const Matrix& B) {
            return pair.eval_bulk({0.0}, B);
        });
        checks.push_back({"stage2-1d", ex, v, 1e-6});
    }
    // hierarchical energy fixtures
    {
        hsd::HierarchicalDeformation def;
        def.g = hsd::affine_field(hsd::Grid(1, 4), Matrix{{1.0}});
        def.levels = {std::vector<Matrix>(4, Matrix{{0.5}}), std::vector<Matrix>(4, Matrix{{0.0}})};
        checks.push_back({"energy-fixture", 1.0, hsd::assign_energy(def, pair, 1).total, 1e-10});
        for (int c = 0; c < 4; ++c)
            if (def.g.centroid(c)[0] > 0.0) def.g.offset(c)[0] += 2.0;
        checks.push_back({"energy-fixture-jump", 3.0, hsd::assign_energy(def, pair, 1).total, 1e-10});
    }

    json out = stamped(cfg, "verify-example");
    json results = json::array();
    std::vector<std::vector<std::string>> rows;
    bool all = true;
    for (const Row& r : checks) {
        const double err = std::abs(r.computed - r.analytic) / std::max(1e-12, std::abs(r.analytic));
        const bool pass = err <= r.tol;
        all = all && pass;
        results.push_back({{"check", r.name},
                           {"analytic", r.analytic},
                           {"computed", r.computed},
                           {"relative_error", err},
                           {"tolerance", r.tol},
                           {"passed", pass}});
        rows.push_back({r.name, fd(r.analytic), fd(r.computed), fd(err), pass ? "1" : "0"});
    }
    out["results"] = std::move(results);
    out["all_pass"] = all;
    hsd::save_json((fs::path(args.out_dir) / "results.json").string(), out);
    write_csv(fs::path(args.out_dir) / "results.csv",
              {"check", "analytic", "computed", "relative_error", "passed"}, rows);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical structured deformation relaxation toolkit"};
    app.require_subcommand(1);

    CliArgs args;
    app.add_option("--config", args.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    std::uint64_t seed_v = 0;
    auto* seed_opt = app.add_option("--seed", seed_v, "override the RNG seed");
    app.add_option("--cache", args.cache_path, "density cache file (read and updated)");
    app.add_option("--out", args.out_dir, "output directory");
    app.add_option("--threads", args.threads, "worker thread cap");
    double tol_v = 0.0;
    auto* tol_opt = app.add_option("--tolerance", tol_v, "override the solver/report tolerance");

    auto* c_bulk = app.add_subcommand("relax-bulk", "minimize the bulk cell formula");
    auto* c_surf = app.add_subcommand("relax-surface", "minimize the surface cell formula");
    auto* c_rec = app.add_subcommand("recurse", "evaluate stage-k relaxed densities");
    auto* c_energy = app.add_subcommand("energy", "assign the relaxed energy of a deformation");
    auto* c_approx = app.add_subcommand("approximate", "build and verify approximating families");
    auto* c_class = app.add_subcommand("check-class", "test density-class membership");
    auto* c_verify = app.add_subcommand("verify-example", "run the worked-example regression");
    for (CLI::App* sub : {c_bulk, c_surf, c_rec, c_energy, c_approx, c_class, c_verify})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) args.seed = seed_v;
    if (*tol_opt) args.tolerance = tol_v;

    json cfg;
    try {
        cfg = load_config(args, !c_verify->parsed());
        fs::create_directories(args.out_dir);
    } catch (const ConfigError& e) {
        write_error("config", e.what());
        return 2;
    } catch (const std::exception& e) {
        write_error("runtime", e.what());
        return 3;
    }

    try {
        if (c_bulk->parsed()) return run_relax_bulk(args, cfg);
        if (c_surf->parsed()) return run_relax_surface(args, cfg);
        if (c_rec->parsed()) return run_recurse(args, cfg);
        if (c_energy->parsed()) return run_energy(args, cfg);
        if (c_approx->parsed()) return run_approximate(args, cfg);
        if (c_class->parsed()) return run_check_class(args, cfg);
        if (c_verify->parsed()) return run_verify_example(args, cfg);
    } catch (const ConfigError& e) {
        write_error("config", e.what());
        return 2;
    } catch (const json::exception& e) {
        write_error("config", e.what());
        return 2;
    } catch (const std::exception& e) {
        write_error("runtime", e.what());
        return 3;
    }
    return 0;
}
