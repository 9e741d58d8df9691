#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsd/approx.hpp"
#include "hsd/cell_solver.hpp"
#include "hsd/density.hpp"
#include "hsd/grid.hpp"
#include "hsd/matrix.hpp"
#include "hsd/sbv_field.hpp"
#include "hsd/version.hpp"

namespace hsd {

using nlohmann::json;

/// Round-trip-exact decimal form shared by every exporter, so the CSV and
/// JSON views of a run carry identical number text.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail_json {

inline void dump(const json& j, std::ostream& os, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string pad0(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
    case json::value_t::object: {
        if (j.empty()) { os << "{}"; return; }
        os << "{\n";
        std::size_t i = 0;
        for (auto it = j.begin(); it != j.end(); ++it, ++i) {
            os << pad << json(it.key()).dump() << ": ";
            dump(it.value(), os, indent, depth + 1);
            if (i + 1 < j.size()) os << ",";
            os << "\n";
        }
        os << pad0 << "}";
        return;
    }
    case json::value_t::array: {
        if (j.empty()) { os << "[]"; return; }
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            os << pad;
            dump(j[i], os, indent, depth + 1);
            if (i + 1 < j.size()) os << ",";
            os << "\n";
        }
        os << pad0 << "]";
        return;
    }
    case json::value_t::number_float: {
        const double v = j.get<double>();
        if (!std::isfinite(v)) { os << "null"; return; }
        os << format_double(v);
        return;
    }
    default:
        os << j.dump();
        return;
    }
}

} // namespace detail_json

/// Serialize with floats printed via format_double; otherwise standard JSON.
inline std::string dump_json(const json& j, int indent = 2) {
    std::ostringstream os;
    detail_json::dump(j, os, indent, 0);
    os << "\n";
    return os.str();
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << dump_json(j);
}

inline json load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return json::parse(in);
}

/// FNV-1a over the canonical dump; embedded in every result file.
inline std::string config_hash(const json& config) {
    const std::string s = dump_json(config, 0);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json vec_to_json(const Vec& v) { return json(v); }

inline Vec vec_from_json(const json& j) { return j.get<Vec>(); }

inline json mat_to_json(const Matrix& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (int k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
        rows.push_back(r);
    }
    return rows;
}

inline Matrix mat_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix: expected a nonempty array of rows");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[static_cast<std::size_t>(i)].size()) != cols)
            throw std::invalid_argument("matrix: ragged rows");
        for (int k = 0; k < cols; ++k)
            m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

inline json grid_to_json(const Grid& g) {
    json j;
    j["dim"] = g.dim();
    j["n"] = g.cells_per_side();
    j["box"] = {{"lo", g.lo()}, {"hi", g.hi()}};
    j["rotation"] = mat_to_json(g.rotation());
    if (g.split_diagonal()) j["split_diagonal"] = true;
    if (g.graded()) j["boundary_layer"] = g.boundary_layer();
    return j;
}

inline Grid grid_from_json(const json& j) {
    const int dim = j.at("dim").get<int>();
    const int n = j.at("n").get<int>();
    Vec lo = vec_from_json(j.at("box").at("lo"));
    Vec hi = vec_from_json(j.at("box").at("hi"));
    Matrix rot = mat_from_json(j.at("rotation"));
    const bool split = j.value("split_diagonal", false);
    const double layer = j.value("boundary_layer", 0.0);
    return Grid(dim, n, std::move(lo), std::move(hi), std::move(rot), split, layer);
}

inline json field_to_json(const SBVField& u) {
    json j;
    j["version"] = "sbvfield-v1";
    j["grid"] = grid_to_json(u.grid());
    json cells = json::array();
    for (int c = 0; c < u.grid().cell_count(); ++c)
        cells.push_back({{"offset", u.offset(c)}, {"slope", mat_to_json(u.slope(c))}});
    j["cells"] = std::move(cells);
    return j;
}

inline SBVField field_from_json(const json& j) {
    if (j.value("version", "") != std::string("sbvfield-v1"))
        throw std::invalid_argument("expected a sbvfield-v1 document");
    Grid g = grid_from_json(j.at("grid"));
    const json& cells = j.at("cells");
    if (static_cast<int>(cells.size()) != g.cell_count())
        throw std::invalid_argument("sbvfield-v1: cell count does not match the grid");
    const Matrix s0 = mat_from_json(cells[0].at("slope"));
    SBVField u(g, s0.rows());
    for (int c = 0; c < g.cell_count(); ++c) {
        u.offset(c) = vec_from_json(cells[static_cast<std::size_t>(c)].at("offset"));
        u.slope(c) = mat_from_json(cells[static_cast<std::size_t>(c)].at("slope"));
        if (static_cast<int>(u.offset(c).size()) != s0.rows() || u.slope(c).rows() != s0.rows() ||
            u.slope(c).cols() != g.dim())
            throw std::invalid_argument("sbvfield-v1: inconsistent cell data shapes");
    }
    return u;
}

inline json family_to_json(const IndexedFamily& fam) {
    fam.validate();
    json j;
    j["version"] = "sbvfamily-v1";
    j["index_values"] = fam.index_values;
    json fields = json::array();
    for (const SBVField& u : fam.fields) fields.push_back(field_to_json(u));
    j["fields"] = std::move(fields);
    return j;
}

inline IndexedFamily family_from_json(const json& j) {
    if (j.value("version", "") != std::string("sbvfamily-v1"))
        throw std::invalid_argument("expected a sbvfamily-v1 document");
    IndexedFamily fam;
    fam.index_values = j.at("index_values").get<std::vector<std::vector<int>>>();
    for (const json& f : j.at("fields")) fam.fields.push_back(field_from_json(f));
    fam.validate();
    return fam;
}

/// Catalog selection as it appears in config files.
struct DensitySpec {
    std::string bulk = "quadratic";
    std::string surface = "trace-interfacial";
    double q = 2.0;
    double surface_scale = 1.0;

    DensityPair make() const { return make_pair_by_name(bulk, surface, q, surface_scale); }
};

inline json density_to_json(const DensitySpec& d) {
    return {{"bulk", d.bulk}, {"surface", d.surface}, {"q", d.q}, {"surface_scale", d.surface_scale}};
}

inline DensitySpec density_from_json(const json& j) {
    DensitySpec d;
    d.bulk = j.value("bulk", d.bulk);
    d.surface = j.value("surface", d.surface);
    d.q = j.value("q", d.q);
    d.surface_scale = j.value("surface_scale", d.surface_scale);
    return d;
}

inline json options_to_json(const SolverOptions& o) {
    json j;
    j["restarts"] = o.restarts;
    j["max_iterations"] = o.max_iterations;
    j["tolerance"] = o.tolerance;
    j["eps_start"] = o.eps_start;
    j["eps_end"] = o.eps_end;
    j["polish_sweeps"] = o.polish_sweeps;
    j["feasibility_tol"] = o.feasibility_tol;
    j["seed"] = o.seed;
    j["allow_exact_1d"] = o.allow_exact_1d;
    j["split_diagonals"] = o.split_diagonals;
    j["boundary_layer"] = o.boundary_layer;
    return j;
}

inline SolverOptions options_from_json(const json& j) {
    SolverOptions o;
    o.restarts = j.value("restarts", o.restarts);
    o.max_iterations = j.value("max_iterations", o.max_iterations);
    o.tolerance = j.value("tolerance", o.tolerance);
    o.eps_start = j.value("eps_start", o.eps_start);
    o.eps_end = j.value("eps_end", o.eps_end);
    o.polish_sweeps = j.value("polish_sweeps", o.polish_sweeps);
    o.feasibility_tol = j.value("feasibility_tol", o.feasibility_tol);
    o.seed = j.value("seed", o.seed);
    o.allow_exact_1d = j.value("allow_exact_1d", o.allow_exact_1d);
    o.split_diagonals = j.value("split_diagonals", o.split_diagonals);
    o.boundary_layer = j.value("boundary_layer", o.boundary_layer);
    return o;
}

inline json bulk_problem_to_json(const BulkProblem& p, const DensitySpec& density) {
    json j;
    j["version"] = "bulkproblem-v1";
    j["x"] = p.x;
    j["A"] = mat_to_json(p.A);
    j["B"] = mat_to_json(p.B);
    j["density"] = density_to_json(density);
    j["n"] = p.n;
    j["options"] = options_to_json(p.options);
    return j;
}

inline BulkProblem bulk_problem_from_json(const json& j) {
    if (j.value("version", "") != std::string("bulkproblem-v1"))
        throw std::invalid_argument("expected a bulkproblem-v1 document");
    BulkProblem p;
    p.x = vec_from_json(j.at("x"));
    p.A = mat_from_json(j.at("A"));
    p.B = mat_from_json(j.at("B"));
    p.pair = density_from_json(j.at("density")).make();
    p.n = j.value("n", p.n);
    if (j.contains("options")) p.options = options_from_json(j.at("options"));
    return p;
}

inline const char* mode_name(SolveMode m) {
    return m == SolveMode::Exact1dConvex ? "exact-1d-convex" : "numeric-upper-bound";
}

inline json result_to_json(const SolveResult& r) {
    json j;
    j["version"] = "solveresult-v1";
    j["value"] = r.value;
    j["mode"] = mode_name(r.mode);
    j["boundary_residual"] = r.boundary_residual;
    j["mean_gradient_residual"] = r.mean_gradient_residual;
    j["iterations"] = r.iterations;
    j["restarts_used"] = r.restarts_used;
    j["converged"] = r.converged;
    j["minimizer"] = field_to_json(r.minimizer);
    return j;
}

inline json cache_to_json(const std::map<std::string, double>& cache) {
    json j;
    j["version"] = "densitycache-v1";
    json entries = json::object();
    for (const auto& [k, v] : cache) entries[k] = v;
    j["entries"] = std::move(entries);
    return j;
}

inline std::map<std::string, double> cache_from_json(const json& j) {
    if (j.value("version", "") != std::string("densitycache-v1"))
        throw std::invalid_argument("expected a densitycache-v1 document");
    std::map<std::string, double> cache;
    for (auto it = j.at("entries").begin(); it != j.at("entries").end(); ++it)
        cache[it.key()] = it.value().get<double>();
    return cache;
}

} // namespace hsd
