#include "srmpc/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace srmpc {

namespace {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ConfigError("config: " + (path.empty() ? msg : path + ": " + msg));
}

void reject_unknown(const json& obj, const std::string& path,
                    const std::set<std::string>& known) {
    for (const auto& item : obj.items()) {
        if (!known.count(item.key())) {
            fail(path, "unknown key '" + item.key() + "'");
        }
    }
}

const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& obj, const std::string& path, const std::string& key,
                  std::optional<double> fallback = std::nullopt) {
    const json* v = find(obj, key);
    if (!v) {
        if (fallback) return *fallback;
        fail(path, "missing required key '" + key + "'");
    }
    if (!v->is_number()) fail(path + "." + key, "expected a number");
    return v->get<double>();
}

int get_int(const json& obj, const std::string& path, const std::string& key,
            std::optional<int> fallback = std::nullopt) {
    const json* v = find(obj, key);
    if (!v) {
        if (fallback) return *fallback;
        fail(path, "missing required key '" + key + "'");
    }
    if (!v->is_number_integer()) fail(path + "." + key, "expected an integer");
    return v->get<int>();
}

std::uint64_t get_seed(const json& obj, const std::string& path, const std::string& key,
                       std::uint64_t fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number_unsigned() && !v->is_number_integer()) {
        fail(path + "." + key, "expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key,
              bool fallback) {
    const json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(path + "." + key, "expected a boolean");
    return v->get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const std::string& key,
                       std::optional<std::string> fallback = std::nullopt) {
    const json* v = find(obj, key);
    if (!v) {
        if (fallback) return *fallback;
        fail(path, "missing required key '" + key + "'");
    }
    if (!v->is_string()) fail(path + "." + key, "expected a string");
    return v->get<std::string>();
}

Vec parse_vector(const json& v, const std::string& path) {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    Vec out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) fail(path, "expected an array of numbers");
        out(static_cast<int>(i)) = v[i].get<double>();
    }
    return out;
}

// A matrix is either a nested array of rows or {"diag": [...]}.
Mat parse_matrix(const json& v, const std::string& path) {
    if (v.is_object()) {
        reject_unknown(v, path, {"diag"});
        const json* d = find(v, "diag");
        if (!d) fail(path, "matrix object must contain 'diag'");
        const Vec diag = parse_vector(*d, path + ".diag");
        return Mat(diag.asDiagonal());
    }
    if (!v.is_array() || v.empty()) fail(path, "expected a matrix (array of rows)");
    const size_t rows = v.size();
    if (!v[0].is_array()) fail(path, "expected a matrix (array of rows)");
    const size_t cols = v[0].size();
    Mat out(rows, cols);
    for (size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols) fail(path, "ragged matrix rows");
        for (size_t j = 0; j < cols; ++j) {
            if (!v[i][j].is_number()) fail(path, "matrix entries must be numbers");
            out(static_cast<int>(i), static_cast<int>(j)) = v[i][j].get<double>();
        }
    }
    return out;
}

Mat get_matrix(const json& obj, const std::string& path, const std::string& key) {
    const json* v = find(obj, key);
    if (!v) fail(path, "missing required key '" + key + "'");
    return parse_matrix(*v, path + "." + key);
}

Vec get_vector(const json& obj, const std::string& path, const std::string& key) {
    const json* v = find(obj, key);
    if (!v) fail(path, "missing required key '" + key + "'");
    return parse_vector(*v, path + "." + key);
}

SolverConfig parse_solver(const json* v, const std::string& path, SolverConfig defaults) {
    if (!v) return defaults;
    if (!v->is_object()) fail(path, "expected an object");
    reject_unknown(*v, path, {"tol", "max_iterations"});
    SolverConfig s = defaults;
    s.tol = get_number(*v, path, "tol", defaults.tol);
    s.max_iterations = get_int(*v, path, "max_iterations", defaults.max_iterations);
    if (s.tol <= 0.0) fail(path + ".tol", "must be > 0");
    if (s.max_iterations < 1) fail(path + ".max_iterations", "must be >= 1");
    return s;
}

ControllerSpec parse_controller(const json& v, const std::string& path) {
    if (!v.is_object()) fail(path, "expected an object");
    reject_unknown(v, path, {"type", "alpha"});
    ControllerSpec c;
    const std::string type = get_string(v, path, "type");
    if (type == "nominal") {
        c.kind = ControllerKind::Nominal;
        if (find(v, "alpha")) fail(path, "'alpha' is only valid for self_reflective");
    } else if (type == "self_reflective") {
        c.kind = ControllerKind::SelfReflective;
        c.alpha = get_number(v, path, "alpha");
        if (c.alpha < 0.0) fail(path + ".alpha", "must be >= 0");
    } else {
        fail(path + ".type", "must be 'nominal' or 'self_reflective'");
    }
    return c;
}

}  // namespace

Model build_model(const BenchmarkConfig& cfg) {
    return instantiate_benchmark(cfg.name, cfg.params);
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string raw = buffer.str();

    json root;
    try {
        root = json::parse(raw);
    } catch (const json::parse_error& e) {
        // byte offset -> line/column
        size_t line = 1, col = 1;
        for (size_t i = 0; i + 1 < e.byte && i < raw.size(); ++i) {
            if (raw[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError("config: parse error at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(root, "", {"benchmark", "noise", "sim", "game", "analysis", "output"});

    ExperimentConfig cfg;
    cfg.config_hash = fnv1a64(raw);

    // benchmark
    const json* bench = find(root, "benchmark");
    if (!bench || !bench->is_object()) fail("benchmark", "required object");
    reject_unknown(*bench, "benchmark", {"name", "delta", "lq"});
    cfg.benchmark.name = get_string(*bench, "benchmark", "name");
    cfg.benchmark.params.delta = get_number(*bench, "benchmark", "delta", 0.01);
    if (const json* lq = find(*bench, "lq")) {
        if (!lq->is_object()) fail("benchmark.lq", "expected an object");
        reject_unknown(*lq, "benchmark.lq", {"A", "B", "C", "Q", "R", "S", "P"});
        cfg.benchmark.params.A = get_matrix(*lq, "benchmark.lq", "A");
        cfg.benchmark.params.B = get_matrix(*lq, "benchmark.lq", "B");
        cfg.benchmark.params.Q = get_matrix(*lq, "benchmark.lq", "Q");
        cfg.benchmark.params.R = get_matrix(*lq, "benchmark.lq", "R");
        if (find(*lq, "C")) cfg.benchmark.params.C = get_matrix(*lq, "benchmark.lq", "C");
        if (find(*lq, "S")) cfg.benchmark.params.S = get_matrix(*lq, "benchmark.lq", "S");
        if (find(*lq, "P")) cfg.benchmark.params.P = get_matrix(*lq, "benchmark.lq", "P");
    }

    // noise
    const json* noise = find(root, "noise");
    if (!noise || !noise->is_object()) fail("noise", "required object");
    reject_unknown(*noise, "noise", {"W", "V", "gamma"});
    const Mat W = get_matrix(*noise, "noise", "W");
    const Mat V = get_matrix(*noise, "noise", "V");
    cfg.noise = NoiseSpec::bounded(W, V);
    if (find(*noise, "gamma")) {
        cfg.noise.gamma = get_number(*noise, "noise", "gamma");
        if (cfg.noise.gamma <= 0.0) fail("noise.gamma", "must be > 0");
    }

    // sim
    if (const json* sim = find(root, "sim")) {
        if (!sim->is_object()) fail("sim", "expected an object");
        reject_unknown(*sim, "sim",
                       {"steps", "horizon", "x0_star", "y0", "sigma0", "controllers", "seed",
                        "divergence_bound", "solver"});
        cfg.sim.present = true;
        cfg.sim.steps = get_int(*sim, "sim", "steps");
        cfg.sim.horizon = get_int(*sim, "sim", "horizon");
        if (cfg.sim.steps < 1) fail("sim.steps", "must be >= 1");
        if (cfg.sim.horizon < 1) fail("sim.horizon", "must be >= 1");
        cfg.sim.x0_star = get_vector(*sim, "sim", "x0_star");
        cfg.sim.y0 = find(*sim, "y0") ? get_vector(*sim, "sim", "y0") : cfg.sim.x0_star;
        cfg.sim.sigma0 = get_matrix(*sim, "sim", "sigma0");
        const json* ctrls = find(*sim, "controllers");
        if (!ctrls || !ctrls->is_array() || ctrls->empty()) {
            fail("sim.controllers", "non-empty array required");
        }
        for (size_t i = 0; i < ctrls->size(); ++i) {
            cfg.sim.controllers.push_back(
                parse_controller((*ctrls)[i], "sim.controllers[" + std::to_string(i) + "]"));
        }
        cfg.sim.seed = get_seed(*sim, "sim", "seed", 1);
        cfg.sim.divergence_bound = get_number(*sim, "sim", "divergence_bound", 1e3);
        if (cfg.sim.divergence_bound <= 0.0) fail("sim.divergence_bound", "must be > 0");
        cfg.sim.solver = parse_solver(find(*sim, "solver"), "sim.solver", SolverConfig{});
    }

    // game
    if (const json* game = find(root, "game")) {
        if (!game->is_object()) fail("game", "expected an object");
        reject_unknown(*game, "game",
                       {"horizon", "x0_star", "y0", "sample_y0", "sigma0", "controller",
                        "solver"});
        cfg.game.present = true;
        cfg.game.horizon = get_int(*game, "game", "horizon");
        if (cfg.game.horizon < 1) fail("game.horizon", "must be >= 1");
        cfg.game.x0_star = get_vector(*game, "game", "x0_star");
        cfg.game.sample_y0 = get_bool(*game, "game", "sample_y0", true);
        cfg.game.y0 =
            find(*game, "y0") ? get_vector(*game, "game", "y0") : cfg.game.x0_star;
        cfg.game.sigma0 = get_matrix(*game, "game", "sigma0");
        if (const json* c = find(*game, "controller")) {
            cfg.game.controller = parse_controller(*c, "game.controller");
        }
        cfg.game.solver =
            parse_solver(find(*game, "solver"), "game.solver", SolverConfig{1e-10, 4000});
    }

    // analysis
    if (const json* an = find(root, "analysis")) {
        if (!an->is_object()) fail("analysis", "expected an object");
        reject_unknown(*an, "analysis",
                       {"loss_decomposition", "second_order_estimate", "monte_carlo",
                        "gamma_scaling", "alpha_sweep"});
        if (const json* ld = find(*an, "loss_decomposition")) {
            if (!ld->is_object()) fail("analysis.loss_decomposition", "expected an object");
            reject_unknown(*ld, "analysis.loss_decomposition", {"seed"});
            cfg.analysis.loss_decomposition = true;
            cfg.analysis.loss_seed = get_seed(*ld, "analysis.loss_decomposition", "seed", 1);
        }
        if (const json* est = find(*an, "second_order_estimate")) {
            if (!est->is_boolean()) fail("analysis.second_order_estimate", "expected a boolean");
            cfg.analysis.estimate = est->get<bool>();
        }
        if (const json* mc = find(*an, "monte_carlo")) {
            if (!mc->is_object()) fail("analysis.monte_carlo", "expected an object");
            reject_unknown(*mc, "analysis.monte_carlo", {"trials", "seed"});
            cfg.analysis.mc.present = true;
            cfg.analysis.mc.trials = get_int(*mc, "analysis.monte_carlo", "trials");
            if (cfg.analysis.mc.trials < 2) fail("analysis.monte_carlo.trials", "must be >= 2");
            cfg.analysis.mc.seed = get_seed(*mc, "analysis.monte_carlo", "seed", 1);
        }
        if (const json* ga = find(*an, "gamma_scaling")) {
            if (!ga->is_object()) fail("analysis.gamma_scaling", "expected an object");
            reject_unknown(*ga, "analysis.gamma_scaling", {"levels", "trials", "seed"});
            cfg.analysis.gamma.present = true;
            const Vec lv = get_vector(*ga, "analysis.gamma_scaling", "levels");
            for (int i = 0; i < lv.size(); ++i) cfg.analysis.gamma.levels.push_back(lv(i));
            cfg.analysis.gamma.trials = get_int(*ga, "analysis.gamma_scaling", "trials");
            cfg.analysis.gamma.seed = get_seed(*ga, "analysis.gamma_scaling", "seed", 1);
        }
        if (const json* sw = find(*an, "alpha_sweep")) {
            if (!sw->is_object()) fail("analysis.alpha_sweep", "expected an object");
            reject_unknown(*sw, "analysis.alpha_sweep",
                           {"alphas", "horizon", "y0", "sigma0", "solver"});
            cfg.analysis.sweep.present = true;
            const Vec al = get_vector(*sw, "analysis.alpha_sweep", "alphas");
            if (al.size() == 0) fail("analysis.alpha_sweep.alphas", "must be non-empty");
            for (int i = 0; i < al.size(); ++i) cfg.analysis.sweep.alphas.push_back(al(i));
            cfg.analysis.sweep.horizon = get_int(*sw, "analysis.alpha_sweep", "horizon");
            cfg.analysis.sweep.y0 = get_vector(*sw, "analysis.alpha_sweep", "y0");
            cfg.analysis.sweep.sigma0 = get_matrix(*sw, "analysis.alpha_sweep", "sigma0");
            cfg.analysis.sweep.solver = parse_solver(find(*sw, "solver"),
                                                     "analysis.alpha_sweep.solver",
                                                     SolverConfig{1e-6, 2000});
        }
    }

    // output
    if (const json* out = find(root, "output")) {
        if (!out->is_object()) fail("output", "expected an object");
        reject_unknown(*out, "output", {"dir", "prefix", "plot_data"});
        cfg.output.dir = get_string(*out, "output", "dir", std::string("out"));
        cfg.output.prefix = get_string(*out, "output", "prefix", std::string("run"));
        cfg.output.plot_data = get_bool(*out, "output", "plot_data", false);
    }

    return cfg;
}

}  // namespace srmpc
