#include "rholab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include <CLI11.hpp>

#include "rholab/config.hpp"
#include "rholab/errors.hpp"
#include "rholab/expansion.hpp"
#include "rholab/filtering.hpp"
#include "rholab/gradient.hpp"
#include "rholab/grid_operator.hpp"
#include "rholab/iterated_integrals.hpp"
#include "rholab/multi_index.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/rng.hpp"
#include "rholab/robust.hpp"
#include "rholab/semigroup.hpp"
#include "rholab/special_functions.hpp"

namespace rholab::cli {

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// flag plumbing

/// Options shared by every subcommand.  Each subcommand owns one instance so
/// CLI11 option targets never alias across subcommands.
struct CommonFlags {
    std::string config_file;
    std::string results;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<double> half_width;
    std::optional<int> nodes;
    std::optional<double> horizon;
    std::optional<int> steps;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config_file, "JSON configuration file");
    sub->add_option("--results", f.results,
                    "results root (default: $RHOLAB_RESULTS_ROOT or ./results)");
    sub->add_option("--preset", f.preset,
                    "model preset: linear-gaussian, cubic-sensor, bm-1d, ou-tanh");
    sub->add_option("--seed", f.seed, "root seed; every random stream derives from it");
    sub->add_option("--threads", f.threads,
                    "worker budget, recorded in the manifest (execution is sequential and "
                    "independent of this value)");
    sub->add_option("--half-width", f.half_width, "spatial grid half width L");
    sub->add_option("--nodes", f.nodes, "spatial grid nodes per axis");
    sub->add_option("--horizon", f.horizon, "path horizon T");
    sub->add_option("--steps", f.steps, "path steps M");
}

/// Union of subcommand-specific option targets; each subcommand registers
/// only the ones it understands.
struct SubFlags {
    std::optional<double> x0, t0, time_, s, t, width;
    std::optional<int> paths, n_paths, particles, replicates, y_seed, levels, level, depth,
        k, triples, trials, n_times, max_level, mc_paths, channels;
    std::optional<std::string> observable, oracle, target, path_file;
    std::vector<int> alpha, beta;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* beta_opt = nullptr;
    bool csv = false;
};

// ---------------------------------------------------------------------------
// knob resolution: defaults < config file "experiment" section < flags

class Knobs {
public:
    explicit Knobs(Json defaults) : values_(std::move(defaults)) {}

    void overlay(const Json& experiment) {
        Json allowed = Json::object();
        for (const auto& item : values_.items()) allowed[item.key()] = true;
        reject_unknown_keys(experiment, allowed, "experiment");
        for (const auto& item : experiment.items()) values_[item.key()] = item.value();
    }

    template <class T>
    void set(const char* key, const std::optional<T>& flag) {
        if (flag) values_[key] = *flag;
    }
    void set_list(const char* key, const CLI::Option* opt, const std::vector<int>& v) {
        if (opt != nullptr && opt->count() > 0) values_[key] = v;
    }
    void set_flag(const char* key, bool v) {
        if (v) values_[key] = true;
    }

    double num(const char* key) const {
        const Json& v = at(key);
        if (!v.is_number()) bad(key, "a number");
        return v.get<double>();
    }
    int integer(const char* key) const {
        const Json& v = at(key);
        if (!v.is_number_integer()) bad(key, "an integer");
        return v.get<int>();
    }
    std::string str(const char* key) const {
        const Json& v = at(key);
        if (!v.is_string()) bad(key, "a string");
        return v.get<std::string>();
    }
    bool flag(const char* key) const {
        const Json& v = at(key);
        if (!v.is_boolean()) bad(key, "a boolean");
        return v.get<bool>();
    }
    std::vector<int> int_list(const char* key) const {
        const Json& v = at(key);
        if (!v.is_array()) bad(key, "an integer array");
        std::vector<int> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) bad(key, "an integer array");
            out.push_back(e.get<int>());
        }
        return out;
    }
    const Json& json() const { return values_; }

private:
    const Json& at(const char* key) const {
        if (!values_.contains(key))
            throw ValidationError(std::string("config: missing experiment key ") + key);
        return values_.at(key);
    }
    [[noreturn]] static void bad(const char* key, const char* want) {
        throw ValidationError(std::string("config: experiment.") + key + " must be " + want);
    }
    Json values_;
};

struct Context {
    std::string subcommand;
    ExperimentConfig cfg;
    Knobs knobs;
    Json resolved;
    fs::path dir;
    std::vector<std::string> artifacts;
};

double json_num(const Json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number())
        throw ValidationError("config: " + where + "." + key + " must be a number");
    return obj.at(key).get<double>();
}

int json_int(const Json& obj, const char* key, int fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number_integer())
        throw ValidationError("config: " + where + "." + key + " must be an integer");
    return obj.at(key).get<int>();
}

/// Loads the config file, validates it against the schema, applies the
/// precedence chain, builds the model, creates the run directory.
Context make_context(const std::string& subcommand, const CommonFlags& f, Json knob_defaults,
                     const std::function<void(Knobs&)>& apply_flags) {
    const Json raw = f.config_file.empty() ? Json::object() : load_json_file(f.config_file);
    reject_unknown_keys(raw, config_schema(), "");

    Json model_spec =
        raw.contains("model") ? raw.at("model") : Json{{"preset", "linear-gaussian"}};
    if (!f.preset.empty()) model_spec = Json{{"preset", f.preset}};

    Context ctx{subcommand, ExperimentConfig{}, Knobs(std::move(knob_defaults)), Json{}, {}, {}};
    ctx.cfg.model = model_from_json(model_spec);
    ctx.cfg.model_spec = model_spec;

    const Json grid = raw.contains("grid") ? raw.at("grid") : Json::object();
    const Json path = raw.contains("path") ? raw.at("path") : Json::object();
    ctx.cfg.half_width = f.half_width.value_or(json_num(grid, "half_width", 4.0, "grid"));
    ctx.cfg.nodes = f.nodes.value_or(json_int(grid, "nodes", 201, "grid"));
    ctx.cfg.horizon = f.horizon.value_or(json_num(path, "horizon", 0.5, "path"));
    ctx.cfg.steps = f.steps.value_or(json_int(path, "steps", 512, "path"));
    ctx.cfg.seed = f.seed.value_or(
        static_cast<std::uint64_t>(json_int(raw, "seed", 1, "config")));
    ctx.cfg.threads = f.threads.value_or(json_int(raw, "threads", 1, "config"));

    if (!(ctx.cfg.half_width > 0.0)) throw ValidationError("config: grid.half_width must be > 0");
    if (ctx.cfg.nodes < 3) throw ValidationError("config: grid.nodes must be >= 3");
    if (!(ctx.cfg.horizon > 0.0)) throw ValidationError("config: path.horizon must be > 0");
    if (ctx.cfg.steps < 1) throw ValidationError("config: path.steps must be >= 1");
    if (ctx.cfg.threads < 1) throw ValidationError("config: threads must be >= 1");

    if (raw.contains("experiment")) ctx.knobs.overlay(raw.at("experiment"));
    apply_flags(ctx.knobs);

    ctx.resolved = Json{
        {"model", model_spec},
        {"grid", {{"half_width", ctx.cfg.half_width}, {"nodes", ctx.cfg.nodes}}},
        {"path", {{"horizon", ctx.cfg.horizon}, {"steps", ctx.cfg.steps}}},
        {"seed", ctx.cfg.seed},
        {"threads", ctx.cfg.threads},
        {"experiment", ctx.knobs.json()},
    };
    ctx.dir = results_root(f.results) /
              (subcommand + "-" + config_hash(ctx.resolved).substr(0, 8));
    fs::create_directories(ctx.dir);
    return ctx;
}

void finish(Context& ctx, std::ostream& out) {
    write_manifest(ctx.dir, ctx.subcommand, ctx.resolved, ctx.artifacts);
    out << "run directory: " << ctx.dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// small shared helpers

Vec start_point(const SdeModel& model, double x0) { return Vec::Constant(model.N, x0); }

long node_near(const SpatialGrid& g, double x0) {
    if (g.N != 1)
        throw ValidationError("the report point -> grid node lookup needs a 1-D grid");
    const long j = std::lround((x0 + g.L) / g.h());
    return std::clamp(j, 0L, static_cast<long>(g.n) - 1);
}

std::function<double(const Vec&)> observable_fn(const std::string& name, double width) {
    if (!(width > 0.0)) throw ValidationError("observable width must be > 0");
    if (name == "id") return [](const Vec& x) { return x(0); };
    if (name == "tanh")
        return [width](const Vec& x) { return std::tanh(x(0) / width); };
    if (name == "one") return [](const Vec&) { return 1.0; };
    throw ValidationError("unknown observable '" + name + "' (expected id, tanh or one)");
}

std::string pad3(int p) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03d", p);
    return buf;
}

std::string verdict(bool pass) { return pass ? "[PASS]" : "[FAIL]"; }

/// Writes verify.json so verify runs are rerun-reproducible artifacts too.
void write_verify_artifact(Context& ctx, const Json& payload) {
    std::ofstream f(ctx.dir / "verify.json", std::ios::binary);
    if (!f) throw ValidationError("cannot open " + (ctx.dir / "verify.json").string());
    f << payload.dump(2) << "\n";
    ctx.artifacts.push_back("verify.json");
}

// ---------------------------------------------------------------------------
// subcommand bodies

int do_simulate(Context& ctx, std::ostream& out) {
    const SdeModel& model = ctx.cfg.model;
    const double x0 = ctx.knobs.num("x0");
    const int paths = ctx.knobs.integer("paths");
    if (paths < 1) throw ValidationError("paths must be >= 1");

    std::vector<std::string> header = {"time"};
    for (int i = 1; i <= model.N; ++i) header.push_back("X_" + std::to_string(i));
    for (int i = 1; i <= model.d2; ++i) header.push_back("Y_" + std::to_string(i));

    for (int p = 0; p < paths; ++p) {
        PathGrid grid = make_grid(ctx.cfg.horizon, ctx.cfg.steps, model.d1, model.d2);
        grid.dB = brownian_increments(ctx.cfg.seed, 2 * static_cast<std::uint64_t>(p),
                                      ctx.cfg.steps, model.d1, grid.dt());
        const Eigen::MatrixXd x_path = simulate_signal(model, start_point(model, x0), grid);
        const Eigen::MatrixXd dw = brownian_increments(
            ctx.cfg.seed, 2 * static_cast<std::uint64_t>(p) + 1, ctx.cfg.steps, model.d2,
            grid.dt());
        grid.Y = simulate_observation(model, x_path, grid, dw);

        std::vector<std::vector<std::string>> rows;
        for (int k = 0; k <= ctx.cfg.steps; ++k) {
            std::vector<std::string> row = {format_double(grid.time(k))};
            for (int i = 0; i < model.N; ++i) row.push_back(format_double(x_path(k, i)));
            for (int i = 0; i < model.d2; ++i) row.push_back(format_double(grid.Y(k, i)));
            rows.push_back(std::move(row));
        }
        const std::string name = "path-" + pad3(p) + ".csv";
        write_csv(ctx.dir / name, header, rows);
        ctx.artifacts.push_back(name);
    }
    out << "simulated " << paths << " scenario(s) of model " << model.name << " over T="
        << format_double(ctx.cfg.horizon) << ", M=" << ctx.cfg.steps << "\n";
    finish(ctx, out);
    return 0;
}

int do_filter(Context& ctx, std::ostream& out) {
    const SdeModel& model = ctx.cfg.model;
    const double x0 = ctx.knobs.num("x0");
    const int n_paths = ctx.knobs.integer("n_paths");
    const int particles = ctx.knobs.integer("particles");
    const int replicates = ctx.knobs.integer("replicates");
    const int y_seed = ctx.knobs.integer("y_seed");
    const std::string oracle = ctx.knobs.str("oracle");
    if (n_paths < 2) throw ValidationError("n_paths must be >= 2");
    if (particles < 2) throw ValidationError("particles must be >= 2");
    if (replicates < 2) throw ValidationError("replicates must be >= 2");
    if (y_seed < 0) throw ValidationError("y_seed must be >= 0");
    if (oracle != "none" && oracle != "kalman")
        throw ValidationError("unknown oracle '" + oracle + "' (expected none or kalman)");

    const auto phi =
        observable_fn(ctx.knobs.str("observable"), ctx.knobs.num("observable_width"));
    const Vec x0v = start_point(model, x0);
    const PathGrid grid = sample_observation_path(model, x0v, ctx.cfg.horizon, ctx.cfg.steps,
                                                  ctx.cfg.seed, y_seed);

    const RhoResult rho = rho_mc(model, x0v, grid, phi, n_paths, ctx.cfg.seed, 1000000);
    const ParticleFilterResult pf = particle_filter(model, x0v, grid, phi, particles,
                                                    replicates, ctx.cfg.seed, 2000000);

    Json result = {
        {"rho_phi", rho.value},
        {"rho_phi_stderr", rho.stderr_},
        {"rho_one", rho.mass},
        {"rho_one_stderr", rho.mass_stderr},
        {"pi_phi", rho.normalised},
        {"stderr", rho.normalised_stderr},
        {"particle_pi", pf.normalised},
        {"particle_stderr", pf.stderr_},
        {"n_paths", n_paths},
        {"particles", particles},
        {"seed", ctx.cfg.seed},
        {"model_hash", config_hash(ctx.cfg.model_spec)},
    };
    if (oracle == "kalman") {
        if (model.name != "linear-gaussian")
            throw ValidationError(
                "--oracle kalman needs the linear-gaussian preset (identity sensor)");
        const KalmanBucyResult kb = kalman_bucy_oracle(1.0, 1.0, grid, x0, 0.0);
        const double mean = kb.mean(ctx.cfg.steps);
        result["oracle_mean"] = mean;
        result["z_score"] = (rho.normalised - mean) / std::max(rho.normalised_stderr, 1e-300);
        result["z_score_particle"] = (pf.normalised - mean) / std::max(pf.stderr_, 1e-300);
    }

    std::ofstream f(ctx.dir / "filter.json", std::ios::binary);
    if (!f) throw ValidationError("cannot open " + (ctx.dir / "filter.json").string());
    f << result.dump(2) << "\n";
    ctx.artifacts.push_back("filter.json");

    out << result.dump(2) << "\n";
    finish(ctx, out);
    return 0;
}

int do_expand(Context& ctx, std::ostream& out) {
    const SdeModel& model = ctx.cfg.model;
    const int levels = ctx.knobs.integer("levels");
    const int y_seed = ctx.knobs.integer("y_seed");
    const double x0 = ctx.knobs.num("x0");
    const double t_window = ctx.knobs.num("time") > 0.0 ? ctx.knobs.num("time")
                                                        : ctx.cfg.horizon;
    if (levels < 0) throw ValidationError("levels must be >= 0");
    if (y_seed < 0) throw ValidationError("y_seed must be >= 0");

    const SpatialGrid sgrid(model.N, ctx.cfg.nodes, ctx.cfg.half_width);
    const GridSemigroup sg(model, sgrid);
    const auto sensors = discretize_sensors(model, sgrid);
    const Vec phi = sgrid.discretize(
        observable_fn(ctx.knobs.str("observable"), ctx.knobs.num("observable_width")));
    const PathGrid path = sample_observation_path(model, start_point(model, x0), t_window,
                                                  ctx.cfg.steps, ctx.cfg.seed, y_seed);
    const long node = node_near(sgrid, x0);

    const ExpansionResult res =
        truncated_expansion(sg, sensors, path, phi, levels, 0, ctx.cfg.steps);

    std::vector<std::vector<std::string>> rows;
    rows.push_back({"0", "()", format_double(res.levels[0](node))});
    for (int m = 1; m <= levels; ++m)
        for (const MultiIndex& w : observation_words(m, model.d2)) {
            const Vec val = word_operator_value(sg, sensors, path, phi, w, 0, ctx.cfg.steps);
            rows.push_back({std::to_string(m), to_string(w), format_double(val(node))});
        }
    write_csv(ctx.dir / "expansion.csv", {"m", "word", "contribution"}, rows);
    ctx.artifacts.push_back("expansion.csv");

    out << "truncation at x0=" << format_double(x0) << ": "
        << format_double(res.truncation()(node)) << "\n";
    for (int m = 0; m <= levels; ++m)
        out << "level " << m << " sup: " << format_double(res.level_sup[m]) << "\n";
    finish(ctx, out);
    return 0;
}

int do_robust(Context& ctx, std::ostream& out) {
    const SdeModel& model = ctx.cfg.model;
    const int level = ctx.knobs.integer("level");
    const int y_seed = ctx.knobs.integer("y_seed");
    const double x0 = ctx.knobs.num("x0");
    if (y_seed < 0) throw ValidationError("y_seed must be >= 0");
    if (model.d2 != 1)
        throw ValidationError("the integration-by-parts display needs a single sensor channel");

    const SpatialGrid sgrid(model.N, ctx.cfg.nodes, ctx.cfg.half_width);
    const GridSemigroup sg(model, sgrid);
    const Vec h_grid = discretize_sensors(model, sgrid)[0];
    const Vec phi = sgrid.discretize(
        observable_fn(ctx.knobs.str("observable"), ctx.knobs.num("observable_width")));
    const PathGrid path = sample_observation_path(model, start_point(model, x0),
                                                  ctx.cfg.horizon, ctx.cfg.steps, ctx.cfg.seed,
                                                  y_seed);
    const long node = node_near(sgrid, x0);

    const auto& terms = ibp_terms(level);
    const auto values = ibp_term_values(sg, h_grid, path, phi, level, 0, ctx.cfg.steps);

    double total = 0.0;
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        double coeff = terms[i].sign;
        for (int w : terms[i].outer_q)
            coeff *= iterated_ito(path, MultiIndex(w, 1), 0, ctx.cfg.steps);
        total += values[i](node);
        rows.push_back({terms[i].id, format_double(coeff), ibp_term_label(terms[i]),
                        format_double(values[i](node))});
    }
    write_csv(ctx.dir / "robust.csv", {"term", "coefficient", "label", "contribution"}, rows);
    ctx.artifacts.push_back("robust.csv");

    out << "level-" << level << " operator value at x0=" << format_double(x0) << ": "
        << format_double(total) << " (" << terms.size() << " terms)\n";
    finish(ctx, out);
    return 0;
}

int do_signature(Context& ctx, std::ostream& out) {
    const int depth = ctx.knobs.integer("depth");
    const int y_seed = ctx.knobs.integer("y_seed");
    const std::string path_file = ctx.knobs.str("path_file");
    if (depth < 1) throw ValidationError("depth must be >= 1");
    if (y_seed < 0) throw ValidationError("y_seed must be >= 0");

    PathGrid grid;
    if (!path_file.empty()) {
        const auto records = read_csv(path_file);
        if (records.size() < 3) throw ValidationError("path file needs at least two steps");
        const auto& header = records.front();
        int time_col = -1;
        std::vector<int> y_cols;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == "time") time_col = static_cast<int>(c);
            if (header[c].rfind("Y_", 0) == 0) y_cols.push_back(static_cast<int>(c));
        }
        if (time_col < 0 || y_cols.empty())
            throw ValidationError("path file needs a 'time' column and Y_* columns");
        const int M = static_cast<int>(records.size()) - 2;
        const double T = std::stod(records.back()[time_col]);
        if (!(T > 0.0)) throw ValidationError("path file: final time must be > 0");
        grid = make_grid(T, M, 1, static_cast<int>(y_cols.size()));
        for (int k = 0; k <= M; ++k) {
            const auto& row = records[static_cast<std::size_t>(k) + 1];
            if (row.size() != header.size())
                throw ValidationError("path file: ragged row " + std::to_string(k));
            const double tk = std::stod(row[time_col]);
            if (std::abs(tk - grid.time(k)) > 1e-9 * std::max(1.0, T))
                throw ValidationError("path file: times are not uniformly spaced");
            for (std::size_t i = 0; i < y_cols.size(); ++i)
                grid.Y(k, static_cast<int>(i)) = std::stod(row[y_cols[i]]);
        }
        grid.validate();
    } else {
        grid = make_grid(ctx.cfg.horizon, ctx.cfg.steps, 1, ctx.cfg.model.d2);
        fill_brownian_observation(grid, ctx.cfg.seed, 2 * static_cast<std::uint64_t>(y_seed));
    }

    const double s = ctx.knobs.num("s");
    const double t = ctx.knobs.num("t") >= 0.0 ? ctx.knobs.num("t") : grid.T;

    std::vector<std::vector<std::string>> rows;
    for (int m = 1; m <= depth; ++m)
        for (const MultiIndex& w : observation_words(m, grid.d2()))
            rows.push_back({to_string(w), format_double(s), format_double(t),
                            format_double(iterated_ito_at(grid, w, s, t))});
    write_csv(ctx.dir / "signature.csv", {"word", "s", "t", "value"}, rows);
    ctx.artifacts.push_back("signature.csv");

    out << "signature over [" << format_double(s) << ", " << format_double(t) << "]: "
        << rows.size() << " words up to level " << depth << " on " << grid.d2()
        << " channel(s)\n";
    finish(ctx, out);
    return 0;
}

int do_gradient(Context& ctx, std::ostream& out) {
    const SdeModel& model = ctx.cfg.model;
    const std::string target_name = ctx.knobs.str("target");
    GradientTarget target;
    if (target_name == "heat") target = GradientTarget::heat;
    else if (target_name == "rho") target = GradientTarget::rho;
    else if (target_name == "pi") target = GradientTarget::pi;
    else throw ValidationError("unknown target '" + target_name + "' (heat, rho or pi)");

    const MultiIndex alpha = ctx.knobs.int_list("alpha");
    const MultiIndex beta = ctx.knobs.int_list("beta");
    const double t0 = ctx.knobs.num("t0");
    const int n_times = ctx.knobs.integer("n_times");
    const int levels = ctx.knobs.integer("levels");
    const int y_seed = ctx.knobs.integer("y_seed");
    const double x0 = ctx.knobs.num("x0");
    if (!(t0 > 0.0)) throw ValidationError("t0 must be > 0");
    if (n_times < 5) throw ValidationError("n_times must be >= 5 for a stable slope fit");
    if (y_seed < 0) throw ValidationError("y_seed must be >= 0");

    std::vector<double> times;
    for (int j = 0; j < n_times; ++j) times.push_back(t0 * std::pow(2.0, -j));

    const SpatialGrid sgrid(model.N, ctx.cfg.nodes, ctx.cfg.half_width);
    const GridSemigroup sg(model, sgrid);
    const Vec phi = sgrid.discretize(
        observable_fn(ctx.knobs.str("observable"), ctx.knobs.num("observable_width")));

    PathGrid path;
    const PathGrid* path_ptr = nullptr;
    if (target != GradientTarget::heat) {
        const int scale = 1 << (n_times - 1);
        if (ctx.cfg.steps % scale != 0)
            throw ValidationError("path.steps must be divisible by 2^(n_times-1) = " +
                                  std::to_string(scale) +
                                  " so every dyadic time sits on the observation grid");
        path = sample_observation_path(model, start_point(model, x0), t0, ctx.cfg.steps,
                                       ctx.cfg.seed, y_seed);
        path_ptr = &path;
    }

    const ExponentReport rep =
        gradient_exponent_fit(model, sg, target, alpha, beta, phi, times, path_ptr, levels);

    const Json payload = {
        {"target", target_name}, {"alpha", rep.alpha},
        {"beta", rep.beta},      {"times", rep.times},
        {"sup_norms", rep.sup_norms}, {"slope", rep.slope},
        {"theoretical", rep.theoretical}, {"margin", rep.margin},
        {"pass", rep.pass},
    };
    std::ofstream f(ctx.dir / "gradient.json", std::ios::binary);
    if (!f) throw ValidationError("cannot open " + (ctx.dir / "gradient.json").string());
    f << payload.dump(2) << "\n";
    ctx.artifacts.push_back("gradient.json");

    if (ctx.knobs.flag("csv")) {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            rows.push_back({format_double(rep.times[i]), format_double(rep.sup_norms[i])});
        write_csv(ctx.dir / "gradient-norms.csv", {"t", "norm"}, rows);
        ctx.artifacts.push_back("gradient-norms.csv");
    }

    out << "target " << target_name << ", alpha " << to_string(alpha) << ", beta "
        << to_string(beta) << ": slope " << format_double(rep.slope) << " vs theoretical "
        << format_double(rep.theoretical) << " (margin " << format_double(rep.margin) << ", "
        << (rep.pass ? "pass" : "below target") << ")\n";
    finish(ctx, out);
    return 0;
}

// ---------------------------------------------------------------------------
// verify subcommands: print one verdict line each, exit 0 on pass, 3 on fail.

int do_verify_chen(Context& ctx, std::ostream& out) {
    const int k = ctx.knobs.integer("k");
    const int triples = ctx.knobs.integer("triples");
    const int channels = ctx.knobs.integer("channels");
    const int M = ctx.cfg.steps;
    if (k < 1 || k > 6) throw ValidationError("k must be in 1..6");
    if (triples < 1) throw ValidationError("triples must be >= 1");
    if (channels < 1 || channels > 3) throw ValidationError("channels must be in 1..3");
    if (M < 8) throw ValidationError("steps must be >= 8");

    PathGrid grid = make_grid(ctx.cfg.horizon, M, 1, channels);
    fill_brownian_observation(grid, ctx.cfg.seed, 0);

    Rng rng(ctx.cfg.seed, 12345);
    double max_violation = 0.0;
    for (int trial = 0; trial < triples; ++trial) {
        int a, b, c;
        do {
            a = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(M + 1));
            b = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(M + 1));
            c = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(M + 1));
            if (a > b) std::swap(a, b);
            if (b > c) std::swap(b, c);
            if (a > b) std::swap(a, b);
        } while (a == b || b == c);
        const ChenReport rep = chen_check(grid, k, a, b, c);
        max_violation = std::max(max_violation, rep.max_violation);
    }
    const bool pass = max_violation <= 1e-12;
    out << verdict(pass) << " chen: max violation " << format_double(max_violation)
        << " over " << triples << " windows (words up to level " << k << ", M=" << M
        << ", d2=" << channels << ")\n";
    write_verify_artifact(ctx, {{"check", "chen"},
                                {"max_violation", max_violation},
                                {"tolerance", 1e-12},
                                {"pass", pass}});
    finish(ctx, out);
    return pass ? 0 : 3;
}

int do_verify_neoclassical(Context& ctx, std::ostream& out) {
    const int trials = ctx.knobs.integer("trials");
    if (trials < 1) throw ValidationError("trials must be >= 1");

    Rng rng(ctx.cfg.seed, 777);
    double min_slack = std::numeric_limits<double>::infinity();
    bool all_pass = true;
    for (int i = 0; i < trials; ++i) {
        const double q = 1.0 + 3.0 * rng.uniform01();
        const int n = 1 + static_cast<int>(rng.next_u64() % 12);
        const double s = 10.0 * rng.uniform01();
        const double t = 10.0 * rng.uniform01();
        const NeoclassicalResult r = neoclassical_check(q, n, s, t);
        const double scale = std::max({1.0, std::abs(r.lhs), std::abs(r.rhs)});
        min_slack = std::min(min_slack, (r.rhs - r.lhs) / scale);
        all_pass = all_pass && r.pass;
    }
    double max_eq = 0.0;
    for (int n = 1; n <= 12; ++n) {
        const double s = 0.3 + 0.7 * n;
        const double t = 9.7 - 0.5 * n;
        const NeoclassicalResult r = neoclassical_check(1.0, n, s, t);
        const double scale = std::max({1.0, std::abs(r.lhs), std::abs(r.rhs)});
        max_eq = std::max(max_eq, std::abs(r.rhs - r.lhs) / scale);
    }
    const bool pass = all_pass && min_slack >= -1e-12 && max_eq <= 1e-12;
    out << verdict(pass) << " neoclassical: min relative slack " << format_double(min_slack)
        << " over " << trials << " draws; q=1 equality defect " << format_double(max_eq)
        << "\n";
    write_verify_artifact(ctx, {{"check", "neoclassical"},
                                {"min_slack", min_slack},
                                {"equality_defect", max_eq},
                                {"pass", pass}});
    finish(ctx, out);
    return pass ? 0 : 3;
}

int do_verify_remainder(Context& ctx, std::ostream& out) {
    const SdeModel& model = ctx.cfg.model;
    const int max_level = ctx.knobs.integer("max_level");
    const int paths = ctx.knobs.integer("paths");
    const double x0 = ctx.knobs.num("x0");
    if (max_level < 2) throw ValidationError("max_level must be >= 2");
    if (paths < 2) throw ValidationError("paths must be >= 2");
    if (model.d2 != 1)
        throw ValidationError("the remainder comparison needs a single sensor channel");

    const SpatialGrid sgrid(model.N, ctx.cfg.nodes, ctx.cfg.half_width);
    const GridSemigroup sg(model, sgrid);
    const auto sensors = discretize_sensors(model, sgrid);
    const double h_sup = sensors[0].cwiseAbs().maxCoeff();
    const Vec phi = sgrid.discretize(
        observable_fn(ctx.knobs.str("observable"), ctx.knobs.num("observable_width")));
    const double phi_sup = phi.cwiseAbs().maxCoeff();
    const long node = node_near(sgrid, x0);
    const double T = ctx.cfg.horizon;

    // One backward sweep per path gives every level at once; the telescoping
    // difference between the level-(k+1) and level-k truncations is exactly
    // the level-(k+1) contribution.
    std::vector<std::vector<double>> level_at_node(
        static_cast<std::size_t>(max_level) + 2);
    for (int p = 0; p < paths; ++p) {
        PathGrid grid = make_grid(T, ctx.cfg.steps, 1, 1);
        fill_brownian_observation(grid, ctx.cfg.seed, static_cast<std::uint64_t>(p));
        const auto levels =
            level_sums(sg, sensors, grid, phi, max_level + 1, 0, ctx.cfg.steps);
        for (int m = 0; m <= max_level + 1; ++m)
            level_at_node[static_cast<std::size_t>(m)].push_back(levels[m](node));
    }

    bool pass = true;
    Json detail = Json::array();
    for (int k = 2; k <= max_level; ++k) {
        const auto& diffs = level_at_node[static_cast<std::size_t>(k) + 1];
        double mean_sq = 0.0;
        for (double d : diffs) mean_sq += d * d;
        mean_sq /= static_cast<double>(diffs.size());
        double var_sq = 0.0;
        for (double d : diffs) var_sq += (d * d - mean_sq) * (d * d - mean_sq);
        var_sq /= static_cast<double>(diffs.size() - 1);
        const double dist = std::sqrt(mean_sq);
        const double se_dist =
            dist > 0.0 ? std::sqrt(var_sq / static_cast<double>(diffs.size())) / (2.0 * dist)
                       : 0.0;
        const double bound = std::sqrt(remainder_bound(h_sup, T, k, phi_sup));
        const bool ok = dist <= bound + 3.0 * se_dist;
        pass = pass && ok;
        out << "  level " << k << ": L2-over-Y distance " << format_double(dist) << " <= "
            << format_double(bound) << " + 3*" << format_double(se_dist) << "  "
            << verdict(ok) << "\n";
        detail.push_back({{"level", k},
                          {"distance", dist},
                          {"bound", bound},
                          {"stderr", se_dist},
                          {"pass", ok}});
    }
    out << verdict(pass) << " remainder: truncation gaps within the mean-square bound over "
        << paths << " observation paths (levels 2.." << max_level << ")\n";
    write_verify_artifact(ctx, {{"check", "remainder"}, {"levels", detail}, {"pass", pass}});
    finish(ctx, out);
    return pass ? 0 : 3;
}

int do_verify_duality(Context& ctx, std::ostream& out) {
    const SdeModel& model = ctx.cfg.model;
    const int levels = ctx.knobs.integer("levels");
    const int y_seed = ctx.knobs.integer("y_seed");
    const double x0 = ctx.knobs.num("x0");
    if (levels < 1) throw ValidationError("levels must be >= 1");
    if (y_seed < 0) throw ValidationError("y_seed must be >= 0");

    const SpatialGrid sgrid(model.N, ctx.cfg.nodes, ctx.cfg.half_width);
    const GridSemigroup sg(model, sgrid);
    const auto sensors = discretize_sensors(model, sgrid);
    const Vec phi = sgrid.discretize(
        observable_fn(ctx.knobs.str("observable"), ctx.knobs.num("observable_width")));
    const Vec psi = sgrid.discretize(
        [](const Vec& x) { return std::exp(-0.5 * x.squaredNorm()); });
    const PathGrid path = sample_observation_path(model, start_point(model, x0),
                                                  ctx.cfg.horizon, ctx.cfg.steps, ctx.cfg.seed,
                                                  y_seed);

    const DualityReport rep =
        duality_check(sg, sensors, path, phi, psi, levels, 0, ctx.cfg.steps);
    const bool pass = rep.max_residual <= 1e-8;
    out << verdict(pass) << " duality: max pairing residual " << format_double(rep.max_residual)
        << " across levels 0.." << levels << " and the summed truncation\n";
    write_verify_artifact(ctx, {{"check", "duality"},
                                {"per_level", rep.per_level},
                                {"summed", rep.summed},
                                {"max_residual", rep.max_residual},
                                {"tolerance", 1e-8},
                                {"pass", pass}});
    finish(ctx, out);
    return pass ? 0 : 3;
}

int do_verify_massbound(Context& ctx, std::ostream& out) {
    const SdeModel& model = ctx.cfg.model;
    const int paths = ctx.knobs.integer("paths");
    const int mc_paths = ctx.knobs.integer("mc_paths");
    const double x0 = ctx.knobs.num("x0");
    if (paths < 1) throw ValidationError("paths must be >= 1");
    if (mc_paths < 100) throw ValidationError("mc_paths must be >= 100");

    const SpatialGrid sgrid(model.N, ctx.cfg.nodes, ctx.cfg.half_width);
    const Vec x0v = start_point(model, x0);
    int failures = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (int p = 0; p < paths; ++p) {
        const PathGrid grid = sample_observation_path(model, x0v, ctx.cfg.horizon,
                                                      ctx.cfg.steps, ctx.cfg.seed,
                                                      static_cast<std::uint64_t>(p));
        const MassBoundReport rep = mass_lower_bound_check(
            model, x0v, grid, sgrid, mc_paths, ctx.cfg.seed, 4000000 + 1000 * p);
        if (!rep.pass) ++failures;
        worst_margin = std::min(worst_margin, rep.bound - rep.inv_mass);
    }
    const bool pass = failures == 0;
    out << verdict(pass) << " massbound: 1/mass below the exponential observation bound on "
        << (paths - failures) << "/" << paths << " scenarios (worst margin "
        << format_double(worst_margin) << ")\n";
    write_verify_artifact(ctx, {{"check", "massbound"},
                                {"scenarios", paths},
                                {"failures", failures},
                                {"worst_margin", worst_margin},
                                {"pass", pass}});
    finish(ctx, out);
    return pass ? 0 : 3;
}

int do_verify_extension(Context& ctx, std::ostream& out) {
    const int channels = ctx.knobs.integer("channels");
    const int y_seed = ctx.knobs.integer("y_seed");
    const int M = ctx.cfg.steps;
    if (channels < 1 || channels > 3) throw ValidationError("channels must be in 1..3");
    if (y_seed < 0) throw ValidationError("y_seed must be >= 0");
    if (M < 8 || (M & (M - 1)) != 0)
        throw ValidationError("steps must be a power of two so dyadic refinement stays on "
                              "the grid");

    PathGrid grid = make_grid(ctx.cfg.horizon, M, 1, channels);
    fill_brownian_observation(grid, ctx.cfg.seed, 2 * static_cast<std::uint64_t>(y_seed));

    bool pass = true;
    Json detail = Json::array();
    for (const auto schedule : {RefinementSchedule::dyadic, RefinementSchedule::thirds}) {
        const ExtensionReport rep = extend_multiplicative(grid, 3, 0, M, schedule);
        double max_diff = 0.0;
        const auto words = observation_words(3, channels);
        for (std::size_t i = 0; i < words.size(); ++i)
            max_diff = std::max(max_diff, std::abs(rep.series.level[3][i] -
                                                   iterated_ito(grid, words[i], 0, M)));
        const bool ok = max_diff <= 1e-8;
        pass = pass && ok;
        const char* name = schedule == RefinementSchedule::dyadic ? "dyadic" : "thirds";
        out << "  " << name << " refinement: " << rep.refinements
            << " rounds, level-3 reconstruction error " << format_double(max_diff) << "  "
            << verdict(ok) << "\n";
        detail.push_back({{"schedule", name},
                          {"refinements", rep.refinements},
                          {"max_diff", max_diff},
                          {"pass", ok}});
    }
    out << verdict(pass)
        << " extension: level-3 rebuilt from levels 0..2 matches the direct iterated "
           "integrals under both refinement schedules\n";
    write_verify_artifact(ctx, {{"check", "extension"}, {"schedules", detail}, {"pass", pass}});
    finish(ctx, out);
    return pass ? 0 : 3;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"numerical laboratory for the unnormalised filtering semigroup"};
    app.require_subcommand(1);

    // Option targets must outlive parsing; subcommand count is fixed, so a
    // deque keeps the addresses stable.
    std::deque<CommonFlags> common;
    std::deque<SubFlags> flags;
    int exit_code = 0;

    auto make_sub = [&](CLI::App* parent, const std::string& name, const std::string& desc)
        -> std::tuple<CLI::App*, CommonFlags*, SubFlags*> {
        CLI::App* sub = parent->add_subcommand(name, desc);
        common.emplace_back();
        flags.emplace_back();
        add_common(sub, common.back());
        return {sub, &common.back(), &flags.back()};
    };

    // --- simulate ---
    {
        auto [sub, cf, sf] = make_sub(&app, "simulate",
                                      "sample hidden signal and observation paths to CSV");
        sub->add_option("--x0", sf->x0, "signal start point (default 0)");
        sub->add_option("--paths", sf->paths, "number of scenarios (default 1)");
        sub->callback([&, cf, sf] {
            Context ctx = make_context("simulate", *cf, Json{{"x0", 0.0}, {"paths", 1}},
                                       [&](Knobs& k) {
                                           k.set("x0", sf->x0);
                                           k.set("paths", sf->paths);
                                       });
            exit_code = do_simulate(ctx, out);
        });
    }

    // --- filter ---
    {
        auto [sub, cf, sf] = make_sub(&app, "filter",
                                      "Monte Carlo and particle estimates of the filter");
        sub->add_option("--x0", sf->x0, "signal start point (default 0)");
        sub->add_option("--observable", sf->observable, "id, tanh or one (default id)");
        sub->add_option("--observable-width", sf->width, "tanh width (default 1)");
        sub->add_option("--n-paths", sf->n_paths, "Monte Carlo paths (default 10000)");
        sub->add_option("--particles", sf->particles, "particles per replicate (default 2000)");
        sub->add_option("--replicates", sf->replicates, "particle replicates (default 5)");
        sub->add_option("--y-seed", sf->y_seed, "observation scenario index (default 0)");
        sub->add_option("--oracle", sf->oracle,
                        "none or kalman (exact linear-Gaussian reference)");
        sub->callback([&, cf, sf] {
            Context ctx = make_context(
                "filter", *cf,
                Json{{"x0", 0.0},        {"observable", "id"}, {"observable_width", 1.0},
                     {"n_paths", 10000}, {"particles", 2000},  {"replicates", 5},
                     {"y_seed", 0},      {"oracle", "none"}},
                [&](Knobs& k) {
                    k.set("x0", sf->x0);
                    k.set("observable", sf->observable);
                    k.set("observable_width", sf->width);
                    k.set("n_paths", sf->n_paths);
                    k.set("particles", sf->particles);
                    k.set("replicates", sf->replicates);
                    k.set("y_seed", sf->y_seed);
                    k.set("oracle", sf->oracle);
                });
            exit_code = do_filter(ctx, out);
        });
    }

    // --- expand ---
    {
        auto [sub, cf, sf] = make_sub(&app, "expand",
                                      "per-word contributions of the observation expansion");
        sub->add_option("--levels", sf->levels, "truncation level (default 3)");
        sub->add_option("--time", sf->time_, "window length (default: path horizon)");
        sub->add_option("--y-seed", sf->y_seed, "observation scenario index (default 0)");
        sub->add_option("--x0", sf->x0, "report point (default 0)");
        sub->add_option("--observable", sf->observable, "id, tanh or one (default tanh)");
        sub->add_option("--observable-width", sf->width, "tanh width (default 1)");
        sub->callback([&, cf, sf] {
            Context ctx = make_context(
                "expand", *cf,
                Json{{"levels", 3}, {"time", 0.0}, {"y_seed", 0}, {"x0", 0.0},
                     {"observable", "tanh"}, {"observable_width", 1.0}},
                [&](Knobs& k) {
                    k.set("levels", sf->levels);
                    k.set("time", sf->time_);
                    k.set("y_seed", sf->y_seed);
                    k.set("x0", sf->x0);
                    k.set("observable", sf->observable);
                    k.set("observable_width", sf->width);
                });
            exit_code = do_expand(ctx, out);
        });
    }

    // --- robust ---
    {
        auto [sub, cf, sf] = make_sub(
            &app, "robust", "integration-by-parts terms of the pathwise representation");
        sub->add_option("--level", sf->level, "representation level 1..3 (default 2)");
        sub->add_option("--y-seed", sf->y_seed, "observation scenario index (default 0)");
        sub->add_option("--x0", sf->x0, "report point (default 0)");
        sub->add_option("--observable", sf->observable, "id, tanh or one (default tanh)");
        sub->add_option("--observable-width", sf->width, "tanh width (default 1)");
        sub->callback([&, cf, sf] {
            Context ctx = make_context(
                "robust", *cf,
                Json{{"level", 2}, {"y_seed", 0}, {"x0", 0.0}, {"observable", "tanh"},
                     {"observable_width", 1.0}},
                [&](Knobs& k) {
                    k.set("level", sf->level);
                    k.set("y_seed", sf->y_seed);
                    k.set("x0", sf->x0);
                    k.set("observable", sf->observable);
                    k.set("observable_width", sf->width);
                });
            exit_code = do_robust(ctx, out);
        });
    }

    // --- signature ---
    {
        auto [sub, cf, sf] = make_sub(&app, "signature",
                                      "iterated integrals of an observation path");
        sub->add_option("--depth", sf->depth, "max word length (default 3)");
        sub->add_option("--s", sf->s, "window start time (default 0)");
        sub->add_option("--t", sf->t, "window end time (default: path end)");
        sub->add_option("--path-file", sf->path_file,
                        "CSV with time and Y_* columns (e.g. simulate output); "
                        "otherwise a Brownian path is drawn from the seed");
        sub->add_option("--y-seed", sf->y_seed, "Brownian scenario index (default 0)");
        sub->callback([&, cf, sf] {
            Context ctx = make_context(
                "signature", *cf,
                Json{{"depth", 3}, {"s", 0.0}, {"t", -1.0}, {"path_file", ""}, {"y_seed", 0}},
                [&](Knobs& k) {
                    k.set("depth", sf->depth);
                    k.set("s", sf->s);
                    k.set("t", sf->t);
                    k.set("path_file", sf->path_file);
                    k.set("y_seed", sf->y_seed);
                });
            exit_code = do_signature(ctx, out);
        });
    }

    // --- gradient ---
    {
        auto [sub, cf, sf] = make_sub(
            &app, "gradient", "short-time derivative scaling exponents (heat, rho or pi)");
        sub->add_option("--target", sf->target, "heat, rho or pi (default heat)");
        sf->alpha_opt = sub->add_option("--alpha", sf->alpha,
                                        "outer derivative word, e.g. --alpha 1 or --alpha 1,1")
                            ->delimiter(',');
        sf->beta_opt = sub->add_option("--beta", sf->beta, "inner derivative word")
                           ->delimiter(',');
        sub->add_option("--t0", sf->t0, "largest time; the ladder is t0*2^-j (default 0.1)");
        sub->add_option("--n-times", sf->n_times, "ladder length (default 7)");
        sub->add_option("--levels", sf->levels, "expansion truncation level (default 3)");
        sub->add_option("--y-seed", sf->y_seed, "observation scenario index (default 0)");
        sub->add_option("--x0", sf->x0, "signal start point (default 0)");
        sub->add_option("--observable", sf->observable, "id, tanh or one (default tanh)");
        sub->add_option("--observable-width", sf->width, "tanh width (default 0.05)");
        sub->add_flag("--csv", sf->csv, "also write the (t, norm) table");
        sub->callback([&, cf, sf] {
            Context ctx = make_context(
                "gradient", *cf,
                Json{{"target", "heat"},
                     {"alpha", Json::array({1})},
                     {"beta", Json::array()},
                     {"t0", 0.1},
                     {"n_times", 7},
                     {"levels", 3},
                     {"y_seed", 0},
                     {"x0", 0.0},
                     {"observable", "tanh"},
                     {"observable_width", 0.05},
                     {"csv", false}},
                [&](Knobs& k) {
                    k.set("target", sf->target);
                    k.set_list("alpha", sf->alpha_opt, sf->alpha);
                    k.set_list("beta", sf->beta_opt, sf->beta);
                    k.set("t0", sf->t0);
                    k.set("n_times", sf->n_times);
                    k.set("levels", sf->levels);
                    k.set("y_seed", sf->y_seed);
                    k.set("x0", sf->x0);
                    k.set("observable", sf->observable);
                    k.set("observable_width", sf->width);
                    k.set_flag("csv", sf->csv);
                });
            exit_code = do_gradient(ctx, out);
        });
    }

    // --- verify ---
    CLI::App* verify = app.add_subcommand("verify", "algebraic and analytic invariant checks");
    verify->require_subcommand(1);

    {
        auto [sub, cf, sf] = make_sub(verify, "chen",
                                      "multiplicativity of iterated observation integrals");
        sub->add_option("--k", sf->k, "max word length (default 4)");
        sub->add_option("--triples", sf->triples, "random (s,u,t) windows (default 50)");
        sub->add_option("--channels", sf->channels, "observation channels (default 2)");
        sub->callback([&, cf, sf] {
            Context ctx = make_context("verify-chen", *cf,
                                       Json{{"k", 4}, {"triples", 50}, {"channels", 2}},
                                       [&](Knobs& k) {
                                           k.set("k", sf->k);
                                           k.set("triples", sf->triples);
                                           k.set("channels", sf->channels);
                                       });
            exit_code = do_verify_chen(ctx, out);
        });
    }
    {
        auto [sub, cf, sf] = make_sub(verify, "neoclassical",
                                      "fractional binomial inequality over random parameters");
        sub->add_option("--trials", sf->trials, "random (q,n,s,t) draws (default 1000)");
        sub->callback([&, cf, sf] {
            Context ctx = make_context("verify-neoclassical", *cf, Json{{"trials", 1000}},
                                       [&](Knobs& k) { k.set("trials", sf->trials); });
            exit_code = do_verify_neoclassical(ctx, out);
        });
    }
    {
        auto [sub, cf, sf] = make_sub(
            verify, "remainder", "truncation gap against the mean-square remainder bound");
        sub->add_option("--max-level", sf->max_level, "highest truncation level (default 4)");
        sub->add_option("--paths", sf->paths, "observation paths (default 30)");
        sub->add_option("--x0", sf->x0, "report point (default 0)");
        sub->add_option("--observable", sf->observable, "id, tanh or one (default tanh)");
        sub->add_option("--observable-width", sf->width, "tanh width (default 1)");
        sub->callback([&, cf, sf] {
            CommonFlags f = *cf;
            // A bounded sensor keeps the mean-square bound meaningful, and a
            // coarse path grid keeps the default run quick; explicit flags or
            // a config file always win.
            if (f.preset.empty() && f.config_file.empty()) f.preset = "ou-tanh";
            if (!f.steps && f.config_file.empty()) f.steps = 200;
            Context ctx = make_context(
                "verify-remainder", f,
                Json{{"max_level", 4}, {"paths", 30}, {"x0", 0.0}, {"observable", "tanh"},
                     {"observable_width", 1.0}},
                [&](Knobs& k) {
                    k.set("max_level", sf->max_level);
                    k.set("paths", sf->paths);
                    k.set("x0", sf->x0);
                    k.set("observable", sf->observable);
                    k.set("observable_width", sf->width);
                });
            exit_code = do_verify_remainder(ctx, out);
        });
    }
    {
        auto [sub, cf, sf] = make_sub(verify, "duality",
                                      "forward expansion against its transpose recursion");
        sub->add_option("--levels", sf->levels, "levels to pair (default 4)");
        sub->add_option("--y-seed", sf->y_seed, "observation scenario index (default 0)");
        sub->add_option("--x0", sf->x0, "signal start point (default 0)");
        sub->add_option("--observable", sf->observable, "id, tanh or one (default tanh)");
        sub->add_option("--observable-width", sf->width, "tanh width (default 1)");
        sub->callback([&, cf, sf] {
            CommonFlags f = *cf;
            if (f.preset.empty() && f.config_file.empty()) f.preset = "ou-tanh";
            if (!f.steps && f.config_file.empty()) f.steps = 256;
            Context ctx = make_context(
                "verify-duality", f,
                Json{{"levels", 4}, {"y_seed", 0}, {"x0", 0.0}, {"observable", "tanh"},
                     {"observable_width", 1.0}},
                [&](Knobs& k) {
                    k.set("levels", sf->levels);
                    k.set("y_seed", sf->y_seed);
                    k.set("x0", sf->x0);
                    k.set("observable", sf->observable);
                    k.set("observable_width", sf->width);
                });
            exit_code = do_verify_duality(ctx, out);
        });
    }
    {
        auto [sub, cf, sf] = make_sub(verify, "massbound",
                                      "pathwise exponential lower bound on the total mass");
        sub->add_option("--paths", sf->paths, "observation scenarios (default 10)");
        sub->add_option("--mc-paths", sf->mc_paths, "Monte Carlo paths per scenario "
                                                    "(default 4000)");
        sub->add_option("--x0", sf->x0, "signal start point (default 0)");
        sub->callback([&, cf, sf] {
            CommonFlags f = *cf;
            if (f.preset.empty() && f.config_file.empty()) f.preset = "cubic-sensor";
            Context ctx = make_context(
                "verify-massbound", f,
                Json{{"paths", 10}, {"mc_paths", 4000}, {"x0", 0.0}},
                [&](Knobs& k) {
                    k.set("paths", sf->paths);
                    k.set("mc_paths", sf->mc_paths);
                    k.set("x0", sf->x0);
                });
            exit_code = do_verify_massbound(ctx, out);
        });
    }
    {
        auto [sub, cf, sf] = make_sub(
            verify, "extension", "level-3 signature rebuilt from lower levels by refinement");
        sub->add_option("--channels", sf->channels, "observation channels (default 2)");
        sub->add_option("--y-seed", sf->y_seed, "Brownian scenario index (default 0)");
        sub->callback([&, cf, sf] {
            Context ctx = make_context("verify-extension", *cf,
                                       Json{{"channels", 2}, {"y_seed", 0}},
                                       [&](Knobs& k) {
                                           k.set("channels", sf->channels);
                                           k.set("y_seed", sf->y_seed);
                                       });
            exit_code = do_verify_extension(ctx, out);
        });
    }

    std::vector<const char*> argv;
    argv.push_back("rholab");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help and friends print through CLI11 and succeed.
            return app.exit(e, out, err);
        }
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalGuardError& e) {
        err << "numerical guard: " << e.what() << "\n";
        return 3;
    }
    return exit_code;
}

} // namespace rholab::cli
