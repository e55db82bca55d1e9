#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rholab/cli.hpp"
#include "rholab/config.hpp"
#include "rholab/errors.hpp"
#include "rholab/expansion.hpp"
#include "rholab/iterated_integrals.hpp"
#include "rholab/path_grid.hpp"
#include "rholab/robust.hpp"
#include "rholab/semigroup.hpp"

using namespace rholab;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
    std::ostringstream out, err;
    const int rc = cli::run(args, out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return rc;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = name;
    fs::remove_all(p);
    return p;
}

fs::path only_run_dir(const fs::path& root) {
    fs::path found;
    int count = 0;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) {
            found = entry.path();
            ++count;
        }
    REQUIRE(count == 1);
    return found;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

double cell(const std::vector<std::vector<std::string>>& rows, std::size_t r, std::size_t c) {
    return std::stod(rows.at(r).at(c));
}

} // namespace

TEST_SUITE("config_cli") {

TEST_CASE("unknown keys are rejected with their dotted path") {
    const Json ok = {{"model", {{"preset", "ou-tanh"}}},
                     {"grid", {{"half_width", 2.0}, {"nodes", 101}}},
                     {"seed", 3}};
    CHECK_NOTHROW(reject_unknown_keys(ok, config_schema(), ""));

    const Json top = {{"modle", {{"preset", "ou-tanh"}}}};
    CHECK_THROWS_WITH_AS(reject_unknown_keys(top, config_schema(), ""),
                         "config: unknown key at modle", ValidationError);

    const Json nested = {{"model", {{"preset", "x"}, {"foo", 1}}}};
    CHECK_THROWS_WITH_AS(reject_unknown_keys(nested, config_schema(), ""),
                         "config: unknown key at model.foo", ValidationError);

    const Json deep = {{"model", {{"custom", {{"drift", Json::array()}, {"vol", 1}}}}}};
    CHECK_THROWS_WITH_AS(reject_unknown_keys(deep, config_schema(), ""),
                         "config: unknown key at model.custom.vol", ValidationError);

    // a schema subtree that is an object requires an object value
    const Json scalar_grid = {{"grid", 4.0}};
    CHECK_THROWS_AS(reject_unknown_keys(scalar_grid, config_schema(), ""), ValidationError);
}

TEST_CASE("model construction from JSON") {
    SUBCASE("preset") {
        const SdeModel m = model_from_json({{"preset", "cubic-sensor"}});
        CHECK(m.name == "cubic-sensor");
        CHECK(m.d2 == 1);
    }
    SUBCASE("custom polynomial model evaluates and differentiates exactly") {
        // drift -x + x^3/10, volatility 1 + x^2/4, sensor 2x - x^2
        const Json spec = {{"custom",
                            {{"name", "poly-demo"},
                             {"drift", {0.0, -1.0, 0.0, 0.1}},
                             {"volatility", {1.0, 0.0, 0.25}},
                             {"sensors", {{0.0, 2.0, -1.0}}}}}};
        const SdeModel m = model_from_json(spec);
        CHECK(m.name == "poly-demo");
        CHECK(m.N == 1);
        CHECK(m.d1 == 1);
        CHECK(m.d2 == 1);
        CHECK(m.fast.valid);
        const double x = 0.7;
        Vec xv(1);
        xv(0) = x;
        const double drift = -x + 0.1 * x * x * x;
        const double d_drift = -1.0 + 0.3 * x * x;
        const double vol = 1.0 + 0.25 * x * x;
        const double d_vol = 0.5 * x;
        CHECK(m.V[0](xv)(0) == doctest::Approx(drift).epsilon(1e-15));
        CHECK(m.V[0].jacobian(xv)(0, 0) == doctest::Approx(d_drift).epsilon(1e-15));
        CHECK(m.V[1](xv)(0) == doctest::Approx(vol).epsilon(1e-15));
        CHECK(m.V[1].jacobian(xv)(0, 0) == doctest::Approx(d_vol).epsilon(1e-15));
        CHECK(m.h[0](xv) == doctest::Approx(2.0 * x - x * x).epsilon(1e-15));
        CHECK(m.h[0].grad(xv)(0) == doctest::Approx(2.0 - 2.0 * x).epsilon(1e-12));
        // fast path carries the Ito-corrected drift b = V0 + V1' V1 / 2
        CHECK(m.fast.drift(x) == doctest::Approx(drift + 0.5 * d_vol * vol).epsilon(1e-15));
        CHECK(m.fast.vol(x) == doctest::Approx(vol).epsilon(1e-15));
        CHECK(m.fast.sensors[0](x) == doctest::Approx(2.0 * x - x * x).epsilon(1e-15));
    }
    SUBCASE("bad specs") {
        CHECK_THROWS_AS(model_from_json(Json::object()), ValidationError);
        CHECK_THROWS_AS(model_from_json({{"preset", "x"}, {"custom", Json::object()}}),
                        ValidationError);
        CHECK_THROWS_AS(model_from_json({{"preset", "not-a-model"}}), ValidationError);
        CHECK_THROWS_AS(model_from_json({{"custom", {{"drift", {1.0}}}}}), ValidationError);
        CHECK_THROWS_AS(model_from_json({{"custom",
                                          {{"drift", Json::array()},
                                           {"volatility", {1.0}},
                                           {"sensors", {{1.0}}}}}}),
                        ValidationError);
        CHECK_THROWS_AS(model_from_json({{"custom",
                                          {{"drift", {0.0, "x"}},
                                           {"volatility", {1.0}},
                                           {"sensors", {{1.0}}}}}}),
                        ValidationError);
        CHECK_THROWS_AS(model_from_json({{"custom",
                                          {{"drift", {0.0}},
                                           {"volatility", {1.0}},
                                           {"sensors", Json::array()}}}}),
                        ValidationError);
        CHECK_THROWS_AS(model_from_json({{"custom",
                                          {{"drift", {0.0}},
                                           {"volatility", {1.0}},
                                           {"sensors", {{1.0}}},
                                           {"ufg_ell", 0}}}}),
                        ValidationError);
    }
}

TEST_CASE("config hash is deterministic and value-sensitive") {
    const Json a = {{"seed", 1}, {"grid", {{"nodes", 201}}}};
    const Json b = {{"grid", {{"nodes", 201}}}, {"seed", 1}}; // same content
    const Json c = {{"seed", 2}, {"grid", {{"nodes", 201}}}};
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a) != config_hash(c));
    CHECK(config_hash(a).find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("csv writer and reader round-trip RFC 4180 content") {
    const fs::path dir = fresh_dir("cfgcli_csv");
    fs::create_directories(dir);

    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_escape("two\nlines") == "\"two\nlines\"");

    const std::vector<std::string> header = {"word", "note", "value"};
    const std::vector<std::vector<std::string>> rows = {
        {"(1,2)", "has,comma", format_double(0.1)},
        {"(1)", "quote \" inside", format_double(-1.0 / 3.0)},
        {"(2)", "multi\nline", format_double(1e-17)},
    };
    write_csv(dir / "t.csv", header, rows);

    // CRLF record separators outside quoted fields
    const std::string bytes = slurp(dir / "t.csv");
    CHECK(bytes.find("word,note,value\r\n") == 0);
    CHECK(bytes.find("\"(1,2)\"") != std::string::npos);

    const auto back = read_csv(dir / "t.csv");
    REQUIRE(back.size() == 4);
    CHECK(back[0] == header);
    for (std::size_t r = 0; r < rows.size(); ++r) CHECK(back[r + 1] == rows[r]);
    // %.17g strings recover the doubles exactly
    CHECK(std::stod(back[1][2]) == 0.1);
    CHECK(std::stod(back[2][2]) == -1.0 / 3.0);
    CHECK(std::stod(back[3][2]) == 1e-17);

    // LF-only input is accepted too
    write_text(dir / "lf.csv", "a,b\n1,\"x\ny\"\n");
    const auto lf = read_csv(dir / "lf.csv");
    REQUIRE(lf.size() == 2);
    CHECK(lf[1][1] == "x\ny");

    CHECK_THROWS_AS(write_csv(dir / "bad.csv", {"a", "b"}, {{"1"}}), ValidationError);
    CHECK_THROWS_AS(read_csv(dir / "missing.csv"), ValidationError);
}

TEST_CASE("results root precedence: flag, then environment, then default") {
    unsetenv("RHOLAB_RESULTS_ROOT");
    CHECK(results_root("explicit") == fs::path("explicit"));
    CHECK(results_root("") == fs::path("results"));
    setenv("RHOLAB_RESULTS_ROOT", "from_env", 1);
    CHECK(results_root("") == fs::path("from_env"));
    CHECK(results_root("explicit") == fs::path("explicit"));
    unsetenv("RHOLAB_RESULTS_ROOT");
}

TEST_CASE("exit codes: success, validation, numerical guard") {
    const fs::path root = fresh_dir("cfgcli_exit");

    std::string out, err;
    SUBCASE("passing verification exits 0") {
        const int rc = run_cli({"verify", "chen", "--k", "3", "--steps", "128", "--triples",
                                "10", "--seed", "7", "--results", root.string()},
                               &out, &err);
        CHECK(rc == 0);
        CHECK(out.find("[PASS] chen: max violation") != std::string::npos);
    }
    SUBCASE("config schema violations exit 2 and name the key path") {
        write_text("cfgcli_bad.json", R"({"model": {"preset": "ou-tanh", "foo": 1}})");
        const int rc = run_cli({"simulate", "--config", "cfgcli_bad.json", "--results",
                                root.string()},
                               &out, &err);
        CHECK(rc == 2);
        CHECK(err.find("model.foo") != std::string::npos);
    }
    SUBCASE("malformed JSON exits 2") {
        write_text("cfgcli_syntax.json", "{ not json");
        const int rc = run_cli({"simulate", "--config", "cfgcli_syntax.json", "--results",
                                root.string()},
                               &out, &err);
        CHECK(rc == 2);
        CHECK(err.find("cfgcli_syntax.json") != std::string::npos);
    }
    SUBCASE("numerical guards exit 3") {
        // bm-1d has a zero sensor, so a rho-target fit is vacuous by design
        const int rc = run_cli({"gradient", "--target", "rho", "--alpha", "0", "--preset",
                                "bm-1d", "--nodes", "101", "--steps", "64", "--n-times", "5",
                                "--t0", "0.05", "--results", root.string()},
                               &out, &err);
        CHECK(rc == 3);
        CHECK(err.find("numerical guard") != std::string::npos);
    }
    SUBCASE("missing subcommand and unknown flags exit 2") {
        CHECK(run_cli({}, &out, &err) == 2);
        CHECK(run_cli({"filter", "--definitely-not-a-flag"}, &out, &err) == 2);
        CHECK(run_cli({"gradient", "--target", "nope", "--results", root.string()}, &out,
                      &err) == 2);
    }
    SUBCASE("help exits 0") {
        CHECK(run_cli({"--help"}, &out, &err) == 0);
        CHECK(out.find("simulate") != std::string::npos);
    }
}

TEST_CASE("flags override config experiment values in the manifest") {
    const fs::path root = fresh_dir("cfgcli_precedence");
    write_text("cfgcli_prec.json",
               R"({"model": {"preset": "ou-tanh"}, "path": {"steps": 100},)"
               R"( "experiment": {"levels": 2, "x0": 0.25}})");
    std::string out, err;
    const int rc = run_cli({"expand", "--config", "cfgcli_prec.json", "--levels", "1",
                            "--nodes", "51", "--results", root.string()},
                           &out, &err);
    REQUIRE_MESSAGE(rc == 0, err);
    const Json manifest = Json::parse(slurp(only_run_dir(root) / "manifest.json"));
    CHECK(manifest.at("subcommand") == "expand");
    CHECK(manifest.at("config").at("experiment").at("levels") == 1);  // flag wins
    CHECK(manifest.at("config").at("experiment").at("x0") == 0.25);   // config survives
    CHECK(manifest.at("config").at("path").at("steps") == 100);
    CHECK(manifest.at("config_hash").get<std::string>().size() == 16);
    const auto arts = manifest.at("artifacts").get<std::vector<std::string>>();
    REQUIRE(arts.size() == 1);
    CHECK(arts[0] == "expansion.csv");
}

TEST_CASE("simulate output feeds signature and reruns are byte-identical") {
    const fs::path r1 = fresh_dir("cfgcli_sim1");
    const fs::path r2 = fresh_dir("cfgcli_sim2");
    std::string out, err;
    const std::vector<std::string> sim = {"simulate", "--paths",  "1",  "--steps", "64",
                                          "--horizon", "0.25",    "--seed", "11"};
    auto with_results = [](std::vector<std::string> v, const fs::path& root) {
        v.push_back("--results");
        v.push_back(root.string());
        return v;
    };
    REQUIRE(run_cli(with_results(sim, r1), &out, &err) == 0);
    REQUIRE(run_cli(with_results(sim, r2), &out, &err) == 0);

    const fs::path d1 = only_run_dir(r1);
    const fs::path d2 = only_run_dir(r2);
    CHECK(slurp(d1 / "path-000.csv") == slurp(d2 / "path-000.csv"));
    CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));

    // the CSV reproduces the library's own scenario sampling exactly
    const auto rows = read_csv(d1 / "path-000.csv");
    REQUIRE(rows.size() == 66); // header + 65 grid times
    CHECK(rows[0] == std::vector<std::string>{"time", "X_1", "Y_1"});
    const SdeModel model = preset_by_name("linear-gaussian");
    const PathGrid ref = sample_observation_path(model, Vec::Zero(1), 0.25, 64, 11, 0);
    for (int k = 0; k <= 64; ++k) {
        CHECK(cell(rows, k + 1, 0) == doctest::Approx(ref.time(k)).epsilon(1e-15));
        CHECK(cell(rows, k + 1, 2) == ref.Y(k, 0)); // %.17g round-trips exactly
    }

    // signature over the written file matches direct iterated integrals
    const fs::path r3 = fresh_dir("cfgcli_sig");
    REQUIRE(run_cli({"signature", "--path-file", (d1 / "path-000.csv").string(), "--depth",
                     "3", "--results", r3.string()},
                    &out, &err) == 0);
    const auto sig = read_csv(only_run_dir(r3) / "signature.csv");
    REQUIRE(sig.size() == 4); // header + words (1), (1,1), (1,1,1)
    CHECK(sig[1][0] == "(1)");
    CHECK(sig[2][0] == "(1,1)");
    CHECK(sig[3][0] == "(1,1,1)");
    for (int m = 1; m <= 3; ++m)
        CHECK(cell(sig, m, 3) ==
              doctest::Approx(iterated_ito_at(ref, MultiIndex(m, 1), 0.0, 0.25))
                  .epsilon(1e-12));
}

TEST_CASE("filter with the exact linear-Gaussian reference") {
    const fs::path root = fresh_dir("cfgcli_filter");
    std::string out, err;
    const int rc = run_cli({"filter", "--preset", "linear-gaussian", "--oracle", "kalman",
                            "--n-paths", "4000", "--particles", "400", "--replicates", "3",
                            "--steps", "200", "--seed", "5", "--results", root.string()},
                           &out, &err);
    REQUIRE_MESSAGE(rc == 0, err);
    const Json result = Json::parse(slurp(only_run_dir(root) / "filter.json"));
    for (const char* key : {"rho_phi", "rho_one", "pi_phi", "stderr", "seed", "model_hash",
                            "oracle_mean", "z_score", "z_score_particle", "particle_pi"})
        CHECK_MESSAGE(result.contains(key), key);
    CHECK(result.at("seed") == 5);
    CHECK(result.at("rho_one").get<double>() > 0.0);
    CHECK(result.at("stderr").get<double>() > 0.0);
    // both estimators agree with the closed-form filter at MC accuracy
    CHECK(std::abs(result.at("z_score").get<double>()) < 5.0);
    CHECK(std::abs(result.at("z_score_particle").get<double>()) < 5.0);
    // pi = rho_phi / rho_one up to the shared-path ratio estimate
    CHECK(result.at("pi_phi").get<double>() ==
          doctest::Approx(result.at("rho_phi").get<double>() /
                          result.at("rho_one").get<double>())
              .epsilon(1e-12));
    // the oracle refuses models whose sensor is not the identity
    CHECK(run_cli({"filter", "--preset", "ou-tanh", "--oracle", "kalman", "--results",
                   root.string()},
                  &out, &err) == 2);
}

TEST_CASE("expansion and robust CSV contributions sum to the library values") {
    const fs::path root = fresh_dir("cfgcli_expand");
    std::string out, err;

    REQUIRE(run_cli({"expand", "--preset", "ou-tanh", "--levels", "3", "--steps", "100",
                     "--nodes", "101", "--half-width", "3", "--x0", "0.5", "--seed", "13",
                     "--results", root.string()},
                    &out, &err) == 0);
    const auto rows = read_csv(only_run_dir(root) / "expansion.csv");
    REQUIRE(rows.size() == 5); // header + level 0 + three single-channel words
    double total = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r) total += cell(rows, r, 2);

    const SdeModel model = preset_by_name("ou-tanh");
    const SpatialGrid sgrid(1, 101, 3.0);
    const GridSemigroup sg(model, sgrid);
    const auto sensors = discretize_sensors(model, sgrid);
    const Vec phi = sgrid.discretize([](const Vec& x) { return std::tanh(x(0)); });
    const PathGrid path = sample_observation_path(model, Vec::Constant(1, 0.5), 0.5, 100, 13, 0);
    const ExpansionResult res = truncated_expansion(sg, sensors, path, phi, 3, 0, 100);
    const long node = std::lround((0.5 + 3.0) / sgrid.h());
    CHECK(total == doctest::Approx(res.truncation()(node)).epsilon(1e-10));

    const fs::path root2 = fresh_dir("cfgcli_robust");
    REQUIRE(run_cli({"robust", "--preset", "ou-tanh", "--level", "2", "--steps", "100",
                     "--nodes", "101", "--half-width", "3", "--x0", "0.5", "--seed", "13",
                     "--results", root2.string()},
                    &out, &err) == 0);
    const auto rrows = read_csv(only_run_dir(root2) / "robust.csv");
    REQUIRE(rrows.size() == 6); // header + the five level-2 terms
    double rtotal = 0.0;
    for (std::size_t r = 1; r < rrows.size(); ++r) rtotal += cell(rrows, r, 3);
    const Vec direct = ibp_level_value(sg, sensors[0], path, phi, 2, 0, 100);
    CHECK(rtotal == doctest::Approx(direct(node)).epsilon(1e-10));
    // labels came through quoting intact
    CHECK(rrows[1][2] == "+ q2(s,t) P (h^2 phi)");
}

TEST_CASE("particle degeneracy guard reaches the exit code through a custom model") {
    const fs::path root = fresh_dir("cfgcli_fail");
    std::string out, err;
    // Two particles with distinct weights have an effective sample size below
    // two, so the resampling guard trips on the first step.
    write_text("cfgcli_wild.json",
               R"({"model": {"custom": {"name": "stiff", "drift": [0.0, -40.0],)"
               R"( "volatility": [0.05], "sensors": [[0.0, 30.0]]}},)"
               R"( "path": {"horizon": 0.5, "steps": 50}})");
    const int rc = run_cli({"filter", "--config", "cfgcli_wild.json", "--particles", "2",
                            "--n-paths", "50", "--results", root.string()},
                           &out, &err);
    CHECK(rc == 3);
    CHECK(err.find("numerical guard") != std::string::npos);
}

} // TEST_SUITE
