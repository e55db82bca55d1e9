#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rholab/sde_model.hpp"

namespace rholab {

using Json = nlohmann::json;

/// Parses a JSON file; missing files and syntax errors become ValidationError
/// with the file name in the message.
Json load_json_file(const std::string& path);

/// Walks an object against a schema of allowed keys (a nested object whose
/// leaves are `true`) and throws ValidationError naming the dotted path of the
/// first unknown key, e.g. "config: unknown key at model.foo".  A schema
/// subtree that is itself an object requires the value to be an object too.
void reject_unknown_keys(const Json& value, const Json& allowed, const std::string& prefix);

/// Allowed keys of the experiment configuration file shared by all
/// subcommands.  "experiment" holds subcommand-specific knobs and is
/// validated separately against the knob set of the subcommand being run.
const Json& config_schema();

/// Builds a model from {"preset": name} or from a 1-D polynomial description
/// {"custom": {"name", "drift": [c0,c1,...], "volatility": [...],
/// "sensors": [[...], ...], "ufg_ell"}} where each coefficient list is in
/// increasing degree order.  Analytic derivatives and the scalar fast path
/// are installed from the differentiated polynomials.
SdeModel model_from_json(const Json& spec);

/// Everything a subcommand needs besides its own knobs.
struct ExperimentConfig {
    SdeModel model;
    Json model_spec;          // the JSON the model was built from
    double half_width = 4.0;  // spatial grid [-L, L]
    int nodes = 201;          // grid nodes per axis
    double horizon = 0.5;     // path horizon T
    int steps = 500;          // path steps M
    std::uint64_t seed = 1;   // root seed; all streams derive from it
    int threads = 1;          // recorded in the manifest; execution is sequential
};

/// FNV-1a 64-bit hash of the canonical (sorted-key) JSON dump, as 16 hex
/// digits.  Used both as the run-directory suffix and as the model hash.
std::string config_hash(const Json& value);

/// %.17g — shortest decimal that round-trips a double in all cases we emit.
std::string format_double(double v);

/// RFC 4180: fields containing comma, quote, CR or LF are quoted with
/// embedded quotes doubled.
std::string csv_escape(const std::string& field);

/// Writes header + rows with CRLF line endings (binary mode, so the bytes are
/// identical across platforms and reruns).
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Reads an RFC 4180 file produced by write_csv (quoted fields, doubled
/// quotes, CRLF or LF accepted).  Returns all records including the header.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

/// Results directory precedence: --results flag, then RHOLAB_RESULTS_ROOT,
/// then ./results.
std::filesystem::path results_root(const std::string& flag_value);

/// manifest.json with the subcommand, the full resolved configuration, its
/// content hash and the artifact list.  Deliberately timestamp-free so a
/// rerun of the same configuration is byte-identical.
void write_manifest(const std::filesystem::path& dir, const std::string& subcommand,
                    const Json& resolved, const std::vector<std::string>& artifacts);

} // namespace rholab
