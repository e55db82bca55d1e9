#include "rholab/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "rholab/errors.hpp"
#include "rholab/vector_field.hpp"

namespace rholab {

namespace {

double poly_eval(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
}

std::vector<double> poly_derivative(const std::vector<double>& c) {
    std::vector<double> d;
    for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
    if (d.empty()) d.push_back(0.0);
    return d;
}

std::vector<double> coeff_list(const Json& node, const std::string& where) {
    if (!node.is_array() || node.empty())
        throw ValidationError("config: " + where + " must be a non-empty coefficient array");
    std::vector<double> c;
    for (const auto& v : node) {
        if (!v.is_number()) throw ValidationError("config: " + where + " has a non-numeric entry");
        c.push_back(v.get<double>());
        if (!std::isfinite(c.back()))
            throw ValidationError("config: " + where + " has a non-finite entry");
    }
    return c;
}

} // namespace

Json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config: cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ValidationError("config: " + path + ": " + e.what());
    }
}

void reject_unknown_keys(const Json& value, const Json& allowed, const std::string& prefix) {
    if (!value.is_object()) {
        if (!prefix.empty() && allowed.is_object())
            throw ValidationError("config: expected an object at " + prefix);
        return;
    }
    for (const auto& item : value.items()) {
        const std::string path = prefix.empty() ? item.key() : prefix + "." + item.key();
        if (!allowed.is_object() || !allowed.contains(item.key()))
            throw ValidationError("config: unknown key at " + path);
        if (allowed.at(item.key()).is_object())
            reject_unknown_keys(item.value(), allowed.at(item.key()), path);
    }
}

const Json& config_schema() {
    static const Json schema = {
        {"model",
         {{"preset", true},
          {"custom",
           {{"name", true},
            {"drift", true},
            {"volatility", true},
            {"sensors", true},
            {"ufg_ell", true}}}}},
        {"grid", {{"half_width", true}, {"nodes", true}}},
        {"path", {{"horizon", true}, {"steps", true}}},
        {"seed", true},
        {"threads", true},
        {"experiment", true},
    };
    return schema;
}

SdeModel model_from_json(const Json& spec) {
    if (!spec.is_object()) throw ValidationError("config: model must be an object");
    const bool has_preset = spec.contains("preset");
    const bool has_custom = spec.contains("custom");
    if (has_preset == has_custom)
        throw ValidationError("config: model needs exactly one of 'preset' or 'custom'");
    if (has_preset) {
        if (!spec.at("preset").is_string())
            throw ValidationError("config: model.preset must be a string");
        return preset_by_name(spec.at("preset").get<std::string>());
    }

    const Json& c = spec.at("custom");
    if (!c.is_object()) throw ValidationError("config: model.custom must be an object");
    if (!c.contains("drift") || !c.contains("volatility") || !c.contains("sensors"))
        throw ValidationError("config: model.custom needs drift, volatility and sensors");

    const auto drift = coeff_list(c.at("drift"), "model.custom.drift");
    const auto vol = coeff_list(c.at("volatility"), "model.custom.volatility");
    if (!c.at("sensors").is_array() || c.at("sensors").empty())
        throw ValidationError("config: model.custom.sensors must be a non-empty array");
    std::vector<std::vector<double>> sensors;
    for (std::size_t i = 0; i < c.at("sensors").size(); ++i)
        sensors.push_back(coeff_list(c.at("sensors")[i],
                                     "model.custom.sensors[" + std::to_string(i) + "]"));

    SdeModel m;
    m.name = c.contains("name") ? c.at("name").get<std::string>() : std::string("custom");
    m.N = 1;
    m.d1 = 1;
    m.d2 = static_cast<int>(sensors.size());
    const auto d_drift = poly_derivative(drift);
    const auto d_vol = poly_derivative(vol);
    m.V.push_back(VectorField::scalar([drift](double x) { return poly_eval(drift, x); },
                                      [d_drift](double x) { return poly_eval(d_drift, x); }));
    m.V.push_back(VectorField::scalar([vol](double x) { return poly_eval(vol, x); },
                                      [d_vol](double x) { return poly_eval(d_vol, x); }));
    for (const auto& s : sensors) {
        const auto ds = poly_derivative(s);
        ScalarField f;
        f.value = [s](const Vec& x) { return poly_eval(s, x(0)); };
        f.gradient = [ds](const Vec& x) {
            Vec g(1);
            g(0) = poly_eval(ds, x(0));
            return g;
        };
        m.h.push_back(std::move(f));
    }
    if (c.contains("ufg_ell")) {
        if (!c.at("ufg_ell").is_number_integer() || c.at("ufg_ell").get<int>() < 1)
            throw ValidationError("config: model.custom.ufg_ell must be a positive integer");
        m.ufg_ell = c.at("ufg_ell").get<int>();
    }
    // Ito-corrected drift b = V0 + (1/2) V1' V1 for the scalar MC loop.
    m.fast.drift = [drift, vol, d_vol](double x) {
        return poly_eval(drift, x) + 0.5 * poly_eval(d_vol, x) * poly_eval(vol, x);
    };
    m.fast.vol = [vol](double x) { return poly_eval(vol, x); };
    for (const auto& s : sensors)
        m.fast.sensors.push_back([s](double x) { return poly_eval(s, x); });
    m.fast.valid = true;
    m.validate();
    return m;
}

std::string config_hash(const Json& value) {
    const std::string s = value.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += '"';
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open output file " + path.string());
    auto emit = [&out](const std::vector<std::string>& record) {
        for (std::size_t i = 0; i < record.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(record[i]);
        }
        out << "\r\n";
    };
    emit(header);
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw ValidationError("csv row width does not match the header");
        emit(row);
    }
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool any = false;
    char ch;
    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        any = true;
    };
    auto end_record = [&] {
        if (quoted) throw ValidationError("csv: unterminated quoted field in " + path.string());
        if (any || !record.empty()) {
            end_field();
            records.push_back(record);
            record.clear();
            any = false;
            field.clear();
        }
    };
    while (in.get(ch)) {
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    in.get(ch);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"' && field.empty()) {
            quoted = true;
            any = true;
        } else if (ch == ',') {
            end_field();
        } else if (ch == '\r') {
            if (in.peek() == '\n') in.get(ch);
            end_record();
        } else if (ch == '\n') {
            end_record();
        } else {
            field += ch;
        }
    }
    if (any || !field.empty() || !record.empty()) end_record();
    return records;
}

std::filesystem::path results_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("RHOLAB_RESULTS_ROOT"); env != nullptr && *env != '\0')
        return env;
    return "results";
}

void write_manifest(const std::filesystem::path& dir, const std::string& subcommand,
                    const Json& resolved, const std::vector<std::string>& artifacts) {
    Json m = {
        {"subcommand", subcommand},
        {"config", resolved},
        {"config_hash", config_hash(resolved)},
        {"artifacts", artifacts},
    };
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw ValidationError("cannot open " + (dir / "manifest.json").string());
    out << m.dump(2) << "\n";
}

} // namespace rholab
