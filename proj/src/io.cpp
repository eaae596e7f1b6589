#include "mrqm/io.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mrqm {

SchemaError::SchemaError(const std::string& field_path, const std::string& what)
    : std::runtime_error(field_path.empty() ? what : field_path + ": " + what),
      field(field_path) {}

IoError::IoError(const std::string& what) : std::runtime_error(what) {}

namespace {

std::string join(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

const json* find(const json& j, const char* key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double need_num(const json& j, const std::string& where, const char* key) {
    const json* v = find(j, key);
    if (!v) throw SchemaError(join(where, key), "missing required number");
    if (!v->is_number()) throw SchemaError(join(where, key), "expected a number");
    return v->get<double>();
}

double opt_num(const json& j, const std::string& where, const char* key,
               double fallback) {
    const json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_number()) throw SchemaError(join(where, key), "expected a number");
    return v->get<double>();
}

long long need_int(const json& j, const std::string& where, const char* key) {
    const json* v = find(j, key);
    if (!v) throw SchemaError(join(where, key), "missing required integer");
    if (!v->is_number_integer())
        throw SchemaError(join(where, key), "expected an integer");
    return v->get<long long>();
}

long long opt_int(const json& j, const std::string& where, const char* key,
                  long long fallback) {
    const json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_number_integer())
        throw SchemaError(join(where, key), "expected an integer");
    return v->get<long long>();
}

bool opt_bool(const json& j, const std::string& where, const char* key,
              bool fallback) {
    const json* v = find(j, key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw SchemaError(join(where, key), "expected a boolean");
    return v->get<bool>();
}

void need_object(const json& j, const std::string& where) {
    if (!j.is_object())
        throw SchemaError(where, "expected a JSON object");
}

}  // namespace

// ---- device configs -------------------------------------------------------

json device_to_json(const DeviceConfig& cfg) {
    json j;
    j["n_channels"] = cfg.n_channels;
    j["delta_unit"] = cfg.delta_unit;
    if (cfg.broadband())
        j["kappa"] = "inf";
    else
        j["kappa"] = cfg.kappa;
    j["gamma_r_tilde"] = cfg.gamma_r_tilde;
    j["channels"] = json::array();
    for (const auto& ch : cfg.channels) {
        json c;
        c["index"] = ch.index;
        c["f_sq"] = ch.f_sq;
        c["gamma2_inv"] = ch.gamma2_inv;
        c["g"] = ch.g;
        c["delta_c"] = ch.delta_c;
        c["gamma_mini"] = ch.gamma_mini;
        j["channels"].push_back(std::move(c));
    }
    return j;
}

DeviceConfig device_from_json(const json& j, const std::string& where) {
    need_object(j, where);
    DeviceConfig cfg;
    cfg.n_channels = static_cast<int>(need_int(j, where, "n_channels"));
    cfg.delta_unit = need_num(j, where, "delta_unit");

    const json* kap = find(j, "kappa");
    if (!kap) throw SchemaError(join(where, "kappa"), "missing (number or \"inf\")");
    if (kap->is_string()) {
        if (kap->get<std::string>() != "inf")
            throw SchemaError(join(where, "kappa"),
                              "string form must be exactly \"inf\"");
        cfg.kappa = kappa_infinite;
    } else if (kap->is_number()) {
        cfg.kappa = kap->get<double>();
    } else {
        throw SchemaError(join(where, "kappa"), "expected a number or \"inf\"");
    }

    cfg.gamma_r_tilde = opt_num(j, where, "gamma_r_tilde", 0.0);

    const json* chans = find(j, "channels");
    if (!chans || !chans->is_array())
        throw SchemaError(join(where, "channels"), "expected an array");
    if (static_cast<int>(chans->size()) != cfg.n_channels)
        throw SchemaError(join(where, "n_channels"),
                          "does not match the channels array length");

    const auto centers = [&] {
        try {
            return spin_line_centers(cfg.n_channels, cfg.delta_unit);
        } catch (const std::invalid_argument& e) {
            throw SchemaError(join(where, "n_channels"), e.what());
        }
    }();
    for (size_t i = 0; i < chans->size(); ++i) {
        const std::string cw = join(where, "channels[" + std::to_string(i) + "]");
        const json& c = (*chans)[i];
        need_object(c, cw);
        ChannelParams ch;
        ch.index = static_cast<int>(need_int(c, cw, "index"));
        ch.f_sq = need_num(c, cw, "f_sq");
        ch.gamma2_inv = need_num(c, cw, "gamma2_inv");
        ch.g = need_num(c, cw, "g");
        ch.delta_c = need_num(c, cw, "delta_c");
        ch.gamma_mini = opt_num(c, cw, "gamma_mini", 0.0);
        auto it = centers.find(ch.index);
        ch.delta_spin = it == centers.end() ? 0.0 : it->second;
        cfg.channels.push_back(ch);
    }

    try {
        validate(cfg);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(where, e.what());
    }
    return cfg;
}

namespace {

PulseSpec pulse_from_json(const json& j, const std::string& where) {
    need_object(j, where);
    PulseSpec spec;
    const json* sh = find(j, "shape");
    if (sh) {
        if (!sh->is_string())
            throw SchemaError(join(where, "shape"), "expected a string");
        const std::string s = sh->get<std::string>();
        if (s == "gaussian")
            spec.shape = PulseShape::gaussian;
        else if (s == "sech")
            spec.shape = PulseShape::sech;
        else if (s == "square")
            spec.shape = PulseShape::square;
        else
            throw SchemaError(join(where, "shape"),
                              "unknown shape \"" + s +
                                  "\" (gaussian, sech, square)");
    }
    spec.center_time = need_num(j, where, "center_time");
    spec.duration = need_num(j, where, "duration");
    spec.carrier = opt_num(j, where, "carrier", 0.0);
    return spec;
}

SimulationSection simulation_from_json(const json& j, const std::string& where) {
    need_object(j, where);
    SimulationSection sim;
    const json* p = find(j, "pulse");
    if (!p) throw SchemaError(join(where, "pulse"), "missing pulse object");
    sim.pulse = pulse_from_json(*p, join(where, "pulse"));
    sim.n_spins = static_cast<int>(opt_int(j, where, "n_spins", 200));
    sim.t_begin = opt_num(j, where, "t_begin", 0.0);
    sim.t_end = opt_num(j, where, "t_end", 0.0);
    sim.dt = opt_num(j, where, "dt", 0.0);
    sim.record_stride = static_cast<int>(opt_int(j, where, "record_stride", 0));
    return sim;
}

VerifySettings verify_from_json(const json& j, const std::string& where) {
    need_object(j, where);
    VerifySettings v;
    v.plateau_threshold = opt_num(j, where, "plateau_threshold", v.plateau_threshold);
    v.band_half_width = opt_num(j, where, "band_half_width", v.band_half_width);
    v.eta_floor_moderate = opt_num(j, where, "eta_floor_moderate", v.eta_floor_moderate);
    v.eta_floor_high = opt_num(j, where, "eta_floor_high", v.eta_floor_high);
    v.absorption_tol = opt_num(j, where, "absorption_tol", v.absorption_tol);
    v.matching_tol = opt_num(j, where, "matching_tol", v.matching_tol);
    v.reflection_center_max =
        opt_num(j, where, "reflection_center_max", v.reflection_center_max);
    return v;
}

}  // namespace

ConfigDocument parse_config_document(const json& j) {
    ConfigDocument doc;
    doc.device = device_from_json(j);
    if (const json* sim = find(j, "simulation"))
        doc.simulation = simulation_from_json(*sim, "simulation");
    if (const json* ver = find(j, "verify"))
        doc.verify = verify_from_json(*ver, "verify");
    return doc;
}

ConfigDocument load_config(const std::string& path) {
    return parse_config_document(load_json(path));
}

void save_config(const std::string& path, const DeviceConfig& cfg) {
    save_json(path, device_to_json(cfg));
}

// ---- optimization problems and results ------------------------------------

namespace {

const char* kind_name(ObjectiveKind kind) {
    return kind == ObjectiveKind::one_minus_F ? "one_minus_F" : "reflection_S";
}

json bounds_to_json(const ParamBounds& b) {
    json j;
    j["gamma2_inv"] = {b.gamma2_inv_lo, b.gamma2_inv_hi};
    j["f"] = {b.f_lo, b.f_hi};
    j["g"] = {b.g_lo, b.g_hi};
    j["delta_c"] = {b.delta_c_lo, b.delta_c_hi};
    return j;
}

void bound_pair(const json& j, const std::string& where, const char* key,
                double& lo, double& hi) {
    const json* v = find(j, key);
    if (!v) return;
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() ||
        !(*v)[1].is_number())
        throw SchemaError(join(where, key), "expected [lo, hi]");
    lo = (*v)[0].get<double>();
    hi = (*v)[1].get<double>();
    if (!(lo <= hi)) throw SchemaError(join(where, key), "needs lo <= hi");
}

}  // namespace

json problem_to_json(const OptimizationProblem& p) {
    json j;
    j["N"] = p.n_channels;
    j["delta_unit"] = p.delta_unit;
    j["fit_points"] = p.fit_points;
    j["objective_kind"] = kind_name(p.objective_kind);
    j["symmetry"] = p.symmetric;
    j["bounds"] = bounds_to_json(p.bounds);
    j["constraint_weight"] = p.constraint_weight;
    j["gamma_r_tilde"] = p.gamma_r_tilde;
    j["gamma_mini"] = p.gamma_mini;
    return j;
}

OptimizationProblem problem_from_json(const json& j) {
    need_object(j, "");
    OptimizationProblem p;
    p.n_channels = static_cast<int>(need_int(j, "", "N"));
    p.delta_unit = opt_num(j, "", "delta_unit", 1.0);

    if (const json* fp = find(j, "fit_points")) {
        if (!fp->is_array())
            throw SchemaError("fit_points", "expected an array of numbers");
        double prev = 0.0;
        for (size_t i = 0; i < fp->size(); ++i) {
            if (!(*fp)[i].is_number())
                throw SchemaError("fit_points[" + std::to_string(i) + "]",
                                  "expected a number");
            const double v = (*fp)[i].get<double>();
            if (!(v > prev))
                throw SchemaError("fit_points",
                                  "must be strictly positive and increasing");
            p.fit_points.push_back(v);
            prev = v;
        }
    }

    if (const json* k = find(j, "objective_kind")) {
        if (!k->is_string())
            throw SchemaError("objective_kind", "expected a string");
        const std::string s = k->get<std::string>();
        if (s == "one_minus_F")
            p.objective_kind = ObjectiveKind::one_minus_F;
        else if (s == "reflection_S")
            p.objective_kind = ObjectiveKind::reflection_S;
        else
            throw SchemaError("objective_kind",
                              "unknown kind \"" + s +
                                  "\" (one_minus_F, reflection_S)");
    }

    p.symmetric = opt_bool(j, "", "symmetry", opt_bool(j, "", "symmetric", true));
    if (const json* b = find(j, "bounds")) {
        need_object(*b, "bounds");
        bound_pair(*b, "bounds", "gamma2_inv", p.bounds.gamma2_inv_lo,
                   p.bounds.gamma2_inv_hi);
        bound_pair(*b, "bounds", "f", p.bounds.f_lo, p.bounds.f_hi);
        bound_pair(*b, "bounds", "g", p.bounds.g_lo, p.bounds.g_hi);
        bound_pair(*b, "bounds", "delta_c", p.bounds.delta_c_lo,
                   p.bounds.delta_c_hi);
    }
    p.constraint_weight = opt_num(j, "", "constraint_weight", p.constraint_weight);
    p.gamma_r_tilde = opt_num(j, "", "gamma_r_tilde", 0.0);
    p.gamma_mini = opt_num(j, "", "gamma_mini", 0.0);

    if (p.n_channels < 2 || p.n_channels % 2 != 0)
        throw SchemaError("N", "channel count must be even and >= 2");
    if (!(p.delta_unit > 0.0))
        throw SchemaError("delta_unit", "must be positive");
    return p;
}

OptimizationProblem load_problem(const std::string& path) {
    return problem_from_json(load_json(path));
}

json result_to_json(const OptResult& r) {
    json j;
    j["best_params"] = r.best_params;
    j["symmetry"] = r.symmetric;
    j["objective_value"] = r.objective_value;
    j["constraint_residual"] = r.constraint_residual;
    j["n_starts"] = r.n_starts;
    j["n_evals"] = r.n_evals;
    j["plateau_summary"] = {
        {"min_eta_lossless", r.plateau_summary.min_eta_lossless},
        {"min_eta_loss_1e2", r.plateau_summary.min_eta_loss_1e2},
    };
    j["config"] = device_to_json(r.config);
    j["config_hash"] = config_hash_hex(r.config);
    return j;
}

// ---- CSV ------------------------------------------------------------------

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_spectrum_csv(const std::string& path, const Spectrum& spec) {
    std::ostringstream out;
    out << "nu,re_S,im_S,abs_S2,eta\n";
    for (size_t i = 0; i < spec.grid.size(); ++i) {
        const cplx s = spec.values[i];
        const double s2 = std::norm(s);
        out << format_full(spec.grid[i]) << ',' << format_full(s.real()) << ','
            << format_full(s.imag()) << ',' << format_full(s2) << ','
            << format_full(1.0 - s2) << '\n';
    }
    write_text(path, out.str());
}

void write_timeseries_csv(const std::string& path, const SimRecord& rec) {
    std::ostringstream out;
    out << "t,re_a_in,im_a_in,re_a_out,im_a_out,E_spins,E_minis,E_common\n";
    for (size_t i = 0; i < rec.t.size(); ++i) {
        out << format_full(rec.t[i]) << ',' << format_full(rec.a_in[i].real())
            << ',' << format_full(rec.a_in[i].imag()) << ','
            << format_full(rec.a_out[i].real()) << ','
            << format_full(rec.a_out[i].imag()) << ','
            << format_full(rec.E_spins[i]) << ',' << format_full(rec.E_minis[i])
            << ',' << format_full(rec.E_common[i]) << '\n';
    }
    write_text(path, out.str());
}

void write_trajectories_csv(const std::string& path, const SimRecord& rec) {
    std::ostringstream out;
    for (size_t c = 0; c < rec.b.size(); ++c) {
        out << "# channel " << rec.channel_index[c] << "\n";
        out << "t,re_b,im_b\n";
        for (size_t i = 0; i < rec.t.size(); ++i)
            out << format_full(rec.t[i]) << ',' << format_full(rec.b[c][i].real())
                << ',' << format_full(rec.b[c][i].imag()) << '\n';
    }
    write_text(path, out.str());
}

// ---- plumbing --------------------------------------------------------------

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path);
    return content;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

json load_json(const std::string& path) {
    const std::string text = read_text(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        throw SchemaError("", "malformed JSON in " + path);
    return j;
}

void save_json(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

std::uint64_t config_hash(const DeviceConfig& cfg) {
    std::ostringstream canon;
    canon << "n=" << cfg.n_channels << "|d=" << format_full(cfg.delta_unit)
          << "|k=" << format_full(cfg.kappa)
          << "|gr=" << format_full(cfg.gamma_r_tilde);
    for (const auto& ch : cfg.channels)
        canon << "|c" << ch.index << '=' << format_full(ch.f_sq) << ','
              << format_full(ch.gamma2_inv) << ',' << format_full(ch.g) << ','
              << format_full(ch.delta_c) << ',' << format_full(ch.gamma_mini);
    const std::string s = canon.str();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_hash_hex(const DeviceConfig& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    return buf;
}

const char* tool_version() { return "0.1.0"; }

void write_manifest(const RunManifest& manifest) {
    RunManifest m = manifest;
    if (m.timestamp.empty()) {
        const std::time_t now = std::time(nullptr);
        char buf[32];
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        m.timestamp = buf;
    }
    json j;
    j["subcommand"] = m.subcommand;
    j["inputs"] = m.inputs;
    j["out_dir"] = m.out_dir;
    j["seed"] = m.seed;
    j["version"] = m.version;
    j["timestamp"] = m.timestamp;
    j["outputs"] = m.outputs;
    const auto path = std::filesystem::path(m.out_dir) / "manifest.json";
    save_json(path.string(), j);
}

}  // namespace mrqm
