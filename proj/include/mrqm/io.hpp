#pragma once

// JSON config / problem / result serialization, CSV export, config hashing,
// and the run manifest. JSON schema errors carry the offending field path so
// the CLI can report it and exit with the schema error code.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mrqm/model.hpp"
#include "mrqm/optimizer.hpp"
#include "mrqm/timesim.hpp"

namespace mrqm {

using json = nlohmann::ordered_json;

struct SchemaError : std::runtime_error {
    std::string field;  // dotted path, e.g. "channels[2].f_sq"
    SchemaError(const std::string& field_path, const std::string& what);
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what);
};

// ---- device configs -------------------------------------------------------

json device_to_json(const DeviceConfig& cfg);

// Parses and validates; delta_spin is recomputed from index and delta_unit,
// never read from the document. `where` prefixes field paths in errors.
DeviceConfig device_from_json(const json& j, const std::string& where = "");

// Optional "simulation" block of a config document.
struct SimulationSection {
    PulseSpec pulse;
    int n_spins = 200;
    double t_begin = 0.0;
    double t_end = 0.0;  // 0 -> 2 * pulse center time
    double dt = 0.0;     // 0 -> suggested_dt
    int record_stride = 0;
    double window_end() const {
        return t_end > t_begin ? t_end : 2.0 * pulse.center_time;
    }
};

// Optional "verify" block: thresholds for the reference regression checks,
// kept in the fixture file so the tolerances live next to the numbers they
// guard.
struct VerifySettings {
    double plateau_threshold = 0.9999;
    double band_half_width = 0.8;
    double eta_floor_moderate = 0.999;  // gamma = 1e-2
    double eta_floor_high = 0.998;      // gamma = 1e-1
    double absorption_tol = 1e-3;
    double matching_tol = 2e-3;         // |F(0) - 1| ceiling, lossless
    double reflection_center_max = 1e-4;  // |S(0)|^2 ceiling at gamma = 1e-2
};

struct ConfigDocument {
    DeviceConfig device;
    std::optional<SimulationSection> simulation;
    std::optional<VerifySettings> verify;
};

ConfigDocument parse_config_document(const json& j);
ConfigDocument load_config(const std::string& path);
void save_config(const std::string& path, const DeviceConfig& cfg);

// ---- optimization problems and results ------------------------------------

json problem_to_json(const OptimizationProblem& problem);
OptimizationProblem problem_from_json(const json& j);
OptimizationProblem load_problem(const std::string& path);
json result_to_json(const OptResult& result);

// ---- CSV ------------------------------------------------------------------

// All CSV numbers are written with 17 significant digits.
std::string format_full(double v);

// Header: nu,re_S,im_S,abs_S2,eta
void write_spectrum_csv(const std::string& path, const Spectrum& spec);

// Header: t,re_a_in,im_a_in,re_a_out,im_a_out,E_spins,E_minis,E_common
void write_timeseries_csv(const std::string& path, const SimRecord& rec);

// Per-channel miniresonator trajectories, one chunk per channel separated by
// a `# channel <index>` line; header per chunk: t,re_b,im_b
void write_trajectories_csv(const std::string& path, const SimRecord& rec);

// ---- plumbing --------------------------------------------------------------

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& content);
json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);

// FNV-1a 64 over a canonical full-precision rendering of the device fields.
std::uint64_t config_hash(const DeviceConfig& cfg);
std::string config_hash_hex(const DeviceConfig& cfg);

const char* tool_version();

struct RunManifest {
    std::string subcommand;
    std::vector<std::string> inputs;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string version = tool_version();
    std::string timestamp;  // ISO 8601 UTC, filled by write_manifest
    std::vector<std::string> outputs;  // paths relative to out_dir
};

// Writes <out_dir>/manifest.json; call after every other output exists.
void write_manifest(const RunManifest& manifest);

}  // namespace mrqm
