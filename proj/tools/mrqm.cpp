// mrqm: design and verification toolkit for hybrid multiresonator memory
// cells. Subcommands: tf, optimize, simulate, sweep, verify, budget.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mrqm/io.hpp"
#include "mrqm/model.hpp"
#include "mrqm/optimizer.hpp"
#include "mrqm/presets.hpp"
#include "mrqm/timesim.hpp"
#include "mrqm/verify.hpp"

namespace fs = std::filesystem;
using namespace mrqm;

namespace {

struct GlobalArgs {
    std::string config;
    std::string out = ".";
    std::string grid;
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct GridSpec {
    double lo, hi, step;
};

GridSpec parse_grid(const std::string& spec) {
    GridSpec g{};
    char extra = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf%c", &g.lo, &g.hi, &g.step,
                    &extra) != 3 ||
        !(g.step > 0.0) || !(g.hi > g.lo))
        throw SchemaError("--grid",
                          "expected lo:hi:step with step > 0 and hi > lo");
    return g;
}

std::vector<double> make_grid(const GlobalArgs& args, double delta_unit) {
    if (!args.grid.empty()) {
        const GridSpec g = parse_grid(args.grid);
        return uniform_grid(g.lo, g.hi, g.step);
    }
    return uniform_grid(-2.0 * delta_unit, 2.0 * delta_unit,
                        0.005 * delta_unit);
}

std::string require_config(const GlobalArgs& args) {
    if (args.config.empty())
        throw SchemaError("--config", "this subcommand needs an input file");
    return args.config;
}

fs::path prepare_out(const GlobalArgs& args) {
    fs::path dir(args.out);
    fs::create_directories(dir);
    return dir;
}

json plateau_report(const EfficiencyCurve& curve, double threshold) {
    const auto plat = plateau_bandwidth(curve, threshold);
    if (!plat) return nullptr;
    double lo_eta = 1.0, hi_eta = 0.0;
    for (size_t i = 0; i < curve.grid.size(); ++i) {
        if (curve.grid[i] < plat->lo || curve.grid[i] > plat->hi) continue;
        lo_eta = std::min(lo_eta, curve.eta[i]);
        hi_eta = std::max(hi_eta, curve.eta[i]);
    }
    json j;
    j["lo"] = plat->lo;
    j["hi"] = plat->hi;
    j["width"] = plat->width();
    j["min_eta"] = lo_eta;
    j["max_eta"] = hi_eta;
    return j;
}

// ---- tf ---------------------------------------------------------------

void run_tf(const GlobalArgs& args) {
    const std::string cfg_path = require_config(args);
    const ConfigDocument doc = load_config(cfg_path);
    const fs::path out = prepare_out(args);

    const auto grid = make_grid(args, doc.device.delta_unit);
    Spectrum spec = spectrum(doc.device, grid);
    spec.config_hash = config_hash_hex(doc.device);
    const EfficiencyCurve curve = efficiency(spec);

    write_spectrum_csv((out / "spectrum.csv").string(), spec);

    double eta0 = 0.0;
    for (size_t i = 0; i < grid.size(); ++i)
        if (i == 0 || std::abs(grid[i]) < std::abs(grid[i - 1])) eta0 = curve.eta[i];

    json summary;
    summary["config_hash"] = spec.config_hash;
    summary["grid"] = {{"lo", grid.front()}, {"hi", grid.back()},
                       {"points", grid.size()}};
    summary["eta_center"] = eta0;
    summary["plateaus"]["0.999"] = plateau_report(curve, 0.999);
    summary["plateaus"]["0.9999"] = plateau_report(curve, 0.9999);
    save_json((out / "summary.json").string(), summary);

    write_manifest({"tf", {cfg_path}, out.string(), args.seed, tool_version(),
                    "", {"spectrum.csv", "summary.json"}});

    std::cout << "eta(0) = " << eta0 << "\n";
    for (const char* thr : {"0.999", "0.9999"}) {
        const json& p = summary["plateaus"][thr];
        if (p.is_null())
            std::cout << "plateau @" << thr << ": none\n";
        else
            std::cout << "plateau @" << thr << ": [" << p["lo"].get<double>()
                      << ", " << p["hi"].get<double>() << "], min eta "
                      << p["min_eta"].get<double>() << "\n";
    }
}

// ---- optimize ----------------------------------------------------------

void run_optimize(const GlobalArgs& args, int n_starts, int max_evals) {
    const std::string problem_path = require_config(args);
    const OptimizationProblem problem = load_problem(problem_path);
    const fs::path out = prepare_out(args);

    OptOptions options;
    options.n_starts = n_starts;
    options.seed = args.seed;
    options.max_evals = max_evals;
    options.jobs = args.jobs;

    const OptResult result = optimize(problem, options);

    save_json((out / "result.json").string(), result_to_json(result));
    save_config((out / "optimized_config.json").string(), result.config);
    write_manifest({"optimize", {problem_path}, out.string(), args.seed,
                    tool_version(), "",
                    {"result.json", "optimized_config.json"}});

    std::cout << "objective = " << format_full(result.objective_value)
              << "\n|F(0)-1| = " << format_full(result.constraint_residual)
              << "\nplateau min eta (lossless) = "
              << format_full(result.plateau_summary.min_eta_lossless) << "\n";
    if (problem.n_channels == 4)
        std::cout << format_comparison(compare_to_reference(result, problem));
}

// ---- simulate ----------------------------------------------------------

void run_simulate(const GlobalArgs& args, int spins_override,
                  double dt_override, double t_end_override,
                  bool trajectories) {
    const std::string cfg_path = require_config(args);
    const ConfigDocument doc = load_config(cfg_path);
    if (!doc.simulation)
        throw SchemaError("simulation",
                          "config has no simulation section");
    SimulationSection sim = *doc.simulation;
    if (spins_override > 0) sim.n_spins = spins_override;
    if (dt_override > 0.0) sim.dt = dt_override;
    if (t_end_override > 0.0) sim.t_end = t_end_override;

    const fs::path out = prepare_out(args);

    const auto ensembles = discretize_all(doc.device, sim.n_spins);
    const TimeSeries pulse =
        make_pulse(sim.pulse, sim.t_begin, sim.window_end(),
                   std::min(0.01, (sim.window_end() - sim.t_begin) / 16.0));

    SimOptions options;
    options.dt = sim.dt;
    options.record_stride = sim.record_stride;
    const SimRecord rec = simulate(doc.device, ensembles, pulse, options);
    const double fd_td = compare_fd_td(rec, doc.device);

    write_timeseries_csv((out / "timeseries.csv").string(), rec);
    std::vector<std::string> outputs = {"timeseries.csv", "sim_summary.json"};
    if (trajectories) {
        write_trajectories_csv((out / "trajectories.csv").string(), rec);
        outputs.push_back("trajectories.csv");
    }

    json summary;
    summary["config_hash"] = config_hash_hex(doc.device);
    summary["n_spins"] = sim.n_spins;
    summary["dt"] = rec.dt;
    summary["t_begin"] = sim.t_begin;
    summary["t_end"] = sim.window_end();
    summary["ledger"] = {
        {"I_in", rec.I_in},
        {"I_out", rec.I_out},
        {"I_diss", rec.I_diss},
        {"E_spins_final", rec.E_spins_final},
        {"E_minis_final", rec.E_minis_final},
        {"E_common_final", rec.E_common_final},
        {"balance_residual", rec.balance_residual},
    };
    summary["fd_td_error"] = fd_td;
    save_json((out / "sim_summary.json").string(), summary);

    write_manifest({"simulate", {cfg_path}, out.string(), args.seed,
                    tool_version(), "", outputs});

    std::cout << "ledger balance residual = " << format_full(rec.balance_residual)
              << "\nabsorbed fraction = " << format_full(rec.E_spins_final / rec.I_in)
              << "\nfd-td spectral error = " << format_full(fd_td) << "\n";
}

// ---- sweep -------------------------------------------------------------

struct SweepRow {
    std::string metric;
    double result;
};

std::vector<SweepRow> sweep_metrics(const DeviceConfig& cfg, double threshold) {
    const double d = cfg.delta_unit;
    const auto grid = uniform_grid(-2.0 * d, 2.0 * d, 0.005 * d);
    const auto curve = efficiency(spectrum(cfg, grid));
    const auto plat = plateau_bandwidth(curve, threshold);
    return {{"plateau_min_eta", min_eta_over_band(cfg, 0.8 * d)},
            {"plateau_width", plat ? plat->width() : 0.0}};
}

void run_sweep(const GlobalArgs& args, const std::string& param,
               const std::string& values_spec, double threshold) {
    const std::string cfg_path = require_config(args);
    const ConfigDocument doc = load_config(cfg_path);
    const fs::path out = prepare_out(args);

    if (param != "gamma" && param != "gamma_r_tilde" && param != "gamma_mini" &&
        param != "kappa" && param != "threshold")
        throw SchemaError("--param", "unknown sweep parameter \"" + param +
                                         "\" (gamma, gamma_r_tilde, gamma_mini, "
                                         "kappa, threshold)");

    std::vector<double> values;
    std::stringstream ss(values_spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "inf")
            values.push_back(kappa_infinite);
        else {
            try {
                size_t pos = 0;
                const double v = std::stod(tok, &pos);
                if (pos != tok.size()) throw std::invalid_argument(tok);
                values.push_back(v);
            } catch (const std::exception&) {
                throw SchemaError("--values", "not a number: \"" + tok + "\"");
            }
        }
    }
    if (values.empty())
        throw SchemaError("--values", "needs a comma-separated list");

    std::vector<std::vector<SweepRow>> rows(values.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < values.size();
             i = next.fetch_add(1)) {
            DeviceConfig cfg = doc.device;
            double thr = threshold;
            const double v = values[i];
            if (param == "gamma")
                cfg = with_losses(cfg, v, v);
            else if (param == "gamma_r_tilde")
                cfg.gamma_r_tilde = v;
            else if (param == "gamma_mini")
                for (auto& ch : cfg.channels) ch.gamma_mini = v;
            else if (param == "kappa")
                cfg.kappa = v;
            else
                thr = v;
            validate(cfg);
            rows[i] = sweep_metrics(cfg, thr);
        }
    };
    const int jobs = std::max(1, std::min<int>(args.jobs, values.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::ostringstream csv;
    csv << "param,value,metric,result\n";
    for (size_t i = 0; i < values.size(); ++i)
        for (const auto& row : rows[i])
            csv << param << ',' << format_full(values[i]) << ',' << row.metric
                << ',' << format_full(row.result) << '\n';
    write_text((out / "sweep.csv").string(), csv.str());

    write_manifest({"sweep", {cfg_path}, out.string(), args.seed,
                    tool_version(), "", {"sweep.csv"}});
    std::cout << csv.str();
}

// ---- verify ------------------------------------------------------------

int run_verify(const GlobalArgs& args, double threshold_override) {
    DeviceConfig device;
    VerifySettings settings;
    std::vector<std::string> inputs;
    if (!args.config.empty()) {
        const ConfigDocument doc = load_config(args.config);
        device = doc.device;
        if (doc.verify) settings = *doc.verify;
        inputs.push_back(args.config);
    } else {
        device = reference_config_n4();
    }
    if (threshold_override > 0.0) {
        settings.plateau_threshold = threshold_override;
        settings.eta_floor_moderate = threshold_override;
        settings.eta_floor_high = threshold_override;
    }

    const auto checks = run_reference_checks(device, settings);
    std::cout << format_checks(checks);
    const bool ok = all_passed(checks);
    std::cout << (ok ? "all checks passed" : "some checks FAILED") << "\n";

    const fs::path out = prepare_out(args);
    json report = json::array();
    for (const auto& c : checks)
        report.push_back(
            {{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    save_json((out / "verify_report.json").string(), report);
    write_manifest({"verify", inputs, out.string(), args.seed, tool_version(),
                    "", {"verify_report.json"}});
    return ok ? 0 : 1;
}

// ---- budget ------------------------------------------------------------

void run_budget(const GlobalArgs& args, double gamma_r, double gamma_mini,
                double delta, double target) {
    const fs::path out = prepare_out(args);
    const LossBudgetReport rep = loss_budget(gamma_r, gamma_mini, delta, target);

    json j;
    j["gamma_r_tilde"] = rep.gamma_r_tilde;
    j["gamma_mini"] = rep.gamma_mini;
    j["delta_unit"] = rep.delta_unit;
    j["signal_duration"] = rep.signal_duration;
    j["transfer_bound"] = rep.transfer_bound;
    j["condition_value"] = rep.condition_value;
    j["target"] = rep.target;
    j["passes"] = rep.passes;
    save_json((out / "budget.json").string(), j);
    write_manifest({"budget", {}, out.string(), args.seed, tool_version(), "",
                    {"budget.json"}});

    std::cout << "condition value = " << format_full(rep.condition_value)
              << " vs target " << format_full(rep.target) << " -> "
              << (rep.passes ? "PASS" : "FAIL") << "\n"
              << "transfer bound over one signal duration = "
              << format_full(rep.transfer_bound) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid multiresonator memory design toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalArgs args;
    app.add_option("--config", args.config, "input JSON (config or problem)");
    app.add_option("--out", args.out, "output directory")
        ->envname("MRQM_OUT");
    app.add_option("--seed", args.seed, "random seed (default 0)");
    app.add_option("--jobs", args.jobs, "worker threads")
        ->check(CLI::PositiveNumber);
    app.add_option("--grid", args.grid, "frequency grid lo:hi:step");

    auto* tf = app.add_subcommand("tf", "evaluate the reflection spectrum");

    int opt_starts = 50, opt_max_evals = 200000;
    auto* optimize_cmd =
        app.add_subcommand("optimize", "fit device parameters to F(nu) = 1");
    optimize_cmd->add_option("--starts", opt_starts, "multistart count");
    optimize_cmd->add_option("--max-evals", opt_max_evals,
                             "evaluation budget per start");

    int sim_spins = 0;
    double sim_dt = 0.0, sim_t_end = 0.0;
    bool sim_traj = false;
    auto* simulate_cmd =
        app.add_subcommand("simulate", "integrate the coupled-mode equations");
    simulate_cmd->add_option("--spins", sim_spins, "spins per channel override");
    simulate_cmd->add_option("--dt", sim_dt, "integrator step override");
    simulate_cmd->add_option("--t-end", sim_t_end, "window end override");
    simulate_cmd->add_flag("--trajectories", sim_traj,
                           "also write per-channel miniresonator trajectories");

    std::string sweep_param, sweep_values;
    double sweep_threshold = 0.9999;
    auto* sweep_cmd =
        app.add_subcommand("sweep", "scan a scalar parameter");
    sweep_cmd->add_option("--param", sweep_param,
                          "gamma | gamma_r_tilde | gamma_mini | kappa | threshold")
        ->required();
    sweep_cmd->add_option("--values", sweep_values,
                          "comma-separated values (kappa accepts inf)")
        ->required();
    sweep_cmd->add_option("--threshold", sweep_threshold,
                          "plateau threshold for width metric");

    double verify_threshold = 0.0;
    auto* verify_cmd =
        app.add_subcommand("verify", "run the reference regression checks");
    verify_cmd->add_option("--threshold", verify_threshold,
                           "override every efficiency threshold");

    double bud_gr = 0.0, bud_gm = 0.0, bud_delta = 1.0, bud_target = 1e-4;
    auto* budget_cmd =
        app.add_subcommand("budget", "loss budget for a target infidelity");
    budget_cmd->add_option("--gamma-r", bud_gr, "common resonator loss")
        ->required();
    budget_cmd->add_option("--gamma-mini", bud_gm, "miniresonator loss")
        ->required();
    budget_cmd->add_option("--delta", bud_delta, "channel spacing");
    budget_cmd->add_option("--target", bud_target, "infidelity target");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (tf->parsed()) {
            run_tf(args);
        } else if (optimize_cmd->parsed()) {
            run_optimize(args, opt_starts, opt_max_evals);
        } else if (simulate_cmd->parsed()) {
            run_simulate(args, sim_spins, sim_dt, sim_t_end, sim_traj);
        } else if (sweep_cmd->parsed()) {
            run_sweep(args, sweep_param, sweep_values, sweep_threshold);
        } else if (verify_cmd->parsed()) {
            return run_verify(args, verify_threshold);
        } else if (budget_cmd->parsed()) {
            run_budget(args, bud_gr, bud_gm, bud_delta, bud_target);
        }
        return 0;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const optimization_failed_error& e) {
        std::cerr << "optimization failed: " << e.what() << "\n";
        return 4;
    } catch (const step_size_error& e) {
        std::cerr << "instability: " << e.what() << "\n";
        return 5;
    } catch (const window_too_short_error& e) {
        std::cerr << "window too short: " << e.what() << "\n";
        return 5;
    } catch (const singular_channel_error& e) {
        std::cerr << "singular channel: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
