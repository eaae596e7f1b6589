#include "mrqm/verify.hpp"

#include <cmath>
#include <sstream>

namespace mrqm {

namespace {

std::string num(double v) {
    std::ostringstream s;
    s.precision(9);
    s << v;
    return s.str();
}

CheckResult check(const std::string& name, bool passed, const std::string& detail) {
    return CheckResult{name, passed, detail};
}

}  // namespace

std::vector<CheckResult> run_reference_checks(const DeviceConfig& cfg,
                                              const VerifySettings& s) {
    std::vector<CheckResult> out;
    const DeviceConfig lossless = with_losses(cfg, 0.0, 0.0);
    const double band = s.band_half_width * cfg.delta_unit;

    {  // spin-line centers sit on the half-integer comb
        const auto centers = spin_line_centers(cfg.n_channels, cfg.delta_unit);
        double worst = 0.0;
        for (const auto& ch : cfg.channels)
            worst = std::max(worst,
                             std::abs(ch.delta_spin - centers.at(ch.index)));
        out.push_back(check("line_centers", worst <= 1e-12,
                            "max center deviation " + num(worst) +
                                " (limit 1e-12)"));
    }

    {  // absorption coefficients of the reference set
        const auto coeff = absorption_coefficients(cfg);
        const double a1 = coeff.count(1) ? coeff.at(1) : 0.0;
        const double a2 = coeff.count(2) ? coeff.at(2) : 0.0;
        const bool ok = std::abs(a1 - 0.567) <= s.absorption_tol &&
                        std::abs(a2 - 0.278) <= s.absorption_tol;
        out.push_back(check("absorption_coefficients", ok,
                            "f1^2 T2* = " + num(a1) + " (want 0.567 +- " +
                                num(s.absorption_tol) + "), f2^2 T2* = " +
                                num(a2) + " (want 0.278 +- " +
                                num(s.absorption_tol) + ")"));
    }

    {  // impedance matching residual, lossless
        const double r = std::abs(eval_F(lossless, 0.0) - 1.0);
        out.push_back(check("matching_residual", r <= s.matching_tol,
                            "|F(0) - 1| = " + num(r) + " (limit " +
                                num(s.matching_tol) + ")"));
    }

    {  // center reflection with moderate loss
        const DeviceConfig lossy = with_losses(cfg, 1e-2, 1e-2);
        const double s2 = std::norm(eval_S(lossy, 0.0));
        out.push_back(check("center_reflection", s2 <= s.reflection_center_max,
                            "|S(0)|^2 = " + num(s2) + " at gamma 1e-2 (limit " +
                                num(s.reflection_center_max) + ")"));
    }

    {  // plateau interval at the working threshold, moderate loss
        const DeviceConfig lossy = with_losses(cfg, 1e-2, 1e-2);
        const auto grid = uniform_grid(-2.0 * cfg.delta_unit,
                                       2.0 * cfg.delta_unit,
                                       0.005 * cfg.delta_unit);
        const auto plat =
            plateau_bandwidth(efficiency(spectrum(lossy, grid)),
                              s.plateau_threshold);
        const double need = band - 0.005 * cfg.delta_unit;
        if (!plat) {
            out.push_back(check("plateau_interval", false,
                                "no plateau at threshold " +
                                    num(s.plateau_threshold)));
        } else {
            const bool ok = plat->lo <= -need && plat->hi >= need;
            out.push_back(check(
                "plateau_interval", ok,
                "[" + num(plat->lo) + ", " + num(plat->hi) +
                    "] at threshold " + num(s.plateau_threshold) +
                    " (needs to cover +-" + num(need) + ")"));
        }
    }

    {  // efficiency floor across the band, moderate loss
        const DeviceConfig lossy = with_losses(cfg, 1e-2, 1e-2);
        const double m = min_eta_over_band(lossy, band);
        out.push_back(check("eta_floor_moderate", m >= s.eta_floor_moderate,
                            "min eta = " + num(m) + " at gamma 1e-2 (floor " +
                                num(s.eta_floor_moderate) + ")"));
    }

    {  // efficiency floor across the band, high loss
        const DeviceConfig lossy = with_losses(cfg, 1e-1, 1e-1);
        const double m = min_eta_over_band(lossy, band);
        out.push_back(check("eta_floor_high", m >= s.eta_floor_high,
                            "min eta = " + num(m) + " at gamma 1e-1 (floor " +
                                num(s.eta_floor_high) + ")"));
    }

    return out;
}

bool all_passed(const std::vector<CheckResult>& checks) {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

std::string format_checks(const std::vector<CheckResult>& checks) {
    std::ostringstream out;
    for (const auto& c : checks)
        out << (c.passed ? "PASS" : "FAIL") << ' ' << c.name << ": " << c.detail
            << '\n';
    return out.str();
}

}  // namespace mrqm
