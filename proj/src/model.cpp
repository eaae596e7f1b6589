#include "mrqm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace mrqm {

singular_channel_error::singular_channel_error(int idx, double nu_)
    : std::runtime_error("channel " + std::to_string(idx) +
                         " has a vanishing response denominator at nu = " +
                         std::to_string(nu_)),
      index(idx),
      nu(nu_) {}

std::vector<std::string> validate(const DeviceConfig& cfg) {
    // n_channels == 0 is the legal "empty device": a bare common resonator.
    if (cfg.n_channels < 0 || cfg.n_channels % 2 != 0)
        throw std::invalid_argument("n_channels must be even and >= 0");
    if (!(cfg.delta_unit > 0.0))
        throw std::invalid_argument("delta_unit must be positive");
    if (!(cfg.kappa > 0.0))  // also rejects NaN; +inf passes
        throw std::invalid_argument("kappa must be positive or infinite");
    if (!(cfg.gamma_r_tilde >= 0.0))
        throw std::invalid_argument("gamma_r_tilde must be >= 0");
    if (static_cast<int>(cfg.channels.size()) != cfg.n_channels)
        throw std::invalid_argument("channels list length must equal n_channels");

    const int half = cfg.n_channels / 2;
    std::set<int> seen;
    for (const auto& ch : cfg.channels) {
        if (ch.index == 0 || ch.index < -half || ch.index > half)
            throw std::invalid_argument("channel index " + std::to_string(ch.index) +
                                        " outside {-N/2..N/2} \\ {0}");
        if (!seen.insert(ch.index).second)
            throw std::invalid_argument("duplicate channel index " +
                                        std::to_string(ch.index));
        if (!(ch.f_sq >= 0.0))
            throw std::invalid_argument("f_sq must be >= 0");
        if (!(ch.gamma2_inv > 0.0))
            throw std::invalid_argument("gamma2_inv must be > 0");
        if (!(ch.g >= 0.0))
            throw std::invalid_argument("g must be >= 0");
        if (!(ch.gamma_mini >= 0.0))
            throw std::invalid_argument("gamma_mini must be >= 0");
    }

    std::vector<std::string> warnings;
    if (!cfg.broadband()) {
        const double ratio = cfg.n_channels * cfg.delta_unit / cfg.kappa;
        if (ratio >= 1.0)
            throw std::invalid_argument(
                "finite kappa must satisfy N*delta/kappa < 1 (got " +
                std::to_string(ratio) + ")");
        if (ratio > 0.1)
            warnings.push_back("broadband validity is marginal: N*delta/kappa = " +
                               std::to_string(ratio));
    }
    return warnings;
}

std::map<int, double> spin_line_centers(int n_channels, double delta_unit) {
    if (n_channels < 0 || n_channels % 2 != 0)
        throw std::invalid_argument("n_channels must be even and >= 0");
    std::map<int, double> centers;
    const int half = n_channels / 2;
    for (int n = -half; n <= half; ++n) {
        if (n == 0) continue;
        const double sgn = n > 0 ? 1.0 : -1.0;
        centers[n] = delta_unit * (n - sgn / 2.0);
    }
    return centers;
}

cplx eval_F(const DeviceConfig& cfg, double nu) {
    cplx F(cfg.gamma_r_tilde, 0.0);
    if (!cfg.broadband()) F += cplx(0.0, -2.0 * nu / cfg.kappa);
    for (const auto& ch : cfg.channels) {
        if (ch.g == 0.0) continue;
        const cplx ensemble =
            ch.f_sq / cplx(ch.gamma2_inv, ch.delta_spin - nu);
        const cplx denom = ensemble + cplx(ch.gamma_mini, ch.delta_c - nu);
        if (denom == cplx(0.0, 0.0)) throw singular_channel_error(ch.index, nu);
        F += ch.g / denom;
    }
    return F;
}

cplx eval_S(const DeviceConfig& cfg, double nu) {
    const cplx F = eval_F(cfg, nu);
    const cplx denom = 1.0 + F;
    if (denom == cplx(0.0, 0.0))
        throw std::runtime_error("transfer function pole: F(nu) = -1 at nu = " +
                                 std::to_string(nu));
    return (1.0 - F) / denom;
}

Spectrum spectrum(const DeviceConfig& cfg, const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("frequency grid is empty");
    for (size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("frequency grid must be strictly increasing");
    Spectrum spec;
    spec.grid = grid;
    spec.values.reserve(grid.size());
    for (double nu : grid) spec.values.push_back(eval_S(cfg, nu));
    return spec;
}

EfficiencyCurve efficiency(const Spectrum& spec) {
    EfficiencyCurve curve;
    curve.grid = spec.grid;
    curve.eta.reserve(spec.values.size());
    for (const cplx& s : spec.values) curve.eta.push_back(1.0 - std::norm(s));
    return curve;
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo))
        throw std::invalid_argument("grid requires hi > lo and step > 0");
    const int n = static_cast<int>(std::round((hi - lo) / step));
    std::vector<double> grid;
    grid.reserve(n + 1);
    for (int i = 0; i < n; ++i) grid.push_back(lo + i * step);
    grid.push_back(hi);
    return grid;
}

namespace {

// Linear interpolation of the threshold crossing between a point below the
// threshold (index i_out) and its in-plateau neighbour (index i_in).
double crossing(const EfficiencyCurve& c, size_t i_out, size_t i_in,
                double threshold) {
    const double e0 = c.eta[i_out], e1 = c.eta[i_in];
    if (e1 == e0) return c.grid[i_in];
    const double t = (threshold - e0) / (e1 - e0);
    return c.grid[i_out] + t * (c.grid[i_in] - c.grid[i_out]);
}

}  // namespace

std::optional<PlateauInterval> plateau_bandwidth(const EfficiencyCurve& curve,
                                                 double threshold) {
    if (!(threshold > 0.0) || !(threshold < 1.0))
        throw std::invalid_argument("threshold must lie in (0, 1)");
    if (curve.grid.size() < 2 || curve.grid.size() != curve.eta.size())
        throw std::invalid_argument("malformed efficiency curve");
    if (curve.grid.front() > 0.0 || curve.grid.back() < 0.0)
        throw std::invalid_argument("nu = 0 is outside the grid range");

    // Bracket nu = 0, interpolate eta there.
    size_t iR = 0;
    while (curve.grid[iR] < 0.0) ++iR;
    const size_t iL = (curve.grid[iR] == 0.0 || iR == 0) ? iR : iR - 1;
    double eta0 = curve.eta[iR];
    if (iL != iR) {
        const double t = (0.0 - curve.grid[iL]) / (curve.grid[iR] - curve.grid[iL]);
        eta0 = curve.eta[iL] + t * (curve.eta[iR] - curve.eta[iL]);
    }
    if (eta0 < threshold) return std::nullopt;

    PlateauInterval iv;

    if (curve.eta[iL] >= threshold) {
        size_t i = iL;
        while (i > 0 && curve.eta[i - 1] >= threshold) --i;
        iv.lo = i == 0 ? curve.grid.front() : crossing(curve, i - 1, i, threshold);
    } else {
        iv.lo = crossing(curve, iL, iR, threshold);  // crossing inside the 0 cell
    }

    if (curve.eta[iR] >= threshold) {
        size_t i = iR;
        while (i + 1 < curve.eta.size() && curve.eta[i + 1] >= threshold) ++i;
        iv.hi = i + 1 == curve.eta.size() ? curve.grid.back()
                                          : crossing(curve, i + 1, i, threshold);
    } else {
        iv.hi = crossing(curve, iR, iL, threshold);
    }
    return iv;
}

namespace {

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0.0;
    for (size_t i = 1; i < x.size(); ++i)
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return acc;
}

}  // namespace

double pulse_recording_efficiency(const DeviceConfig& cfg,
                                  const std::vector<double>& grid,
                                  const std::vector<double>& phi_sq) {
    if (grid.size() != phi_sq.size() || grid.size() < 2)
        throw std::invalid_argument("pulse spectrum and grid size mismatch");
    const double norm = trapezoid(grid, phi_sq);
    if (std::abs(norm - 1.0) > 1e-6) {
        std::ostringstream msg;
        msg << "pulse spectrum is not normalized: integral = " << norm;
        throw std::invalid_argument(msg.str());
    }
    std::vector<double> weighted(grid.size());
    for (size_t i = 0; i < grid.size(); ++i)
        weighted[i] = std::norm(eval_S(cfg, grid[i])) * phi_sq[i];
    return 1.0 - trapezoid(grid, weighted);
}

LossBudgetReport loss_budget(double gamma_r_tilde, double gamma_mini,
                             double delta_unit, double target) {
    if (!(gamma_r_tilde >= 0.0) || !(gamma_mini >= 0.0))
        throw std::invalid_argument("losses must be >= 0");
    if (!(delta_unit > 0.0))
        throw std::invalid_argument("delta_unit must be positive");
    LossBudgetReport rep;
    rep.gamma_r_tilde = gamma_r_tilde;
    rep.gamma_mini = gamma_mini;
    rep.delta_unit = delta_unit;
    rep.signal_duration = 1.0 / (1.6 * delta_unit);
    rep.transfer_bound =
        std::exp(-2.0 * gamma_r_tilde - 2.0 * gamma_mini * rep.signal_duration);
    rep.condition_value =
        0.95 * (gamma_r_tilde + gamma_mini / (1.6 * delta_unit));
    rep.target = target;
    rep.passes = rep.condition_value <= target;
    return rep;
}

DeviceConfig expand_symmetric(const SymmetricHalf& half, int n_channels,
                              double delta_unit) {
    const int h = n_channels / 2;
    if (n_channels < 2 || n_channels % 2 != 0)
        throw std::invalid_argument("n_channels must be even and >= 2");
    if (static_cast<int>(half.f.size()) != h ||
        static_cast<int>(half.g.size()) != h ||
        static_cast<int>(half.delta_c.size()) != h)
        throw std::invalid_argument("half-set lists must have length N/2");

    DeviceConfig cfg;
    cfg.n_channels = n_channels;
    cfg.delta_unit = delta_unit;
    const auto centers = spin_line_centers(n_channels, delta_unit);
    for (int n = -h; n <= h; ++n) {
        if (n == 0) continue;
        const int k = std::abs(n) - 1;
        ChannelParams ch;
        ch.index = n;
        ch.f_sq = half.f[k] * half.f[k];
        ch.gamma2_inv = half.gamma2_inv;
        ch.g = half.g[k];
        ch.delta_c = n > 0 ? half.delta_c[k] : -half.delta_c[k];
        ch.delta_spin = centers.at(n);
        cfg.channels.push_back(ch);
    }
    return cfg;
}

std::map<int, double> absorption_coefficients(const DeviceConfig& cfg) {
    std::map<int, double> coeffs;
    for (const auto& ch : cfg.channels) coeffs[ch.index] = ch.f_sq / ch.gamma2_inv;
    return coeffs;
}

DeviceConfig with_losses(DeviceConfig cfg, double gamma_r_tilde,
                         double gamma_mini) {
    cfg.gamma_r_tilde = gamma_r_tilde;
    for (auto& ch : cfg.channels) ch.gamma_mini = gamma_mini;
    return cfg;
}

double min_eta_over_band(const DeviceConfig& cfg, double half_width,
                         double step) {
    double best = 1.0;
    for (double nu : uniform_grid(-half_width, half_width, step))
        best = std::min(best, 1.0 - std::norm(eval_S(cfg, nu)));
    return best;
}

}  // namespace mrqm
