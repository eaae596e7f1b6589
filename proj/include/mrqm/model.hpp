#pragma once

// Frequency-domain model of a hybrid multiresonator memory cell: one broadband
// common resonator coupled to N spin-loaded miniresonators. All frequencies are
// expressed in units of the channel spacing delta_unit; kappa may be infinite
// (broadband limit), in which case the -2i*nu/kappa term drops out.

#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrqm {

using cplx = std::complex<double>;

inline constexpr double kappa_infinite = std::numeric_limits<double>::infinity();

struct ChannelParams {
    int index = 0;            // n in {-N/2..N/2} \ {0}
    double f_sq = 0.0;        // ensemble coupling strength squared, (freq)^2
    double gamma2_inv = 1.0;  // inhomogeneous half-width 1/T2*, > 0
    double g = 0.0;           // miniresonator <-> common resonator coupling rate
    double delta_c = 0.0;     // miniresonator detuning
    double gamma_mini = 0.0;  // miniresonator decay
    double delta_spin = 0.0;  // spin-line center, derived from index and delta_unit
};

struct DeviceConfig {
    int n_channels = 0;
    double delta_unit = 1.0;
    double kappa = kappa_infinite;
    double gamma_r_tilde = 0.0;  // normalized common-resonator loss 2*gamma_r/kappa
    std::vector<ChannelParams> channels;  // ordered by index

    bool broadband() const { return std::isinf(kappa); }
};

struct singular_channel_error : std::runtime_error {
    int index;
    double nu;
    singular_channel_error(int idx, double nu_);
};

// Checks structural invariants; throws std::invalid_argument on violation.
// Returns non-fatal warnings (currently only the broadband-validity flag
// raised when N*delta/kappa > 0.1 for finite kappa).
std::vector<std::string> validate(const DeviceConfig& cfg);

// Spin-line centers delta_spin(n) = delta * (n - sgn(n)/2) for n in
// {-N/2..N/2} \ {0}.
std::map<int, double> spin_line_centers(int n_channels, double delta_unit);

// F(nu) = gamma_r_tilde - 2i*nu/kappa
//         + sum_n g_n / [ f_n^2/(1/T2* + i(delta_spin_n - nu))
//                         + gamma_n + i(delta_c_n - nu) ]
// Channels with g == 0 contribute nothing and are skipped, so an "empty"
// channel can never make the expression singular.
cplx eval_F(const DeviceConfig& cfg, double nu);

// S(nu) = (1 - F) / (1 + F). For any passive config Re F >= 0, so the pole at
// F = -1 is unreachable; it is still guarded.
cplx eval_S(const DeviceConfig& cfg, double nu);

struct Spectrum {
    std::vector<double> grid;
    std::vector<cplx> values;
    std::string config_hash;  // identifier of the generating config (see io)
};

struct EfficiencyCurve {
    std::vector<double> grid;
    std::vector<double> eta;  // 1 - |S|^2
};

Spectrum spectrum(const DeviceConfig& cfg, const std::vector<double>& grid);
EfficiencyCurve efficiency(const Spectrum& spec);

// Uniform grid over [lo, hi]; the last point is pinned to hi.
std::vector<double> uniform_grid(double lo, double hi, double step);

struct PlateauInterval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

// Widest contiguous interval containing nu = 0 where eta >= threshold, with
// the edges linearly interpolated between grid points. Returns nullopt when
// eta(0) < threshold. The grid must straddle nu = 0.
std::optional<PlateauInterval> plateau_bandwidth(const EfficiencyCurve& curve,
                                                 double threshold);

// 1 - integral |S(nu)|^2 phi_sq(nu) dnu by trapezoid on the given grid.
// phi_sq must be a normalized spectral density: trapezoid integral within
// 1e-6 of 1, otherwise invalid_argument (message carries the measured norm).
double pulse_recording_efficiency(const DeviceConfig& cfg,
                                  const std::vector<double>& grid,
                                  const std::vector<double>& phi_sq);

struct LossBudgetReport {
    double gamma_r_tilde = 0.0;
    double gamma_mini = 0.0;
    double delta_unit = 1.0;
    double signal_duration = 0.0;  // 1/(1.6*delta), the shortest usable pulse
    double transfer_bound = 1.0;   // exp(-2*gr - 2*gn*signal_duration)
    double condition_value = 0.0;  // 0.95*(gr + gn/(1.6*delta))
    double target = 1e-4;
    bool passes = false;
};

LossBudgetReport loss_budget(double gamma_r_tilde, double gamma_mini,
                             double delta_unit, double target);

// Mirror-symmetric parameter set: lists hold values for n = 1..N/2; the
// negative-index channels get f_{-n} = f_n, g_{-n} = g_n, delta_{-n} = -delta_n.
// Note f holds amplitudes (f_n, not f_n^2).
struct SymmetricHalf {
    double gamma2_inv = 1.0;
    std::vector<double> f;
    std::vector<double> g;
    std::vector<double> delta_c;
};

DeviceConfig expand_symmetric(const SymmetricHalf& half, int n_channels,
                              double delta_unit);

// Per-channel absorption coefficients f_n^2 * T2* = f_sq / gamma2_inv.
std::map<int, double> absorption_coefficients(const DeviceConfig& cfg);

// Copy with both loss knobs set (gamma_r_tilde and every channel's gamma_mini).
DeviceConfig with_losses(DeviceConfig cfg, double gamma_r_tilde,
                         double gamma_mini);

// min over [-half_width, half_width] of eta, sampled at the given step.
double min_eta_over_band(const DeviceConfig& cfg, double half_width,
                         double step = 0.005);

}  // namespace mrqm
