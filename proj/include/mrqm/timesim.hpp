#pragma once

// Time-domain integration of the coupled common-resonator / miniresonator /
// spin equations with discretized inhomogeneous ensembles:
//
//   ds_nj/dt = -i (delta_spin_n + delta_j) s_nj + f0_n b_n
//   db_n/dt  = -(gamma_n + i delta_c_n) b_n - f0_n sum_j s_nj - g0_n a
//   da/dt    = -(gamma_r + kappa/2) a + sum_n g0_n b_n + sqrt(kappa) a_in(t)
//   a_out(t) =  sqrt(kappa) a(t) - a_in(t)
//
// with g0_n = sqrt(g_n kappa / 2), gamma_r = gamma_r_tilde * kappa / 2 (both
// real; phases are a free gauge). Fixed-step classical RK4; the input pulse is
// evaluated analytically at stage times. The energy ledger integrals ride in
// the RK4 state, so the balance check is consistent at the integrator's own
// order.

#include <vector>

#include "mrqm/model.hpp"

namespace mrqm {

struct DiscreteEnsemble {
    int index = 0;
    double delta_spin = 0.0;     // line center (absolute)
    std::vector<double> deltas;  // detunings relative to the center
    double f0_sq = 0.0;          // per-spin coupling squared, f_sq / N_s
};

// Equal-probability quantiles of the Lorentzian line: delta_j =
// gamma2_inv * tan(pi * (u_j - 1/2)), u_j = (j - 1/2)/N_s, with uniform
// weights. Mirror-symmetric by construction for even N_s; odd N_s keeps the
// center atom at exactly 0.
DiscreteEnsemble discretize_ensemble(const ChannelParams& ch, int n_spins);

std::vector<DiscreteEnsemble> discretize_all(const DeviceConfig& cfg,
                                             int n_spins);

enum class PulseShape { gaussian, sech, square };

struct PulseSpec {
    PulseShape shape = PulseShape::gaussian;
    double center_time = 0.0;
    double duration = 1.0;  // gaussian: rms width of |a|^2; sech: scale;
                            // square: full width
    double carrier = 0.0;   // detuning nu0 of e^{-i nu0 (t - t0)}
};

// Analytic pulse bound to a uniform sample grid. The amplitude prefactor is
// fixed so the trapezoid energy on the grid is exactly 1; operator() stays
// valid between samples (RK4 needs half-step times).
struct TimeSeries {
    PulseSpec spec;
    double t_begin = 0.0;
    double dt = 0.0;
    int n_samples = 0;
    cplx amplitude = 1.0;

    double t_end() const { return t_begin + dt * (n_samples - 1); }
    cplx operator()(double t) const;
    TimeSeries scaled(cplx alpha) const;
    double grid_energy() const;  // trapezoid of |a|^2 over the grid
};

// Samples the spec on [t_begin, t_end] with the given dt and normalizes to
// unit grid energy. Throws invalid_argument when the pulse does not fit
// (boundary amplitude above 1e-6 of peak; message carries the measured
// ratio).
TimeSeries make_pulse(const PulseSpec& spec, double t_begin, double t_end,
                      double dt);

struct step_size_error : std::runtime_error {
    double suggested_dt;
    step_size_error(const std::string& what, double dt_suggest);
};

struct window_too_short_error : std::runtime_error {
    double suggested_span;
    window_too_short_error(const std::string& what, double span);
};

// 0.1 over the fastest rate in the system (kappa/2, spin detunings including
// the discretized line tails, miniresonator rates, coupling rates).
double suggested_dt(const DeviceConfig& cfg,
                    const std::vector<DiscreteEnsemble>& ensembles);

struct SimOptions {
    double dt = 0.0;          // 0 -> suggested_dt
    int record_stride = 0;    // 0 -> auto (recorded spacing <= 0.01)
    double ledger_tolerance = 1e-3;  // relative balance violation that aborts
};

struct SimRecord {
    double dt = 0.0;         // integrator step actually used
    std::vector<double> t;   // recorded sample times
    std::vector<cplx> a_in, a_out, a;
    std::vector<std::vector<cplx>> b;  // [channel][sample]
    std::vector<double> E_spins, E_minis, E_common;

    // Ledger, integrated within the RK4 state.
    double I_in = 0.0, I_out = 0.0, I_diss = 0.0;
    double E_spins_final = 0.0, E_minis_final = 0.0, E_common_final = 0.0;
    double balance_residual = 0.0;  // |I_in - (E_final + I_out + I_diss)| / I_in

    std::vector<int> channel_index;  // order of the b/channel arrays
};

// Integrates from the pulse's grid start to its end, all variables starting
// at zero. Requires finite kappa and one ensemble per channel (matching
// order). Aborts with step_size_error when the energy ledger blows past
// ledger_tolerance or the state stops being finite.
SimRecord simulate(const DeviceConfig& cfg,
                   const std::vector<DiscreteEnsemble>& ensembles,
                   const TimeSeries& pulse, const SimOptions& options = {});

// Relative L2 mismatch between the simulated output spectrum and
// S(nu) * a_in(nu) over the band where |a_in(nu)|^2 >= 1e-3 of its peak,
// normalized by the input's band norm. Both spectra come from the same
// trapezoid transform of the recorded series; S carries the same finite
// kappa as the simulation. Throws window_too_short_error unless the
// resonator modes have rung down to < 1e-4 of the input energy.
double compare_fd_td(const SimRecord& rec, const DeviceConfig& cfg);

}  // namespace mrqm
