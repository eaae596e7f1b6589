#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mrqm/model.hpp"
#include "mrqm/presets.hpp"

using namespace mrqm;

namespace {

// Literal transcription of the response function for the reference N=4
// point, kept independent of eval_F's code path. Values frozen below were
// cross-computed with an unrelated implementation.
cplx transcribed_F(double nu, double gamma_r_tilde, double gamma_mini,
                   double kappa) {
    const double centers[4] = {-1.5, -0.5, 0.5, 1.5};
    const double f_sq[4] = {0.499849, 1.0201, 1.0201, 0.499849};
    const double g[4] = {0.809, 0.385, 0.385, 0.809};
    const double dc[4] = {-1.8, -0.56, 0.56, 1.8};
    const double g2i = 1.8;

    cplx F(gamma_r_tilde, 0.0);
    if (std::isfinite(kappa)) F += cplx(0.0, -2.0 * nu / kappa);
    for (int i = 0; i < 4; ++i) {
        const cplx spin = f_sq[i] / cplx(g2i, centers[i] - nu);
        const cplx denom = spin + cplx(gamma_mini, dc[i] - nu);
        F += g[i] / denom;
    }
    return F;
}

DeviceConfig reference_with(double gamma_r_tilde, double gamma_mini,
                            double kappa = kappa_infinite) {
    DeviceConfig cfg = with_losses(reference_config_n4(), gamma_r_tilde,
                                   gamma_mini);
    cfg.kappa = kappa;
    return cfg;
}

DeviceConfig empty_device(double kappa, double gamma_r_tilde = 0.0) {
    DeviceConfig cfg;
    cfg.n_channels = 0;
    cfg.kappa = kappa;
    cfg.gamma_r_tilde = gamma_r_tilde;
    return cfg;
}

double band_min(const DeviceConfig& cfg) { return min_eta_over_band(cfg, 0.8); }

double band_max(const DeviceConfig& cfg) {
    const auto curve = efficiency(spectrum(cfg, uniform_grid(-0.8, 0.8, 0.005)));
    double m = 0.0;
    for (double e : curve.eta) m = std::max(m, e);
    return m;
}

}  // namespace

TEST_CASE("spin-line centers form the half-integer comb") {
    const auto c4 = spin_line_centers(4, 1.0);
    CHECK(c4.size() == 4);
    CHECK(c4.at(-2) == -1.5);
    CHECK(c4.at(-1) == -0.5);
    CHECK(c4.at(1) == 0.5);
    CHECK(c4.at(2) == 1.5);

    const auto c2 = spin_line_centers(2, 2.0);
    CHECK(c2.at(-1) == -1.0);
    CHECK(c2.at(1) == 1.0);

    CHECK(spin_line_centers(0, 1.0).empty());
    CHECK_THROWS_AS(spin_line_centers(3, 1.0), std::invalid_argument);
}

TEST_CASE("response function matches a literal transcription") {
    for (double kappa : {kappa_infinite, 100.0, 37.0}) {
        for (double gm : {0.0, 1e-2, 0.1}) {
            const DeviceConfig cfg = reference_with(gm, gm, kappa);
            for (int k = -40; k <= 40; ++k) {
                const double nu = 0.11 * k;
                const cplx got = eval_F(cfg, nu);
                const cplx want = transcribed_F(nu, gm, gm, kappa);
                CHECK(std::abs(got - want) < 1e-12);
            }
        }
    }
}

TEST_CASE("reflection follows S = (1 - F)/(1 + F)") {
    const DeviceConfig cfg = reference_with(1e-2, 1e-2, 200.0);
    for (int k = -10; k <= 10; ++k) {
        const double nu = 0.37 * k;
        const cplx F = eval_F(cfg, nu);
        CHECK(std::abs(eval_S(cfg, nu) - (1.0 - F) / (1.0 + F)) < 1e-14);
    }
}

TEST_CASE("lossless matching residual of the reference point") {
    const DeviceConfig cfg = reference_with(0.0, 0.0);
    const cplx F0 = eval_F(cfg, 0.0);
    CHECK(F0.real() == doctest::Approx(0.999020696768205).epsilon(1e-12));
    CHECK(std::abs(F0.imag()) < 1e-15);
    CHECK(std::abs(F0 - 1.0) == doctest::Approx(9.793032318e-4).epsilon(1e-9));
}

TEST_CASE("reference efficiency figures across loss levels") {
    {
        const DeviceConfig cfg = reference_with(1e-2, 1e-2);
        CHECK(std::norm(eval_S(cfg, 0.0)) ==
              doctest::Approx(2.748103697e-5).epsilon(1e-8));
        CHECK(1.0 - std::norm(eval_S(cfg, 0.0)) ==
              doctest::Approx(0.999972519).epsilon(1e-9));
        CHECK(band_min(cfg) == doctest::Approx(0.999907446).epsilon(1e-9));
        CHECK(band_max(cfg) == doctest::Approx(0.999972519).epsilon(1e-9));
    }
    {
        const DeviceConfig cfg = reference_with(0.0, 0.0);
        CHECK(band_min(cfg) == doctest::Approx(0.999936231).epsilon(1e-9));
        CHECK(band_max(cfg) == doctest::Approx(0.999999842).epsilon(1e-9));
    }
    {
        const DeviceConfig cfg = reference_with(0.1, 0.1);
        CHECK(band_min(cfg) == doctest::Approx(0.996960971).epsilon(1e-9));
        CHECK(band_max(cfg) == doctest::Approx(0.997929647).epsilon(1e-9));
    }
}

TEST_CASE("plateau interval at the working threshold") {
    const auto grid = uniform_grid(-2.0, 2.0, 0.005);
    {
        const auto curve = efficiency(spectrum(reference_with(1e-2, 1e-2), grid));
        const auto plat = plateau_bandwidth(curve, 0.9999);
        REQUIRE(plat.has_value());
        CHECK(plat->lo == doctest::Approx(-0.803970).epsilon(5e-6));
        CHECK(plat->hi == doctest::Approx(0.803970).epsilon(5e-6));
        CHECK(plat->width() == doctest::Approx(1.607941).epsilon(5e-6));
    }
    {
        const auto curve = efficiency(spectrum(reference_with(0.0, 0.0), grid));
        const auto plat = plateau_bandwidth(curve, 0.9999);
        REQUIRE(plat.has_value());
        CHECK(plat->width() == doctest::Approx(1.635086).epsilon(5e-6));
        CHECK(plat->lo == doctest::Approx(-plat->hi).epsilon(1e-12));
    }
}

TEST_CASE("plateau edge cases") {
    const auto grid = uniform_grid(-2.0, 2.0, 0.005);
    const auto curve = efficiency(spectrum(reference_with(1e-2, 1e-2), grid));

    // threshold above the center efficiency -> no plateau
    CHECK_FALSE(plateau_bandwidth(curve, 0.9999999).has_value());

    // threshold below the whole curve -> the interval fills the grid
    const auto full = plateau_bandwidth(curve, 1e-6);
    REQUIRE(full.has_value());
    CHECK(full->lo == grid.front());
    CHECK(full->hi == grid.back());

    // a grid that does not straddle zero is rejected
    const auto off_curve =
        efficiency(spectrum(reference_with(1e-2, 1e-2),
                            uniform_grid(0.5, 1.5, 0.01)));
    CHECK_THROWS_AS(plateau_bandwidth(off_curve, 0.5), std::invalid_argument);

    // an empty device reflects everything: eta == 0, no plateau
    const auto flat = efficiency(spectrum(empty_device(kappa_infinite), grid));
    CHECK_FALSE(plateau_bandwidth(flat, 0.5).has_value());
}

TEST_CASE("empty device is a bare mirror") {
    const DeviceConfig cfg = empty_device(100.0);
    const cplx F = eval_F(cfg, 1.0);
    CHECK(F.real() == 0.0);
    CHECK(F.imag() == doctest::Approx(-0.02).epsilon(1e-15));
    CHECK(std::abs(eval_S(cfg, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(eval_F(empty_device(kappa_infinite), 3.0) == cplx(0.0, 0.0));
}

TEST_CASE("passivity over random physical configs") {
    std::mt19937_64 rng(20260817);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 1100; ++trial) {
        const int half = 1 + static_cast<int>(unif(rng) * 3.0);  // N in 2..6
        DeviceConfig cfg;
        cfg.n_channels = 2 * half;
        cfg.delta_unit = 0.5 + 2.0 * unif(rng);
        cfg.kappa = trial % 3 == 0
                        ? kappa_infinite
                        : cfg.n_channels * cfg.delta_unit + 1.0 + 500.0 * unif(rng);
        cfg.gamma_r_tilde = 0.5 * unif(rng);
        const auto centers = spin_line_centers(cfg.n_channels, cfg.delta_unit);
        for (const auto& [idx, center] : centers) {
            ChannelParams ch;
            ch.index = idx;
            ch.delta_spin = center;
            ch.f_sq = 9.0 * unif(rng);
            ch.gamma2_inv = 0.1 + 4.9 * unif(rng);
            ch.g = 3.0 * unif(rng);
            ch.delta_c = 6.0 * unif(rng) - 3.0;
            ch.gamma_mini = 0.5 * unif(rng);
            cfg.channels.push_back(ch);
        }
        validate(cfg);
        for (int k = 0; k < 7; ++k) {
            const double nu = 10.0 * unif(rng) - 5.0;
            const cplx F = eval_F(cfg, nu);
            CHECK(F.real() >= -1e-13);
            CHECK(std::abs(eval_S(cfg, nu)) <= 1.0 + 1e-12);
            ++checked;
        }
    }
    CHECK(checked >= 1000);
}

TEST_CASE("mirror-symmetric configs have symmetric spectra") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int half = 1 + static_cast<int>(unif(rng) * 3.0);
        SymmetricHalf h;
        h.gamma2_inv = 0.2 + 3.0 * unif(rng);
        for (int i = 0; i < half; ++i) {
            h.f.push_back(0.1 + 2.0 * unif(rng));
            h.g.push_back(0.1 + 2.0 * unif(rng));
            h.delta_c.push_back(3.0 * unif(rng));
        }
        DeviceConfig cfg = expand_symmetric(h, 2 * half, 1.0);
        cfg.gamma_r_tilde = 0.2 * unif(rng);
        for (auto& ch : cfg.channels) ch.gamma_mini = 0.2 * unif(rng);
        // mirror the per-channel losses too
        for (int i = 0; i < half; ++i) {
            const size_t neg = half - 1 - i, pos = half + i;
            cfg.channels[neg].gamma_mini = cfg.channels[pos].gamma_mini;
        }
        for (int k = 0; k < 20; ++k) {
            const double nu = 5.0 * unif(rng);
            const cplx sp = eval_S(cfg, nu);
            const cplx sm = eval_S(cfg, -nu);
            CHECK(std::abs(sm - std::conj(sp)) < 1e-12);
            CHECK(std::abs(std::abs(sm) - std::abs(sp)) < 1e-12);
        }
    }
}

TEST_CASE("center reflection grows monotonically with resonator loss") {
    double prev = -1.0;
    for (int k = 0; k <= 10; ++k) {
        const DeviceConfig cfg = reference_with(0.01 * k, 0.0);
        const double s0 = std::abs(eval_S(cfg, 0.0));
        CHECK(s0 >= prev);
        prev = s0;
    }
}

TEST_CASE("efficiency curve is 1 - |S|^2 pointwise") {
    const auto grid = uniform_grid(-1.0, 1.0, 0.01);
    const Spectrum spec = spectrum(reference_with(1e-2, 1e-2), grid);
    const EfficiencyCurve curve = efficiency(spec);
    REQUIRE(curve.grid.size() == grid.size());
    for (size_t i = 0; i < grid.size(); ++i)
        CHECK(curve.eta[i] ==
              doctest::Approx(1.0 - std::norm(spec.values[i])).epsilon(1e-15));
}

TEST_CASE("uniform grids pin both endpoints") {
    const auto g = uniform_grid(-2.0, 2.0, 0.005);
    CHECK(g.size() == 801);
    CHECK(g.front() == -2.0);
    CHECK(g.back() == 2.0);
    CHECK(g[400] == doctest::Approx(0.0).epsilon(1e-15));

    const auto odd = uniform_grid(0.0, 1.0, 0.3);  // step does not divide span
    CHECK(odd.back() == 1.0);
    CHECK_THROWS_AS(uniform_grid(1.0, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(uniform_grid(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("a dead channel with zero width is flagged as singular") {
    DeviceConfig cfg = empty_device(kappa_infinite);
    cfg.n_channels = 2;
    ChannelParams a;
    a.index = 1;
    a.delta_spin = 0.5;
    a.f_sq = 0.0;
    a.gamma2_inv = 1.0;
    a.g = 0.3;
    a.delta_c = 1.2;
    a.gamma_mini = 0.0;
    ChannelParams b = a;
    b.index = -1;
    b.delta_spin = -0.5;
    b.delta_c = -1.2;
    cfg.channels = {b, a};

    try {
        eval_F(cfg, 1.2);  // nu == delta_c of channel +1, denominator vanishes
        FAIL("expected singular_channel_error");
    } catch (const singular_channel_error& e) {
        CHECK(e.index == 1);
        CHECK(e.nu == doctest::Approx(1.2));
    }
    // away from the singular point, evaluation is fine
    CHECK(std::isfinite(std::abs(eval_F(cfg, 0.3))));
}

TEST_CASE("scaling all frequencies leaves the spectrum invariant") {
    const DeviceConfig base = reference_with(1e-2, 1e-2, 300.0);
    for (double s : {0.5, 2.0, 7.3}) {
        DeviceConfig scaled = base;
        scaled.delta_unit *= s;
        scaled.kappa *= s;
        for (auto& ch : scaled.channels) {
            ch.f_sq *= s * s;
            ch.gamma2_inv *= s;
            ch.g *= s;
            ch.delta_c *= s;
            ch.delta_spin *= s;
            ch.gamma_mini *= s;
        }
        // gamma_r_tilde is already normalized by kappa and stays put
        for (int k = -8; k <= 8; ++k) {
            const double nu = 0.21 * k;
            CHECK(std::abs(eval_S(base, nu) - eval_S(scaled, s * nu)) < 1e-12);
        }
    }
}

TEST_CASE("recording efficiency of a matched gaussian input") {
    const DeviceConfig cfg = reference_with(1e-2, 1e-2);
    const auto grid = uniform_grid(-2.0, 2.0, 0.005);
    const double rms = 0.3;
    std::vector<double> phi_sq(grid.size());
    for (size_t i = 0; i < grid.size(); ++i)
        phi_sq[i] = std::exp(-grid[i] * grid[i] / (2.0 * rms * rms)) /
                    (rms * std::sqrt(2.0 * M_PI));
    // normalize exactly on the grid
    double norm = 0.0;
    for (size_t i = 0; i + 1 < grid.size(); ++i)
        norm += 0.5 * (phi_sq[i] + phi_sq[i + 1]) * (grid[i + 1] - grid[i]);
    for (auto& v : phi_sq) v /= norm;

    const double eff = pulse_recording_efficiency(cfg, grid, phi_sq);
    CHECK(eff == doctest::Approx(0.999951074).epsilon(1e-9));
    CHECK(eff >= 0.9999);

    // a density off by 1% is rejected, and the message reports the norm
    auto bad = phi_sq;
    for (auto& v : bad) v *= 1.01;
    try {
        pulse_recording_efficiency(cfg, grid, bad);
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("norm") != std::string::npos);
        CHECK(std::string(e.what()).find("1.01") != std::string::npos);
    }
}

TEST_CASE("loss budget arithmetic and verdicts") {
    {
        const auto rep = loss_budget(5e-5, 5e-5, 1.0, 1e-4);
        CHECK(rep.signal_duration == doctest::Approx(0.625).epsilon(1e-15));
        CHECK(rep.condition_value == doctest::Approx(7.71875e-5).epsilon(1e-12));
        CHECK(rep.transfer_bound == doctest::Approx(0.999837513).epsilon(1e-9));
        CHECK(rep.passes);
    }
    {
        const auto rep = loss_budget(1e-2, 1e-2, 1.0, 1e-4);
        CHECK(rep.condition_value == doctest::Approx(1.54375e-2).epsilon(1e-12));
        CHECK(rep.transfer_bound == doctest::Approx(0.968022450).epsilon(1e-9));
        CHECK_FALSE(rep.passes);
    }
}

TEST_CASE("symmetric expansion mirrors couplings and detunings") {
    SymmetricHalf h;
    h.gamma2_inv = 1.8;
    h.f = {1.01, 0.707};
    h.g = {0.385, 0.809};
    h.delta_c = {0.56, 1.8};
    const DeviceConfig cfg = expand_symmetric(h, 4, 1.0);

    REQUIRE(cfg.channels.size() == 4);
    CHECK(cfg.channels[0].index == -2);
    CHECK(cfg.channels[3].index == 2);
    for (const auto& ch : cfg.channels) {
        CHECK(ch.gamma2_inv == 1.8);
        const int a = std::abs(ch.index);
        CHECK(ch.f_sq == doctest::Approx(h.f[a - 1] * h.f[a - 1]).epsilon(1e-15));
        CHECK(ch.g == h.g[a - 1]);
        CHECK(ch.delta_c ==
              doctest::Approx((ch.index > 0 ? 1.0 : -1.0) * h.delta_c[a - 1]));
        CHECK(ch.delta_spin ==
              (ch.index > 0 ? 1.0 : -1.0) * (std::abs(ch.index) - 0.5));
    }

    const auto coeff = absorption_coefficients(cfg);
    CHECK(coeff.at(1) == doctest::Approx(0.5667222222).epsilon(1e-9));
    CHECK(coeff.at(2) == doctest::Approx(0.2776938889).epsilon(1e-9));
    CHECK(coeff.at(-1) == coeff.at(1));
    CHECK(coeff.at(-2) == coeff.at(2));
}

TEST_CASE("config validation rejects malformed devices") {
    DeviceConfig cfg = reference_config_n4();
    CHECK(validate(cfg).empty());  // broadband: no warnings

    DeviceConfig bad = cfg;
    bad.channels[0].index = 3;  // outside {-2..2}\{0}
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);

    bad = cfg;
    bad.channels[1].index = bad.channels[2].index;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);

    bad = cfg;
    bad.channels[0].f_sq = -1.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);

    bad = cfg;
    bad.channels[0].gamma2_inv = 0.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);

    bad = cfg;
    bad.kappa = -5.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);

    bad = cfg;
    bad.kappa = 3.0;  // N*delta/kappa = 4/3 >= 1
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);

    bad = cfg;
    bad.kappa = 20.0;  // ratio 0.2: legal but marginal
    CHECK_FALSE(validate(bad).empty());

    bad = cfg;
    bad.kappa = 100.0;  // ratio 0.04: quiet
    CHECK(validate(bad).empty());
}

TEST_CASE("band mininum helper agrees with a manual grid scan") {
    const DeviceConfig cfg = reference_with(1e-2, 1e-2);
    const auto curve = efficiency(spectrum(cfg, uniform_grid(-0.8, 0.8, 0.005)));
    double m = 1.0;
    for (double e : curve.eta) m = std::min(m, e);
    CHECK(min_eta_over_band(cfg, 0.8) == doctest::Approx(m).epsilon(1e-15));
}
