#include "mrqm/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "mrqm/presets.hpp"

namespace mrqm {

optimization_failed_error::optimization_failed_error(const std::string& what,
                                                     double residual)
    : std::runtime_error(what), best_residual(residual) {}

std::vector<double> default_fit_points(int n_channels, double delta_unit) {
    if (n_channels < 2 || n_channels % 2 != 0)
        throw std::invalid_argument("n_channels must be even and >= 2");
    const int n_opt = 2 * n_channels - 1;
    const double dmax = delta_unit * (n_channels - 1) / 2.0;
    std::vector<double> pts;
    pts.reserve(n_opt);
    for (int m = 1; m <= n_opt; ++m) pts.push_back(m * dmax / (2.0 * n_opt));
    return pts;
}

int param_count(const OptimizationProblem& problem) {
    return problem.symmetric ? 1 + 3 * (problem.n_channels / 2)
                             : 1 + 3 * problem.n_channels;
}

DeviceConfig config_from_params(const std::vector<double>& x,
                                const OptimizationProblem& problem) {
    const int n = problem.n_channels;
    if (static_cast<int>(x.size()) != param_count(problem))
        throw std::invalid_argument("parameter vector has wrong length");

    DeviceConfig cfg;
    if (problem.symmetric) {
        const int h = n / 2;
        SymmetricHalf half;
        half.gamma2_inv = x[0];
        half.f.assign(x.begin() + 1, x.begin() + 1 + h);
        half.g.assign(x.begin() + 1 + h, x.begin() + 1 + 2 * h);
        half.delta_c.assign(x.begin() + 1 + 2 * h, x.begin() + 1 + 3 * h);
        cfg = expand_symmetric(half, n, problem.delta_unit);
    } else {
        cfg.n_channels = n;
        cfg.delta_unit = problem.delta_unit;
        const auto centers = spin_line_centers(n, problem.delta_unit);
        int k = 0;
        for (const auto& [idx, center] : centers) {
            ChannelParams ch;
            ch.index = idx;
            ch.f_sq = x[1 + k] * x[1 + k];
            ch.gamma2_inv = x[0];
            ch.g = x[1 + n + k];
            ch.delta_c = x[1 + 2 * n + k];
            ch.delta_spin = center;
            cfg.channels.push_back(ch);
            ++k;
        }
    }
    return with_losses(std::move(cfg), problem.gamma_r_tilde, problem.gamma_mini);
}

std::vector<double> lower_bounds(const OptimizationProblem& problem) {
    const auto& b = problem.bounds;
    std::vector<double> lo{b.gamma2_inv_lo};
    if (problem.symmetric) {
        const int h = problem.n_channels / 2;
        lo.insert(lo.end(), h, b.f_lo);
        lo.insert(lo.end(), h, b.g_lo);
        lo.insert(lo.end(), h, b.delta_c_lo);
    } else {
        const int n = problem.n_channels;
        lo.insert(lo.end(), n, b.f_lo);
        lo.insert(lo.end(), n, b.g_lo);
        // channels in index order: the first N/2 have negative indices with
        // mirrored detuning range [-hi, -lo]
        for (int k = 0; k < n; ++k)
            lo.push_back(k < n / 2 ? -b.delta_c_hi : b.delta_c_lo);
    }
    return lo;
}

std::vector<double> upper_bounds(const OptimizationProblem& problem) {
    const auto& b = problem.bounds;
    std::vector<double> hi{b.gamma2_inv_hi};
    if (problem.symmetric) {
        const int h = problem.n_channels / 2;
        hi.insert(hi.end(), h, b.f_hi);
        hi.insert(hi.end(), h, b.g_hi);
        hi.insert(hi.end(), h, b.delta_c_hi);
    } else {
        const int n = problem.n_channels;
        hi.insert(hi.end(), n, b.f_hi);
        hi.insert(hi.end(), n, b.g_hi);
        for (int k = 0; k < n; ++k)
            hi.push_back(k < n / 2 ? -b.delta_c_lo : b.delta_c_hi);
    }
    return hi;
}

namespace {

constexpr double kBadEval = 1e12;

double raw_objective(const std::vector<double>& x,
                     const OptimizationProblem& problem, double weight) {
    DeviceConfig cfg;
    try {
        cfg = config_from_params(x, problem);
    } catch (const std::exception&) {
        return kBadEval;
    }
    double acc = 0.0;
    try {
        for (double nu : problem.fit_points) {
            if (problem.objective_kind == ObjectiveKind::one_minus_F)
                acc += std::norm(1.0 - eval_F(cfg, nu));
            else
                acc += std::norm(eval_S(cfg, nu));
        }
        acc += weight * std::norm(eval_F(cfg, 0.0) - 1.0);
    } catch (const std::exception&) {
        return kBadEval;
    }
    if (!std::isfinite(acc)) return kBadEval;
    return acc;
}

}  // namespace

double objective(const std::vector<double>& x,
                 const OptimizationProblem& problem) {
    OptimizationProblem p = problem;
    if (p.fit_points.empty())
        p.fit_points = default_fit_points(p.n_channels, p.delta_unit);
    return raw_objective(x, p, p.constraint_weight);
}

namespace {

struct BoxedObjective {
    const OptimizationProblem& problem;
    const std::vector<double>& lo;
    const std::vector<double>& hi;
    double weight;
    long& evals;

    double operator()(const std::vector<double>& x) const {
        ++evals;
        std::vector<double> xc(x.size());
        double violation = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            xc[i] = std::clamp(x[i], lo[i], hi[i]);
            const double d = x[i] - xc[i];
            violation += d * d;
        }
        const double val = raw_objective(xc, problem, weight);
        return val + 1e6 * violation;
    }
};

// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5). Stops when the simplex diameter in box-scaled coordinates
// drops below tol or the evaluation budget is spent. Deterministic.
template <typename Fn>
std::vector<double> nelder_mead(Fn&& fn, std::vector<double> x0,
                                const std::vector<double>& lo,
                                const std::vector<double>& hi, double tol,
                                long max_evals, long& evals) {
    const size_t d = x0.size();
    std::vector<std::vector<double>> xs(d + 1, x0);
    for (size_t i = 0; i < d; ++i) {
        double step = 0.05 * (hi[i] - lo[i]);
        if (step == 0.0) continue;  // pinned parameter
        if (x0[i] + step > hi[i]) step = -step;
        xs[i + 1][i] += step;
    }
    std::vector<double> fs(d + 1);
    const long start_evals = evals;
    for (size_t i = 0; i <= d; ++i) fs[i] = fn(xs[i]);

    std::vector<size_t> order(d + 1);
    auto sort_order = [&] {
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return fs[a] < fs[b]; });
    };

    while (evals - start_evals < max_evals) {
        sort_order();
        const size_t best = order[0], worst = order[d], second = order[d - 1];

        double diam = 0.0;
        for (size_t i = 0; i <= d; ++i)
            for (size_t k = 0; k < d; ++k) {
                const double span = hi[k] > lo[k] ? hi[k] - lo[k] : 1.0;
                diam = std::max(diam,
                                std::abs(xs[i][k] - xs[best][k]) / span);
            }
        if (diam < tol) break;

        std::vector<double> centroid(d, 0.0);
        for (size_t i = 0; i <= d; ++i) {
            if (i == worst) continue;
            for (size_t k = 0; k < d; ++k) centroid[k] += xs[i][k];
        }
        for (double& c : centroid) c /= static_cast<double>(d);

        auto blend = [&](double coef) {
            std::vector<double> p(d);
            for (size_t k = 0; k < d; ++k)
                p[k] = centroid[k] + coef * (xs[worst][k] - centroid[k]);
            return p;
        };

        auto reflected = blend(-1.0);
        const double fr = fn(reflected);
        if (fr < fs[best]) {
            auto expanded = blend(-2.0);
            const double fe = fn(expanded);
            if (fe < fr) {
                xs[worst] = std::move(expanded);
                fs[worst] = fe;
            } else {
                xs[worst] = std::move(reflected);
                fs[worst] = fr;
            }
        } else if (fr < fs[second]) {
            xs[worst] = std::move(reflected);
            fs[worst] = fr;
        } else {
            const bool outside = fr < fs[worst];
            auto contracted = blend(outside ? -0.5 : 0.5);
            const double fc = fn(contracted);
            if (fc < (outside ? fr : fs[worst])) {
                xs[worst] = std::move(contracted);
                fs[worst] = fc;
            } else {
                for (size_t i = 0; i <= d; ++i) {  // shrink toward the best
                    if (i == best) continue;
                    for (size_t k = 0; k < d; ++k)
                        xs[i][k] = xs[best][k] + 0.5 * (xs[i][k] - xs[best][k]);
                    fs[i] = fn(xs[i]);
                }
            }
        }
    }
    sort_order();
    return xs[order[0]];
}

struct StartOutcome {
    std::vector<double> x;      // clamped final point
    double objective = kBadEval;  // at the problem's constraint weight
    double residual = kBadEval;   // |F(0) - 1|
    long evals = 0;
};

}  // namespace

OptResult optimize(const OptimizationProblem& problem_in,
                   const OptOptions& options) {
    OptimizationProblem problem = problem_in;
    if (problem.fit_points.empty())
        problem.fit_points =
            default_fit_points(problem.n_channels, problem.delta_unit);
    for (size_t i = 0; i < problem.fit_points.size(); ++i)
        if (!(problem.fit_points[i] > 0.0) ||
            (i > 0 && problem.fit_points[i] <= problem.fit_points[i - 1]))
            throw std::invalid_argument(
                "fit_points must be positive and strictly increasing");
    if (options.n_starts < 1)
        throw std::invalid_argument("n_starts must be >= 1");

    const auto lo = lower_bounds(problem);
    const auto hi = upper_bounds(problem);
    const size_t dim = lo.size();
    for (size_t i = 0; i < dim; ++i)
        if (hi[i] < lo[i])
            throw std::invalid_argument("bounds must satisfy lo <= hi");
    bool pinned = true;
    for (size_t i = 0; i < dim; ++i) pinned = pinned && hi[i] == lo[i];

    // All start points are drawn up front so the sequence depends only on
    // the seed, never on thread scheduling.
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> starts(options.n_starts,
                                            std::vector<double>(dim));
    for (auto& s : starts)
        for (size_t i = 0; i < dim; ++i) s[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);

    const long phase_budget = std::max(1L, static_cast<long>(options.max_evals) / 4);
    std::vector<StartOutcome> outcomes(options.n_starts);

    auto run_start = [&](int idx) {
        StartOutcome out;
        std::vector<double> x = starts[idx];
        for (double w : {1e2, 1e4, 1e6}) {
            BoxedObjective fn{problem, lo, hi, w, out.evals};
            x = nelder_mead(fn, std::move(x), lo, hi, options.tol, phase_budget,
                            out.evals);
        }
        BoxedObjective polish{problem, lo, hi, 1e10, out.evals};
        x = nelder_mead(polish, std::move(x), lo, hi,
                        std::min(options.tol, 1e-10), phase_budget, out.evals);
        for (size_t i = 0; i < dim; ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
        out.objective = raw_objective(x, problem, problem.constraint_weight);
        try {
            const DeviceConfig cfg = config_from_params(x, problem);
            out.residual = std::abs(eval_F(cfg, 0.0) - 1.0);
        } catch (const std::exception&) {
            out.residual = kBadEval;
        }
        out.x = std::move(x);
        outcomes[idx] = std::move(out);
    };

    const int jobs = std::max(1, options.jobs);
    if (jobs == 1) {
        for (int i = 0; i < options.n_starts; ++i) run_start(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        const int workers = std::min(jobs, options.n_starts);
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < options.n_starts;
                     i = next.fetch_add(1))
                    run_start(i);
            });
        for (auto& th : pool) th.join();
    }

    const StartOutcome* best = &outcomes[0];
    for (const auto& out : outcomes) {
        const auto key = [](const StartOutcome& o) {
            return std::tie(o.objective, o.residual, o.x);
        };
        if (key(out) < key(*best)) best = &out;
    }

    long total_evals = 0;
    for (const auto& out : outcomes) total_evals += out.evals;

    if (best->objective >= kBadEval)
        throw optimization_failed_error(
            "no start produced a finite objective", best->residual);
    if (!pinned && best->residual > 1e-6) {
        std::ostringstream msg;
        msg << "matching constraint not met: best |F(0)-1| = " << best->residual
            << " after " << options.n_starts << " starts";
        throw optimization_failed_error(msg.str(), best->residual);
    }

    OptResult result;
    result.best_params = best->x;
    result.symmetric = problem.symmetric;
    result.config = config_from_params(best->x, problem);
    result.objective_value = best->objective;
    result.constraint_residual = best->residual;
    result.n_starts = options.n_starts;
    result.n_evals = total_evals;
    const double band = 0.8 * problem.delta_unit;
    const double step = 0.005 * problem.delta_unit;
    const DeviceConfig lossless = with_losses(result.config, 0.0, 0.0);
    result.plateau_summary.min_eta_lossless =
        min_eta_over_band(lossless, band, step);
    result.plateau_summary.min_eta_loss_1e2 =
        min_eta_over_band(with_losses(result.config, 1e-2, 1e-2), band, step);
    return result;
}

namespace {

ConfigMetrics metrics_for(const DeviceConfig& lossless_cfg,
                          const OptimizationProblem& problem) {
    ConfigMetrics m;
    const double band = 0.8 * problem.delta_unit;
    const double step = 0.005 * problem.delta_unit;
    m.min_eta_lossless = min_eta_over_band(with_losses(lossless_cfg, 0, 0), band, step);
    m.min_eta_loss_1e2 =
        min_eta_over_band(with_losses(lossless_cfg, 1e-2, 1e-2), band, step);
    m.min_eta_loss_1e1 =
        min_eta_over_band(with_losses(lossless_cfg, 1e-1, 1e-1), band, step);
    m.absorption = absorption_coefficients(lossless_cfg);
    return m;
}

}  // namespace

double objective_of_config(const DeviceConfig& cfg,
                           const OptimizationProblem& problem) {
    OptimizationProblem p = problem;
    if (p.fit_points.empty())
        p.fit_points = default_fit_points(p.n_channels, p.delta_unit);
    const DeviceConfig eval_cfg =
        with_losses(cfg, p.gamma_r_tilde, p.gamma_mini);
    double acc = 0.0;
    for (double nu : p.fit_points) {
        if (p.objective_kind == ObjectiveKind::one_minus_F)
            acc += std::norm(1.0 - eval_F(eval_cfg, nu));
        else
            acc += std::norm(eval_S(eval_cfg, nu));
    }
    acc += p.constraint_weight * std::norm(eval_F(eval_cfg, 0.0) - 1.0);
    return acc;
}

ReferenceComparison compare_to_reference(const OptResult& result,
                                         const OptimizationProblem& problem) {
    if (problem.n_channels != 4)
        throw std::invalid_argument("reference comparison is defined for N = 4");
    ReferenceComparison cmp;
    cmp.result = metrics_for(result.config, problem);
    cmp.result.objective = objective_of_config(result.config, problem);
    const DeviceConfig ref = reference_config_n4();
    cmp.reference = metrics_for(ref, problem);
    cmp.reference.objective = objective_of_config(ref, problem);
    return cmp;
}

std::string format_comparison(const ReferenceComparison& cmp) {
    std::ostringstream os;
    os.setf(std::ios::scientific);
    os.precision(6);
    auto row = [&os](const char* label, double a, double b) {
        os << "  " << label << ": result " << a << "  reference " << b << "\n";
    };
    os << "result vs bundled reference set\n";
    row("objective", cmp.result.objective, cmp.reference.objective);
    row("min eta, lossless ", cmp.result.min_eta_lossless,
        cmp.reference.min_eta_lossless);
    row("min eta, loss 1e-2", cmp.result.min_eta_loss_1e2,
        cmp.reference.min_eta_loss_1e2);
    row("min eta, loss 1e-1", cmp.result.min_eta_loss_1e1,
        cmp.reference.min_eta_loss_1e1);
    os << "  absorption coefficients f^2*T2* by channel:\n";
    for (const auto& [idx, val] : cmp.result.absorption) {
        os << "    [" << idx << "] result " << val;
        auto it = cmp.reference.absorption.find(idx);
        if (it != cmp.reference.absorption.end()) os << "  reference " << it->second;
        os << "\n";
    }
    return os.str();
}

}  // namespace mrqm
