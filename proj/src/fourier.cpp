#include "mrqm/fourier.hpp"

#include <cmath>
#include <stdexcept>

namespace mrqm {

std::vector<cplx> dft_forward(const std::vector<double>& t,
                              const std::vector<cplx>& x,
                              const std::vector<double>& nu_grid) {
    const size_t n = t.size();
    if (n < 2 || x.size() != n)
        throw std::invalid_argument("dft_forward: need matching t/x with >= 2 samples");

    std::vector<double> w(n);
    w[0] = 0.5 * (t[1] - t[0]);
    for (size_t k = 1; k + 1 < n; ++k) w[k] = 0.5 * (t[k + 1] - t[k - 1]);
    w[n - 1] = 0.5 * (t[n - 1] - t[n - 2]);

    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
    std::vector<cplx> out(nu_grid.size());
    for (size_t m = 0; m < nu_grid.size(); ++m) {
        const double nu = nu_grid[m];
        cplx acc = 0.0;
        for (size_t k = 0; k < n; ++k)
            acc += w[k] * x[k] * std::polar(1.0, nu * t[k]);
        out[m] = acc * inv_sqrt_2pi;
    }
    return out;
}

}  // namespace mrqm
