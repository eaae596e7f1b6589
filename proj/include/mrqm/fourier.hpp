#pragma once

#include <vector>

#include "mrqm/model.hpp"

namespace mrqm {

// Continuous-transform estimate phi(nu) = (2*pi)^(-1/2) * integral
// e^{+i*nu*t} x(t) dt by trapezoid quadrature on the sample grid. The time
// grid may be non-uniform (monotone increasing). Phases are computed per
// sample (no recurrence), so there is no accumulated phase drift.
std::vector<cplx> dft_forward(const std::vector<double>& t,
                              const std::vector<cplx>& x,
                              const std::vector<double>& nu_grid);

}  // namespace mrqm
