#pragma once

#include "mrqm/model.hpp"

namespace mrqm {

// Reference N=4 design point used by the regression suite and bundled
// fixtures: impedance-matched to |F(0)-1| ~ 1e-3 with a flat absorption
// plateau over roughly [-0.8, 0.8] in delta units.
SymmetricHalf reference_half_n4();

// expand_symmetric of the half-set above; lossless, broadband kappa.
DeviceConfig reference_config_n4();

}  // namespace mrqm
