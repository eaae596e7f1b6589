#include "mrqm/presets.hpp"

namespace mrqm {

SymmetricHalf reference_half_n4() {
    SymmetricHalf half;
    half.gamma2_inv = 1.8;
    half.f = {1.01, 0.707};
    half.g = {0.385, 0.809};
    half.delta_c = {0.56, 1.8};
    return half;
}

DeviceConfig reference_config_n4() {
    return expand_symmetric(reference_half_n4(), 4, 1.0);
}

}  // namespace mrqm
