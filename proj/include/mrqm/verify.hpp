#pragma once

// Regression checks pinning the bundled N=4 reference design to its
// documented figures of merit. Each check reports a measured value next to
// its limit so a failure is directly diagnosable.

#include <string>
#include <vector>

#include "mrqm/io.hpp"
#include "mrqm/model.hpp"

namespace mrqm {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // measured value vs limit
};

// Runs the full fixed-design check list against `cfg` (loss knobs are
// overridden per check; pass the nominal lossless design).
std::vector<CheckResult> run_reference_checks(const DeviceConfig& cfg,
                                              const VerifySettings& settings);

bool all_passed(const std::vector<CheckResult>& checks);

std::string format_checks(const std::vector<CheckResult>& checks);

}  // namespace mrqm
