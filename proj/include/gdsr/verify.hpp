#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gdsr {

struct CheckResult {
    std::string name;
    bool passed = false;
    double seconds = 0.0;
    std::string details;
};

/// Runs the release-gate suite: gradient oracles, Monte-Carlo sampler
/// checks, algebraic/spectral invariants, dual-implementation oracles,
/// determinism, the end-to-end SR experiment and the ablation harness,
/// plus a harness self-test against a deliberately corrupted gradient.
/// One line per check is streamed to `log`; scratch_dir receives run
/// outputs. include_slow=false skips the training-scale checks.
std::vector<CheckResult> run_verification(const std::string& scratch_dir,
                                          std::ostream& log,
                                          bool include_slow = true);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace gdsr
