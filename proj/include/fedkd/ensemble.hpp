#pragma once

#include "fedkd/metrics/report.hpp"

namespace fedkd::ensemble {

/// Label with at least 2 of the 3 binary votes.
int majority_vote(int a, int b, int c);

/// Per-frame majority vote over three reports covering identical devices and
/// test-frame orderings; per-device accuracies are recomputed.
metrics::MethodReport run_ensemble(const metrics::MethodReport& first,
                                   const metrics::MethodReport& second,
                                   const metrics::MethodReport& third);

}  // namespace fedkd::ensemble
