#pragma once

#include <cstddef>
#include <span>

namespace spray {

/// Sets the worker count used by the kinetic and diagnostics loops.
/// Results never depend on this value: parallel loops only write disjoint
/// outputs and every reduction goes through pairwise_sum.
void set_threads(int n);
int threads();

/// Pairwise (cascade) summation with a fixed tree shape, so the rounding of a
/// reduction depends only on the data and never on the schedule.
double pairwise_sum(std::span<const double> v);

}  // namespace spray
