#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ealab/tasks.hpp"

namespace ealab {

// Multiset of (cycle length, count), descending length. For NT and NT-S the
// state map is a permutation, so cycle states cover the whole space; NT-R may
// leave transient states that sit on no cycle.
struct CycleDecomposition {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> entries;
  std::uint64_t total_states = 0;
  std::uint64_t transient_states = 0;

  std::uint64_t cycle_count() const;
  std::uint64_t cycle_states() const;
};

struct CycleEnumerationOptions {
  std::uint64_t state_cap = 1ull << 28;
};

// Exact decomposition by exhaustive traversal of all N^(tau+1) states.
// Throws if the state space exceeds options.state_cap.
CycleDecomposition enumerate_cycles(const TaskSpec& spec,
                                    const CycleEnumerationOptions& options = {});

// Unweighted mean of cycle lengths counted with multiplicity,
// i.e. cycle_states / cycle_count.
double mean_cycle_length(const CycleDecomposition& dec);

// {"spec": ..., "total": ..., "cycles": [[length, count], ...],
//  "transients": ..., "mean_cycle_length": ...}
std::string cycle_decomposition_json(const TaskSpec& spec,
                                     const CycleDecomposition& dec);

}  // namespace ealab
