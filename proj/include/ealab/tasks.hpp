#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ealab/rng.hpp"
#include "ealab/tensor.hpp"

namespace ealab {

using Symbol = int;

enum class TaskVariant { NT, NTS, NTR };

// A task from the NT family: x(t) is a modular function of the window
// (x(t-tau-1), ..., x(t-1)).
//   NT:   x(t) = (x(t-tau) + x(t-tau-1)) mod N
//   NT-S: x(t) = (sum of the tau+1 preceding symbols) mod N
//   NT-R: NT-S if x(t-tau-1) = 0, else NT
struct TaskSpec {
  int basis = 2;
  int delay = 1;
  TaskVariant variant = TaskVariant::NT;

  int window_size() const { return delay + 1; }
  // N^(tau+1); throws if it does not fit in 63 bits.
  std::uint64_t state_count() const;
  void validate() const;

  bool operator==(const TaskSpec&) const = default;
};

// "N16T2", "N16T2-S", "N2T5-R"
TaskSpec parse_task_spec(std::string_view text);
std::string to_string(const TaskSpec& spec);

// Window of the delay+1 most recent symbols, oldest first.
struct SequenceState {
  std::vector<Symbol> window;

  bool operator==(const SequenceState&) const = default;
};

bool state_valid(const TaskSpec& spec, const SequenceState& state);

Symbol next_symbol(const TaskSpec& spec, const SequenceState& state);

// Drops the oldest symbol and appends next_symbol.
SequenceState advance(const TaskSpec& spec, const SequenceState& state);

// The initial window followed by generated symbols; `length` symbols total.
// Rejects length < delay+1.
std::vector<Symbol> generate_series(const TaskSpec& spec,
                                    const SequenceState& initial,
                                    std::size_t length);

// Uniform over all N^(tau+1) states.
SequenceState random_initial_state(const TaskSpec& spec, Rng& rng);

// state index = sum of window[i] * N^i
std::uint64_t encode_state(const TaskSpec& spec, const SequenceState& state);
SequenceState decode_state(const TaskSpec& spec, std::uint64_t index);

// Exactly one component 1.0 at `symbol`; throws if symbol is out of range.
Tensor1 one_hot_encode(Symbol symbol, int basis);
// Index of the (unique) maximal component.
Symbol one_hot_decode(const Tensor1& encoding);

}  // namespace ealab
