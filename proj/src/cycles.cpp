#include "ealab/cycles.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace ealab {

namespace {

// Next-state map on integer-encoded states (index = sum of window[i]*N^i).
// Dropping the oldest symbol is index/N; the generated symbol lands in the
// top digit.
class StateMap {
 public:
  explicit StateMap(const TaskSpec& spec)
      : n_(static_cast<std::uint64_t>(spec.basis)),
        digits_(static_cast<std::uint64_t>(spec.window_size())),
        variant_(spec.variant) {
    top_factor_ = 1;
    for (std::uint64_t i = 0; i + 1 < digits_; ++i) top_factor_ *= n_;
  }

  std::uint64_t operator()(std::uint64_t s) const {
    const std::uint64_t oldest = s % n_;
    const std::uint64_t rest = s / n_;
    std::uint64_t next = 0;
    switch (variant_) {
      case TaskVariant::NT:
        next = (oldest + rest % n_) % n_;
        break;
      case TaskVariant::NTS:
        next = digit_sum(s);
        break;
      case TaskVariant::NTR:
        next = oldest == 0 ? digit_sum(s) : (oldest + rest % n_) % n_;
        break;
    }
    return rest + next * top_factor_;
  }

 private:
  std::uint64_t digit_sum(std::uint64_t s) const {
    std::uint64_t sum = 0;
    for (std::uint64_t i = 0; i < digits_; ++i) {
      sum += s % n_;
      s /= n_;
    }
    return sum % n_;
  }

  std::uint64_t n_;
  std::uint64_t digits_;
  TaskVariant variant_;
  std::uint64_t top_factor_;
};

class BitSet {
 public:
  explicit BitSet(std::uint64_t n) : words_((n + 63) / 64, 0) {}
  bool test(std::uint64_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1ull;
  }
  void set(std::uint64_t i) { words_[i >> 6] |= 1ull << (i & 63); }

 private:
  std::vector<std::uint64_t> words_;
};

// Two bits per state: 0 unvisited, 1 on the current path, 2 classified.
class StatusArray {
 public:
  explicit StatusArray(std::uint64_t n) : words_((n + 31) / 32, 0) {}
  unsigned get(std::uint64_t i) const {
    return static_cast<unsigned>((words_[i >> 5] >> ((i & 31) * 2)) & 3ull);
  }
  void set(std::uint64_t i, unsigned value) {
    const std::uint64_t shift = (i & 31) * 2;
    std::uint64_t& w = words_[i >> 5];
    w = (w & ~(3ull << shift)) | (static_cast<std::uint64_t>(value) << shift);
  }

 private:
  std::vector<std::uint64_t> words_;
};

// Permutation fast path: every trajectory returns to its start.
CycleDecomposition enumerate_permutation(std::uint64_t total,
                                         const StateMap& next) {
  BitSet visited(total);
  std::map<std::uint64_t, std::uint64_t> counts;  // length -> count
  for (std::uint64_t s = 0; s < total; ++s) {
    if (visited.test(s)) continue;
    std::uint64_t length = 0;
    std::uint64_t cur = s;
    do {
      visited.set(cur);
      cur = next(cur);
      ++length;
    } while (cur != s);
    ++counts[length];
  }
  CycleDecomposition dec;
  dec.total_states = total;
  for (auto it = counts.rbegin(); it != counts.rend(); ++it)
    dec.entries.emplace_back(it->first, it->second);
  return dec;
}

// General functional graph: walk to first revisit, classify the tail states
// before the cycle entry point as transient.
CycleDecomposition enumerate_functional(std::uint64_t total,
                                        const StateMap& next) {
  constexpr unsigned kUnvisited = 0, kOnPath = 1, kDone = 2;
  StatusArray status(total);
  std::map<std::uint64_t, std::uint64_t> counts;
  std::uint64_t transients = 0;
  std::vector<std::uint64_t> path;
  for (std::uint64_t s = 0; s < total; ++s) {
    if (status.get(s) != kUnvisited) continue;
    path.clear();
    std::uint64_t cur = s;
    while (status.get(cur) == kUnvisited) {
      status.set(cur, kOnPath);
      path.push_back(cur);
      cur = next(cur);
    }
    if (status.get(cur) == kOnPath) {
      std::size_t entry = 0;
      while (path[entry] != cur) ++entry;
      ++counts[path.size() - entry];
      transients += entry;
    } else {
      transients += path.size();
    }
    for (std::uint64_t p : path) status.set(p, kDone);
  }
  CycleDecomposition dec;
  dec.total_states = total;
  dec.transient_states = transients;
  for (auto it = counts.rbegin(); it != counts.rend(); ++it)
    dec.entries.emplace_back(it->first, it->second);
  return dec;
}

}  // namespace

std::uint64_t CycleDecomposition::cycle_count() const {
  std::uint64_t n = 0;
  for (const auto& [length, count] : entries) n += count;
  return n;
}

std::uint64_t CycleDecomposition::cycle_states() const {
  std::uint64_t n = 0;
  for (const auto& [length, count] : entries) n += length * count;
  return n;
}

CycleDecomposition enumerate_cycles(const TaskSpec& spec,
                                    const CycleEnumerationOptions& options) {
  const std::uint64_t total = spec.state_count();
  if (total > options.state_cap)
    throw std::runtime_error("state space of " + to_string(spec) + " (" +
                             std::to_string(total) +
                             " states) exceeds the cap of " +
                             std::to_string(options.state_cap));
  const StateMap next(spec);
  if (spec.variant == TaskVariant::NTR)
    return enumerate_functional(total, next);
  return enumerate_permutation(total, next);
}

double mean_cycle_length(const CycleDecomposition& dec) {
  if (dec.entries.empty())
    throw std::invalid_argument("mean_cycle_length: empty decomposition");
  return static_cast<double>(dec.cycle_states()) /
         static_cast<double>(dec.cycle_count());
}

std::string cycle_decomposition_json(const TaskSpec& spec,
                                     const CycleDecomposition& dec) {
  nlohmann::ordered_json j;
  j["spec"] = to_string(spec);
  j["total"] = dec.total_states;
  auto cycles = nlohmann::ordered_json::array();
  for (const auto& [length, count] : dec.entries)
    cycles.push_back({length, count});
  j["cycles"] = cycles;
  j["transients"] = dec.transient_states;
  j["mean_cycle_length"] = mean_cycle_length(dec);
  return j.dump();
}

}  // namespace ealab
