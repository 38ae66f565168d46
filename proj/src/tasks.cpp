#include "ealab/tasks.hpp"

#include <charconv>
#include <stdexcept>

namespace ealab {

namespace {

[[noreturn]] void bad_spec(std::string_view text) {
  throw std::invalid_argument("invalid task spec \"" + std::string(text) +
                              "\" (expected N<basis>T<delay>[-S|-R])");
}

}  // namespace

void TaskSpec::validate() const {
  if (basis < 2) throw std::invalid_argument("task basis must be >= 2");
  if (delay < 1) throw std::invalid_argument("task delay must be >= 1");
}

std::uint64_t TaskSpec::state_count() const {
  validate();
  std::uint64_t count = 1;
  for (int i = 0; i < window_size(); ++i) {
    const auto n = static_cast<std::uint64_t>(basis);
    if (count > (1ull << 62) / n)
      throw std::overflow_error("state space of " + to_string(*this) +
                                " exceeds 2^62");
    count *= n;
  }
  return count;
}

TaskSpec parse_task_spec(std::string_view text) {
  TaskSpec spec;
  std::string_view rest = text;
  if (rest.size() < 4 || rest[0] != 'N') bad_spec(text);
  rest.remove_prefix(1);
  const std::size_t t_pos = rest.find('T');
  if (t_pos == std::string_view::npos || t_pos == 0) bad_spec(text);

  const std::string_view basis_part = rest.substr(0, t_pos);
  std::string_view delay_part = rest.substr(t_pos + 1);
  spec.variant = TaskVariant::NT;
  if (delay_part.ends_with("-S")) {
    spec.variant = TaskVariant::NTS;
    delay_part.remove_suffix(2);
  } else if (delay_part.ends_with("-R")) {
    spec.variant = TaskVariant::NTR;
    delay_part.remove_suffix(2);
  }
  if (delay_part.empty()) bad_spec(text);

  auto parse_int = [&](std::string_view s, int& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) bad_spec(text);
  };
  parse_int(basis_part, spec.basis);
  parse_int(delay_part, spec.delay);
  spec.validate();
  return spec;
}

std::string to_string(const TaskSpec& spec) {
  std::string out = "N" + std::to_string(spec.basis) + "T" +
                    std::to_string(spec.delay);
  if (spec.variant == TaskVariant::NTS) out += "-S";
  if (spec.variant == TaskVariant::NTR) out += "-R";
  return out;
}

bool state_valid(const TaskSpec& spec, const SequenceState& state) {
  if (state.window.size() != static_cast<std::size_t>(spec.window_size()))
    return false;
  for (Symbol s : state.window)
    if (s < 0 || s >= spec.basis) return false;
  return true;
}

Symbol next_symbol(const TaskSpec& spec, const SequenceState& state) {
  if (!state_valid(spec, state))
    throw std::invalid_argument("state is not valid for task " +
                                to_string(spec));
  const auto& w = state.window;
  const int n = spec.basis;
  // w[0] = x(t-tau-1), w[1] = x(t-tau), ..., w[tau] = x(t-1)
  const auto nt = [&] { return (w[0] + w[1]) % n; };
  const auto nts = [&] {
    long long sum = 0;
    for (Symbol s : w) sum += s;
    return static_cast<Symbol>(sum % n);
  };
  switch (spec.variant) {
    case TaskVariant::NT:
      return nt();
    case TaskVariant::NTS:
      return nts();
    case TaskVariant::NTR:
      return w[0] == 0 ? nts() : nt();
  }
  throw std::logic_error("unreachable task variant");
}

SequenceState advance(const TaskSpec& spec, const SequenceState& state) {
  const Symbol next = next_symbol(spec, state);
  SequenceState out;
  out.window.assign(state.window.begin() + 1, state.window.end());
  out.window.push_back(next);
  return out;
}

std::vector<Symbol> generate_series(const TaskSpec& spec,
                                    const SequenceState& initial,
                                    std::size_t length) {
  if (!state_valid(spec, initial))
    throw std::invalid_argument("initial state is not valid for task " +
                                to_string(spec));
  const auto window = static_cast<std::size_t>(spec.window_size());
  if (length < window)
    throw std::invalid_argument(
        "series length must be at least the window size (delay+1)");

  std::vector<Symbol> out;
  out.reserve(length);
  out.insert(out.end(), initial.window.begin(), initial.window.end());

  const int n = spec.basis;
  long long window_sum = 0;
  for (Symbol s : initial.window) window_sum += s;

  for (std::size_t t = window; t < length; ++t) {
    const Symbol oldest = out[t - window];      // x(t-tau-1)
    const Symbol second = out[t - window + 1];  // x(t-tau)
    const auto nt_value = static_cast<Symbol>((oldest + second) % n);
    const auto nts_value = static_cast<Symbol>(window_sum % n);
    Symbol next = 0;
    switch (spec.variant) {
      case TaskVariant::NT:
        next = nt_value;
        break;
      case TaskVariant::NTS:
        next = nts_value;
        break;
      case TaskVariant::NTR:
        next = oldest == 0 ? nts_value : nt_value;
        break;
    }
    out.push_back(next);
    window_sum += next - oldest;
  }
  return out;
}

SequenceState random_initial_state(const TaskSpec& spec, Rng& rng) {
  spec.validate();
  SequenceState state;
  state.window.resize(static_cast<std::size_t>(spec.window_size()));
  for (Symbol& s : state.window) s = rng.uniform_int(spec.basis);
  return state;
}

std::uint64_t encode_state(const TaskSpec& spec, const SequenceState& state) {
  if (!state_valid(spec, state))
    throw std::invalid_argument("state is not valid for task " +
                                to_string(spec));
  std::uint64_t index = 0;
  std::uint64_t factor = 1;
  for (Symbol s : state.window) {
    index += static_cast<std::uint64_t>(s) * factor;
    factor *= static_cast<std::uint64_t>(spec.basis);
  }
  return index;
}

SequenceState decode_state(const TaskSpec& spec, std::uint64_t index) {
  if (index >= spec.state_count())
    throw std::out_of_range("state index out of range for " + to_string(spec));
  SequenceState state;
  state.window.resize(static_cast<std::size_t>(spec.window_size()));
  const auto n = static_cast<std::uint64_t>(spec.basis);
  for (Symbol& s : state.window) {
    s = static_cast<Symbol>(index % n);
    index /= n;
  }
  return state;
}

Tensor1 one_hot_encode(Symbol symbol, int basis) {
  if (symbol < 0 || symbol >= basis)
    throw std::out_of_range("one_hot_encode: symbol out of [0, N)");
  Tensor1 out(static_cast<std::size_t>(basis));
  out[static_cast<std::size_t>(symbol)] = 1.0;
  return out;
}

Symbol one_hot_decode(const Tensor1& encoding) {
  if (encoding.size() == 0)
    throw std::invalid_argument("one_hot_decode: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < encoding.size(); ++i)
    if (encoding[i] > encoding[best]) best = i;
  return static_cast<Symbol>(best);
}

}  // namespace ealab
