#include "gainlora/params.hpp"

#include "gainlora/error.hpp"

namespace gainlora {

ArchSpec arch_preset(std::string_view name) {
  // Query/value projections that carry LoRA, and the gate shapes used with
  // each model family (hidden width 100 for T5, 50 for Llama).
  if (name == "t5-large") {
    return {"t5-large", {{1024, 1024, 144}}, default_gating_shape(1024, 100)};
  }
  if (name == "t5-xl") {
    return {"t5-xl", {{4096, 1024, 144}}, default_gating_shape(1024, 100)};
  }
  if (name == "llama-2-7b") {
    return {"llama-2-7b", {{4096, 4096, 64}}, default_gating_shape(4096, 50)};
  }
  if (name == "llama-2-13b") {
    return {"llama-2-13b", {{5120, 5120, 80}}, default_gating_shape(5120, 50)};
  }
  if (name == "llama-3-8b") {
    return {"llama-3-8b", {{4096, 4096, 32}, {1024, 4096, 32}}, default_gating_shape(4096, 50)};
  }
  throw Error(ErrorKind::UnknownPreset, "unknown architecture preset '" + std::string(name) + "'");
}

std::vector<std::string> arch_preset_names() {
  return {"t5-large", "t5-xl", "llama-2-7b", "llama-2-13b", "llama-3-8b"};
}

ParamStrategy parse_param_strategy(std::string_view text) {
  ParamStrategy s;
  s.name = std::string(text);
  std::string_view base = text;
  constexpr std::string_view kGain = "gain+";
  if (base.starts_with(kGain)) {
    s.gain = true;
    base.remove_prefix(kGain.size());
  }
  if (base == "olora" || base == "inc" || base == "seq") {
    s.update = BranchUpdate::Full;
  } else if (base == "inflora") {
    s.update = BranchUpdate::AOnly;
  } else {
    throw Error(ErrorKind::ConfigError, "unknown strategy '" + std::string(text) + "'");
  }
  return s;
}

std::uint64_t count_trainable_params(const ArchSpec& arch, const ParamStrategy& strategy,
                                     std::size_t rank) {
  std::uint64_t total = 0;
  for (const AdaptedWeightGroup& w : arch.weights) {
    const std::uint64_t per_weight =
        strategy.update == BranchUpdate::Full ? rank * (w.d_out + w.d_in) : rank * w.d_out;
    total += per_weight * w.count;
  }
  if (strategy.gain) {
    total += arch.gate.parameter_count();
  }
  return total;
}

}  // namespace gainlora
