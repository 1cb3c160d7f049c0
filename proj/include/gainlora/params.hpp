#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gainlora/gating.hpp"

namespace gainlora {

struct AdaptedWeightGroup {
  std::size_t d_out = 0;
  std::size_t d_in = 0;
  std::size_t count = 0;
};

struct ArchSpec {
  std::string name;
  std::vector<AdaptedWeightGroup> weights;
  GatingShape gate;
};

// t5-large, t5-xl, llama-2-7b, llama-2-13b, llama-3-8b. Throws UnknownPreset.
ArchSpec arch_preset(std::string_view name);
std::vector<std::string> arch_preset_names();

enum class BranchUpdate { Full, AOnly };

// Parsed from strings such as "olora", "gain+inflora", "inc", "seq".
struct ParamStrategy {
  bool gain = false;
  BranchUpdate update = BranchUpdate::Full;
  std::string name;
};
ParamStrategy parse_param_strategy(std::string_view text);

// Trainable parameters while learning one task: the new branch (A and B, or
// A alone when B is designed and frozen) on every adapted weight, plus one
// gating module when gain is set.
std::uint64_t count_trainable_params(const ArchSpec& arch, const ParamStrategy& strategy,
                                     std::size_t rank);

}  // namespace gainlora
