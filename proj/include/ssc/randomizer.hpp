#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ssc/network.hpp"
#include "ssc/trainer.hpp"

namespace ssc {

enum class RandomizationMode { Cascading, Independent };

const char* to_string(RandomizationMode mode);
RandomizationMode parse_randomization_mode(const std::string& name);

/// Parameterized layers to re-initialize, ordered from the output layer back
/// to the input layer.
struct RandomizationPlan {
  RandomizationMode mode = RandomizationMode::Cascading;
  std::vector<std::string> targets;
  std::uint64_t reinit_seed_base = 0;
};

struct RandomizedVariant {
  std::size_t stage_index = 0;
  std::string stage_label;  ///< the layer newly randomized at this stage
  RandomizationMode mode = RandomizationMode::Cascading;
  Network network;
};

RandomizationPlan make_plan(const Network& net, RandomizationMode mode, std::uint64_t seed);

/// Seed used to re-initialize `layer_name`; identical across stages and modes.
std::uint64_t reinit_seed(std::uint64_t seed_base, const std::string& layer_name);

/// Cascading stage k re-initializes targets[0..k]; independent stage k
/// re-initializes only targets[k]. `net` is never modified. Layers are
/// re-initialized with scheme.kind; scheme.seed is not used.
std::vector<RandomizedVariant> variants(const Network& net, const RandomizationPlan& plan,
                                        const InitScheme& scheme);

/// <model>.<mode>.<stage_index>.<layer>.ckpt
std::string variant_checkpoint_name(const std::string& model, const RandomizedVariant& v);

}  // namespace ssc
