#include "ssc/randomizer.hpp"

#include <algorithm>

#include "ssc/error.hpp"
#include "ssc/random.hpp"

namespace ssc {

const char* to_string(RandomizationMode mode) {
  return mode == RandomizationMode::Cascading ? "cascading" : "independent";
}

RandomizationMode parse_randomization_mode(const std::string& name) {
  if (name == "cascading") return RandomizationMode::Cascading;
  if (name == "independent") return RandomizationMode::Independent;
  throw Error(ErrorCode::InvalidArgument, "unknown randomization mode '" + name + "'");
}

RandomizationPlan make_plan(const Network& net, RandomizationMode mode, std::uint64_t seed) {
  auto layers = net.parameterized_layers();
  if (layers.empty()) {
    throw Error(ErrorCode::InvalidArgument, "network has no parameterized layers to randomize");
  }
  RandomizationPlan plan{mode, {}, seed};
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    plan.targets.push_back(net.layer(*it).name);
  }
  return plan;
}

std::uint64_t reinit_seed(std::uint64_t seed_base, const std::string& layer_name) {
  return mix_seed(mix_seed(seed_base, "reinit"), layer_name);
}

std::vector<RandomizedVariant> variants(const Network& net, const RandomizationPlan& plan,
                                        const InitScheme& scheme) {
  std::vector<std::size_t> indices;
  for (const auto& name : plan.targets) {
    const auto idx = net.find_layer(name);
    if (!idx || !net.layer(*idx).parameterized()) {
      throw Error(ErrorCode::InvalidArgument,
                  "plan target '" + name + "' is not a parameterized layer of this network");
    }
    if (std::find(indices.begin(), indices.end(), *idx) != indices.end()) {
      throw Error(ErrorCode::InvalidArgument, "plan target '" + name + "' listed twice");
    }
    indices.push_back(*idx);
  }

  std::vector<RandomizedVariant> out;
  out.reserve(indices.size());
  Network cascade = net;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::uint64_t seed = reinit_seed(plan.reinit_seed_base, plan.targets[k]);
    if (plan.mode == RandomizationMode::Cascading) {
      initialize_layer(cascade, indices[k], scheme.kind, seed);
      out.push_back({k, plan.targets[k], plan.mode, cascade});
    } else {
      Network single = net;
      initialize_layer(single, indices[k], scheme.kind, seed);
      out.push_back({k, plan.targets[k], plan.mode, std::move(single)});
    }
  }
  return out;
}

std::string variant_checkpoint_name(const std::string& model, const RandomizedVariant& v) {
  return model + "." + to_string(v.mode) + "." + std::to_string(v.stage_index) + "." +
         v.stage_label + ".ckpt";
}

}  // namespace ssc
