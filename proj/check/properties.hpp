#ifndef STORYVIS_CHECK_PROPERTIES_HPP_
#define STORYVIS_CHECK_PROPERTIES_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace storyvis::check {

struct CheckOptions {
  std::uint64_t seed = 1234;
  // Test hook: swaps the layer-mask rule for an off-by-one variant so the
  // mask oracle has something to catch.
  bool corrupt_mask_rule = false;
};

struct PropertyResult {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Property {
  std::string name;
  std::string summary;
  std::function<PropertyResult(const CheckOptions&)> run;
};

const std::vector<Property>& registry();
const Property& find_property(const std::string& name);

// Runs one property, timing it and turning exceptions into failures.
PropertyResult run_property(const Property& p, const CheckOptions& opt);

// The individual checks, also callable directly.
PropertyResult mask_oracle(const CheckOptions& opt);
PropertyResult example_masks(const CheckOptions& opt);
PropertyResult mask_invariants(const CheckOptions& opt);
PropertyResult node_embedding_oracle(const CheckOptions& opt);
PropertyResult primitive_gradients(const CheckOptions& opt);
PropertyResult grad_encode_step(const CheckOptions& opt);
PropertyResult grad_memory_update(const CheckOptions& opt);
PropertyResult grad_graph_encode(const CheckOptions& opt);
PropertyResult grad_generate_frame(const CheckOptions& opt);
PropertyResult grad_loss_terms(const CheckOptions& opt);
PropertyResult loss_closed_forms(const CheckOptions& opt);
PropertyResult loss_loop_oracles(const CheckOptions& opt);
PropertyResult memory_update_oracle(const CheckOptions& opt);
PropertyResult martt_reduction(const CheckOptions& opt);
PropertyResult martt_causality(const CheckOptions& opt);
PropertyResult attention_masking(const CheckOptions& opt);
PropertyResult levi_invariants(const CheckOptions& opt);

inline constexpr double kGradTolerance = 1e-4;

}  // namespace storyvis::check

#endif  // STORYVIS_CHECK_PROPERTIES_HPP_
