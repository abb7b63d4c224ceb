#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace loom {

/// Maximum plan length used when building training instances.
inline constexpr std::size_t kMaxPlanSteps = 6;

/// An ordered stepwise plan. Step k (1-based) is steps[k - 1].
struct Plan {
  std::vector<std::string> steps;

  std::size_t size() const { return steps.size(); }
  const std::string& step(std::size_t k) const;  // 1-based, throws RangeError
  bool operator==(const Plan&) const = default;
};

/// Throws StructureError when the plan is empty or a description is empty,
/// untrimmed or contains a newline.
void validate_plan(const Plan& plan);

/// Extracts "Step k: description" lines. Other lines are ignored.
Plan parse_plan(std::string_view text);

/// Inverse of parse_plan for valid plans: "Step 1: a\nStep 2: b".
std::string render_plan(const Plan& plan);

/// The single line "Step k: description" for step k.
std::string render_step(const Plan& plan, std::size_t k);

Plan truncate_plan(const Plan& plan, std::size_t n_max);

}  // namespace loom
