#include "loom/core/plan.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "loom/core/error.hpp"

namespace loom {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct StepLine {
  std::size_t index;
  std::string description;
};

// Matches "Step <digits>: <non-empty description>" after trimming the line.
bool match_step(std::string_view line, StepLine& out) {
  line = trim(line);
  constexpr std::string_view kPrefix = "Step ";
  if (!line.starts_with(kPrefix)) return false;
  line.remove_prefix(kPrefix.size());
  const auto colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0) return false;
  const auto digits = line.substr(0, colon);
  if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return false;
  }
  std::size_t index = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return false;
  const auto desc = trim(line.substr(colon + 1));
  if (desc.empty()) return false;
  out = {index, std::string(desc)};
  return true;
}

}  // namespace

const std::string& Plan::step(std::size_t k) const {
  if (k < 1 || k > steps.size()) {
    throw RangeError("plan step " + std::to_string(k) + " out of range [1, " +
                     std::to_string(steps.size()) + "]");
  }
  return steps[k - 1];
}

void validate_plan(const Plan& plan) {
  if (plan.steps.empty()) throw StructureError("plan has no steps");
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& s = plan.steps[i];
    if (s.empty() || trim(s).size() != s.size() || s.find('\n') != std::string::npos) {
      throw StructureError("invalid description for step " + std::to_string(i + 1) + ": '" + s +
                           "'");
    }
  }
}

Plan parse_plan(std::string_view text) {
  std::vector<StepLine> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    StepLine sl;
    if (match_step(text.substr(pos, nl - pos), sl)) lines.push_back(std::move(sl));
    pos = nl + 1;
  }
  if (lines.empty()) throw ParseError("no 'Step k: ...' lines found");

  std::stable_sort(lines.begin(), lines.end(),
                   [](const StepLine& a, const StepLine& b) { return a.index < b.index; });
  bool consecutive = true;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].index != i + 1) consecutive = false;
  }
  if (!consecutive) {
    std::ostringstream msg;
    msg << "step indices must be 1..n without gaps or duplicates; found";
    for (const auto& l : lines) msg << ' ' << l.index;
    throw StructureError(msg.str());
  }

  Plan plan;
  plan.steps.reserve(lines.size());
  for (auto& l : lines) plan.steps.push_back(std::move(l.description));
  return plan;
}

std::string render_step(const Plan& plan, std::size_t k) {
  return "Step " + std::to_string(k) + ": " + plan.step(k);
}

std::string render_plan(const Plan& plan) {
  validate_plan(plan);
  std::string out;
  for (std::size_t k = 1; k <= plan.steps.size(); ++k) {
    if (k > 1) out.push_back('\n');
    out += render_step(plan, k);
  }
  return out;
}

Plan truncate_plan(const Plan& plan, std::size_t n_max) {
  if (n_max < 1) throw RangeError("n_max must be >= 1");
  Plan out;
  const auto n = std::min(plan.steps.size(), n_max);
  out.steps.assign(plan.steps.begin(), plan.steps.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace loom
