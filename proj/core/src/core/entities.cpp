#include "loom/core/entities.hpp"

#include <algorithm>

#include "loom/core/error.hpp"
#include "loom/core/vocabulary.hpp"

namespace loom {

namespace {
constexpr std::string_view kOpen = "\xE2\x9F\xA8";
constexpr std::string_view kClose = "\xE2\x9F\xA9";
}  // namespace

std::vector<std::string> find_entities(std::string_view text) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = text.find(kOpen, pos)) != std::string_view::npos) {
    const auto close = text.find(kClose, pos + kOpen.size());
    if (close == std::string_view::npos) throw BindingError("unterminated entity token");
    std::string name(text.substr(pos + kOpen.size(), close - pos - kOpen.size()));
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    pos = close + kClose.size();
  }
  return names;
}

std::string bind_entities(std::string_view templ, const std::map<std::string, std::string>& bindings) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = templ.find(kOpen, pos);
    if (open == std::string_view::npos) {
      out.append(templ.substr(pos));
      break;
    }
    const auto close = templ.find(kClose, open + kOpen.size());
    if (close == std::string_view::npos) throw BindingError("unterminated entity token");
    const std::string name(templ.substr(open + kOpen.size(), close - open - kOpen.size()));
    const auto it = bindings.find(name);
    if (it == bindings.end()) {
      throw BindingError("no binding for entity " + EntityVocabulary::token_for(name));
    }
    out.append(templ.substr(pos, close + kClose.size() - pos));
    out.append(" [").append(it->second).append("]");
    pos = close + kClose.size();
  }
  return out;
}

}  // namespace loom
