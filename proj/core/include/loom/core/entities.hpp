#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace loom {

/// Entity names (without brackets) in order of first appearance in text.
std::vector<std::string> find_entities(std::string_view text);

/// Appends " [description]" after every ⟨name⟩ in the template. Bindings are
/// keyed by entity name. Throws BindingError naming the first unbound entity.
std::string bind_entities(std::string_view templ, const std::map<std::string, std::string>& bindings);

}  // namespace loom
