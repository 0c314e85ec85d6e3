#include "iconann/taxonomy.hpp"

#include <stdexcept>
#include <string>

namespace iconann {

std::string_view name_of(IconClass c) { return kIconClassNames.at(static_cast<std::size_t>(c)); }

std::optional<IconClass> parse_icon_class(std::string_view name) {
  for (std::size_t i = 0; i < kIconClassNames.size(); ++i) {
    if (kIconClassNames[i] == name) return static_cast<IconClass>(i);
  }
  return std::nullopt;
}

IconClass icon_class_from_name(std::string_view name) {
  if (auto c = parse_icon_class(name)) return *c;
  throw std::invalid_argument("unknown icon class '" + std::string(name) + "'");
}

}  // namespace iconann
