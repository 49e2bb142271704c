#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Text resources compiled in from resources/ at configure time.
namespace relgraph::resources {

extern const std::string_view starter_kb;
extern const std::string_view character_prompt;
extern const std::string_view relation_prompt;
extern const std::string_view resolution_prompt;
extern const std::string_view logic_add_prompt;
extern const std::string_view logic_remove_prompt;

/// Replaces every "{{name}}" placeholder with its value. Unknown placeholders
/// are left as they are.
std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string, std::string>>& values);

} // namespace relgraph::resources
