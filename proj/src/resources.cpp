#include "relgraph/resources.hpp"

namespace relgraph::resources {

std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string, std::string>>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const std::size_t close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(pos, open - pos));
        const std::string_view name = tmpl.substr(open + 2, close - open - 2);
        bool replaced = false;
        for (const auto& [key, value] : values) {
            if (key == name) {
                out += value;
                replaced = true;
                break;
            }
        }
        if (!replaced) out.append(tmpl.substr(open, close + 2 - open));
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

} // namespace relgraph::resources
