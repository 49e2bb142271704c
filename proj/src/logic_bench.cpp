#include "relgraph/error.hpp"
#include "relgraph/metrics.hpp"
#include "relgraph/resources.hpp"

#include <array>
#include <cctype>
#include <iostream>

namespace relgraph {

namespace {

constexpr std::array<std::string_view, 3> kAnswers{"Yes", "No", "Unsure"};

std::string label_key(std::string_view s) {
    std::string out;
    bool gap = false;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c >= 0x80) {
            if (gap && !out.empty()) out += '_';
            out += static_cast<char>(std::tolower(c));
            gap = false;
        } else {
            gap = true;
        }
    }
    return out;
}

std::string bullet_list(const std::vector<std::string>& inputs) {
    std::string out;
    for (const auto& s : inputs) out += "- " + s + '\n';
    return out;
}

} // namespace

std::vector<LogicBenchItem> load_logic_bench(std::string_view jsonl) {
    std::vector<LogicBenchItem> items;
    std::size_t line_no = 0;
    while (!jsonl.empty()) {
        ++line_no;
        const auto nl = jsonl.find('\n');
        const std::string_view line = jsonl.substr(0, nl);
        jsonl = nl == std::string_view::npos ? std::string_view{} : jsonl.substr(nl + 1);
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("parse_error", line_no, e.what());
        }
        LogicBenchItem item;
        const std::string task = j.value("task", std::string{});
        if (task == "add") {
            item.task = LogicTask::add;
        } else if (task == "remove") {
            item.task = LogicTask::remove;
        } else {
            throw ParseError("parse_error", line_no, "task must be add or remove");
        }
        const Json& inputs = j.contains("inputs") ? j["inputs"] : Json();
        if (inputs.is_string()) {
            item.inputs.push_back(inputs.get<std::string>());
        } else if (inputs.is_array()) {
            for (const auto& s : inputs) {
                if (!s.is_string()) throw ParseError("parse_error", line_no, "inputs must be strings");
                item.inputs.push_back(s.get<std::string>());
            }
        } else {
            throw ParseError("parse_error", line_no, "missing inputs");
        }
        const Json& gold = j.contains("gold") ? j["gold"] : Json();
        if (item.task == LogicTask::add) {
            if (!gold.is_array()) throw ParseError("parse_error", line_no, "add gold must be a list");
            for (const auto& s : gold) {
                if (!s.is_string()) throw ParseError("parse_error", line_no, "labels must be strings");
                item.gold_labels.insert(label_key(s.get<std::string>()));
            }
        } else {
            const auto answer = gold.is_string() ? parse_yes_no_unsure(gold.get<std::string>())
                                                 : std::nullopt;
            if (!answer) throw ParseError("parse_error", line_no, "remove gold must be Yes, No or Unsure");
            item.gold_answer = *answer;
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::optional<std::set<std::string>> parse_label_set(std::string_view raw) {
    std::set<std::string> labels;
    const auto open = raw.find('[');
    const auto close = raw.rfind(']');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        try {
            const Json j = Json::parse(raw.substr(open, close - open + 1));
            if (j.is_array()) {
                for (const auto& s : j) {
                    if (!s.is_string()) return std::nullopt;
                    if (auto k = label_key(s.get<std::string>()); !k.empty()) labels.insert(k);
                }
                return labels;
            }
        } catch (const nlohmann::json::parse_error&) {
        }
    }
    std::string piece;
    bool any = false;
    const auto flush = [&] {
        if (auto k = label_key(piece); !k.empty()) {
            labels.insert(k);
            any = true;
        }
        piece.clear();
    };
    for (char c : raw) {
        if (c == ',' || c == '\n' || c == ';') {
            flush();
        } else {
            piece += c;
        }
    }
    flush();
    if (!any) return std::nullopt;
    return labels;
}

std::optional<std::string> parse_yes_no_unsure(std::string_view raw) {
    std::string word;
    const auto check = [&]() -> std::optional<std::string> {
        for (auto a : kAnswers) {
            if (label_key(a) == word) return std::string(a);
        }
        return std::nullopt;
    };
    for (char c : raw) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!word.empty()) {
            if (auto a = check()) return a;
            word.clear();
        }
    }
    if (!word.empty()) return check();
    return std::nullopt;
}

LogicBenchReport run_logic_benchmark(const std::vector<LogicBenchItem>& items, Provider& provider,
                                     double temperature) {
    LogicBenchReport report;
    Counts add_total;
    std::map<std::string, Counts> add_per_label;
    std::map<std::string, Counts> remove_per_label;
    for (auto a : kAnswers) remove_per_label[std::string(a)] = {};

    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& item = items[i];
        const auto& tmpl = item.task == LogicTask::add ? resources::logic_add_prompt
                                                       : resources::logic_remove_prompt;
        std::string raw;
        try {
            raw = provider.complete(resources::render(tmpl, {{"inputs", bullet_list(item.inputs)}}),
                                    temperature);
        } catch (const ProviderError& e) {
            std::cerr << "logic item " << i + 1 << ": provider failed: " << e.what() << '\n';
        }
        if (item.task == LogicTask::add) {
            ++report.add_items;
            auto pred = parse_label_set(raw);
            if (!pred) {
                std::cerr << "logic item " << i + 1 << ": unparseable answer\n";
                ++report.add_unparseable;
                pred.emplace();
            }
            for (const auto& l : *pred) {
                if (item.gold_labels.contains(l)) {
                    ++add_total.tp;
                    ++add_per_label[l].tp;
                } else {
                    ++add_total.fp;
                    ++add_per_label[l].fp;
                }
            }
            for (const auto& l : item.gold_labels) {
                if (!pred->contains(l)) {
                    ++add_total.fn;
                    ++add_per_label[l].fn;
                }
            }
        } else {
            ++report.remove.total;
            const auto answer = parse_yes_no_unsure(raw);
            if (!answer) {
                std::cerr << "logic item " << i + 1 << ": unparseable answer\n";
                ++report.remove.unparseable;
                ++remove_per_label[item.gold_answer].fn;
            } else if (*answer == item.gold_answer) {
                ++report.remove.correct;
                ++remove_per_label[*answer].tp;
            } else {
                ++remove_per_label[*answer].fp;
                ++remove_per_label[item.gold_answer].fn;
            }
        }
    }
    report.add = EvalReport::from_counts(add_total);
    report.add.per_relation = std::move(add_per_label);
    report.remove.accuracy = safe_ratio(static_cast<double>(report.remove.correct),
                                        static_cast<double>(report.remove.total));
    double f1_sum = 0.0;
    for (const auto& [_, c] : remove_per_label) f1_sum += EvalReport::from_counts(c).f1;
    report.remove.f1_macro = report.remove.total == 0 ? 0.0 : f1_sum / kAnswers.size();
    report.remove.per_label = std::move(remove_per_label);
    return report;
}

Json to_json(const LogicBenchReport& r) {
    Json add = to_json(r.add);
    add["items"] = r.add_items;
    add["unparseable"] = r.add_unparseable;
    Json per = Json::object();
    for (const auto& [label, c] : r.remove.per_label) per[label] = to_json(c);
    return Json{{"add", add},
                {"remove",
                 {{"items", r.remove.total},
                  {"correct", r.remove.correct},
                  {"unparseable", r.remove.unparseable},
                  {"accuracy", r.remove.accuracy},
                  {"f1_macro", r.remove.f1_macro},
                  {"per_label", per}}}};
}

} // namespace relgraph
