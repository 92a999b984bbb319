#include "duplex/pipeline/tools.hpp"

#include <regex>
#include <stdexcept>

namespace duplex::pipeline {

std::string inject_tool_result(const ToolResult& result, const std::string& prefix) {
    if (result.content.empty()) throw std::invalid_argument("tool result '" + result.tool_name + "' has no content");
    return prefix + "\n" + result.content;
}

std::string inject_tool_results(std::span<const ToolResult> results, const std::string& prefix) {
    std::string out;
    for (const auto& r : results) {
        if (!out.empty()) out += "\n\n";
        out += inject_tool_result(r, prefix);
    }
    return out;
}

std::optional<ToolCall> decide_tool(const std::string& user_text, const ToolRegistry& registry) {
    for (const auto& spec : registry) {
        const std::regex re(spec.pattern, std::regex::ECMAScript | std::regex::icase);
        if (std::regex_search(user_text, re)) return ToolCall{spec.name, user_text, spec.endpoint, spec.deadline};
    }
    return std::nullopt;
}

}  // namespace duplex::pipeline
