#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "duplex/runtime/scheduler.hpp"

namespace duplex::pipeline {

inline constexpr const char* kToolResultPrefix = "You may refer to the following content:";

struct ToolResult {
    std::string tool_name;
    std::string content;
};

/// prefix + "\n" + content. Throws std::invalid_argument on empty content.
std::string inject_tool_result(const ToolResult& result, const std::string& prefix = kToolResultPrefix);

/// Prefixed blocks joined by one blank line.
std::string inject_tool_results(std::span<const ToolResult> results, const std::string& prefix = kToolResultPrefix);

struct ToolSpec {
    std::string name;
    std::string pattern;  // ECMAScript regex, matched case-insensitively anywhere in the text
    std::string endpoint;
    std::chrono::milliseconds deadline{1500};
};

using ToolRegistry = std::vector<ToolSpec>;

struct ToolCall {
    std::string name;
    std::string query;
    std::string endpoint;
    std::chrono::milliseconds deadline{1500};
};

/// First registered tool whose pattern matches, if any.
std::optional<ToolCall> decide_tool(const std::string& user_text, const ToolRegistry& registry);

class ToolExecutor {
public:
    virtual ~ToolExecutor() = default;
    /// Completion runs on the scheduler. The caller enforces the deadline.
    virtual void call(const ToolCall& call, std::function<void(std::optional<ToolResult>, std::string error)> done,
                      CancelToken cancel) = 0;
};

}  // namespace duplex::pipeline
