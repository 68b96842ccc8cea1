#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace discern {

/// Files under prompts/ and plans/ compiled into the library, keyed by
/// their path relative to the source tree ("prompts/summarization.coherence.txt").
std::optional<std::string_view> embedded_resource(std::string_view name);

std::vector<std::pair<std::string_view, std::string_view>> embedded_resources();

}  // namespace discern
