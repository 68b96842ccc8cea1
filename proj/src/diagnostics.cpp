#include "discern/diagnostics.hpp"

#include <unordered_set>

namespace discern {

void Diagnostics::warn(std::string_view stage, std::string_view message) {
    std::string line;
    line.reserve(stage.size() + message.size() + 3);
    line.append("[").append(stage).append("] ").append(message);
    std::lock_guard lock(mutex_);
    warnings_.push_back(std::move(line));
}

void Diagnostics::extend(const std::vector<std::string>& formatted) {
    std::lock_guard lock(mutex_);
    warnings_.insert(warnings_.end(), formatted.begin(), formatted.end());
}

std::vector<std::string> Diagnostics::warnings() const {
    std::lock_guard lock(mutex_);
    return warnings_;
}

std::size_t Diagnostics::size() const {
    std::lock_guard lock(mutex_);
    return warnings_.size();
}

std::vector<std::string> dedupe_warnings(const std::vector<std::string>& warnings) {
    std::unordered_set<std::string> seen;
    std::vector<std::string> out;
    for (const auto& w : warnings) {
        if (seen.insert(w).second) out.push_back(w);
    }
    return out;
}

}  // namespace discern
