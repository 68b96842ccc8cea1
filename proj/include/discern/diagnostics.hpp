#pragma once

#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace discern {

/// Thread-safe warning sink shared by all pipeline stages.
class Diagnostics {
public:
    void warn(std::string_view stage, std::string_view message);

    /// Appends already formatted warnings (e.g. loaded from a stage artifact).
    void extend(const std::vector<std::string>& formatted);

    std::vector<std::string> warnings() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> warnings_;
};

/// Removes repeated entries, keeping the first occurrence of each.
std::vector<std::string> dedupe_warnings(const std::vector<std::string>& warnings);

}  // namespace discern
