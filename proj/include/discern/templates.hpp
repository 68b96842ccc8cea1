#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "discern/corpus.hpp"

namespace discern {

/// Placeholder tokens a template may reference.
const std::vector<std::string>& placeholder_registry();

struct PromptTemplate {
    std::string template_id;
    std::string body;
    /// Metric for evaluation templates; empty for perturbation templates.
    std::string metric;
    int scale_min = 1;
    int scale_max = 5;

    /// Registry placeholders that occur in the body, in first-use order.
    std::vector<std::string> placeholders() const;
};

/// Throws ConfigError unless scale_min < scale_max, the body has at least
/// one placeholder, and every *_HERE token in it is registered.
void validate_template(const PromptTemplate& tmpl);

/// Substitutes every placeholder in one pass (inserted text is not rescanned).
/// Throws MissingPlaceholder when a used placeholder has no value.
std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& fields);

/// Placeholder values for a datapoint, with `evaluated` in the evaluated slot
/// (SUMMARY_HERE / ENDING_HERE / ANSWER_HERE / TRANSLATION_HERE) and the
/// datapoint context in the context slots.
std::map<std::string, std::string> prompt_fields(TaskKind task, const Datapoint& dp,
                                                 std::string_view evaluated);

/// The placeholder holding the evaluated text for a task.
std::string_view evaluated_slot(TaskKind task);

/// Evaluation templates are keyed "{task}.{metric}", perturbation templates
/// "perturb.{task}.{kind}.{degree}". Bodies come from the built-in set or
/// from `<dir>/<template_id>.txt`.
class TemplateStore {
public:
    static TemplateStore builtin();
    static TemplateStore from_directory(const std::filesystem::path& dir);

    const PromptTemplate& get(const std::string& template_id) const;
    const PromptTemplate& evaluation(TaskKind task, const std::string& metric) const;
    bool contains(const std::string& template_id) const;
    std::vector<std::string> ids() const;

    /// SHA-256 over all ids and bodies; part of the scoring stage key.
    std::string fingerprint() const;

    void add(PromptTemplate tmpl);

private:
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace discern
