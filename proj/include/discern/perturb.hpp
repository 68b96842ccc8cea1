#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "discern/corpus.hpp"
#include "discern/rng.hpp"

namespace discern {

class ChatClient;
class Diagnostics;
class TemplateStore;
struct PromptTemplate;

enum class Level { character, word, sentence };
enum class Method { rule, llm };
enum class Degree { minor, major, none };
enum class PerturbKind {
    delete_chars,
    typos,
    delete_word_span,
    shuffle_sentences,
    random_ending,
    wrong_ending,
    random_answer,
    fictional_entities,
    grammatical_errors,
    rewrite_insert,
};

std::string_view to_string(Level v);
std::string_view to_string(Method v);
std::string_view to_string(Degree v);
std::string_view to_string(PerturbKind v);
Level parse_level(std::string_view s);
Method parse_method(std::string_view s);
Degree parse_degree(std::string_view s);
PerturbKind parse_kind(std::string_view s);

bool is_rule_kind(PerturbKind kind);

/// Perturbation magnitude: a count, or every sentence ("all").
struct Magnitude {
    std::size_t count = 0;
    bool all = false;

    static Magnitude every() { return {0, true}; }
    bool operator==(const Magnitude&) const = default;
};

struct PerturbationSpec {
    std::string pid;
    Level level = Level::character;
    Method method = Method::rule;
    Degree degree = Degree::none;
    PerturbKind kind = PerturbKind::delete_chars;
    std::optional<Magnitude> k;
    std::optional<std::string> template_id;

    bool operator==(const PerturbationSpec&) const = default;
};

struct PerturbationPlan {
    TaskKind task = TaskKind::summarization;
    std::vector<PerturbationSpec> specs;

    bool operator==(const PerturbationPlan&) const = default;
};

/// Whether the task defines no minor/major split for this kind.
bool degree_none_allowed(TaskKind task, PerturbKind kind);

void validate_spec(const PerturbationSpec& spec, TaskKind task);
/// Also checks template ids against `templates` when given.
void validate_plan(const PerturbationPlan& plan, const TemplateStore* templates = nullptr);

PerturbationPlan plan_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const PerturbationPlan& plan);
PerturbationPlan load_plan(const std::filesystem::path& path);

/// Built-in plans: summeval, sumpubmed, storycloze, answer_eq, wmt22_de_en, wmt22_zh_en.
std::vector<std::string> builtin_plan_names();
PerturbationPlan builtin_plan(std::string_view name);

/// Resolves a built-in name or a plan file path.
PerturbationPlan resolve_plan(std::string_view name_or_path,
                              const std::filesystem::path& base_dir = {});

inline constexpr std::string_view kOriginalPid = "original";

struct VariantCorpus {
    std::string pid;
    std::map<std::string, std::string> texts;
    std::set<std::string> excluded;

    bool operator==(const VariantCorpus&) const = default;
};

/// Original references, nothing excluded.
VariantCorpus original_variant(const Corpus& corpus);

/// Throws DataError unless texts and excluded partition the corpus ids.
void check_variant(const VariantCorpus& variant, const Corpus& corpus);

/// JSONL records {"id","pid","text","excluded"} in corpus order.
void write_variant(const VariantCorpus& variant, const Corpus& corpus, std::ostream& out);
VariantCorpus read_variant(std::istream& in, std::string_view source = "<stream>");

// Rule-based transforms. Each is a pure function of its inputs and throws
// PerturbationError ("InsufficientMaterial" / "Inapplicable" / "MissingField")
// when the datapoint cannot be perturbed.

std::string delete_random_chars(std::string_view text, std::size_t k, RngStream& rng);

enum class TypoEvent { substitution, transposition, duplication, deletion };

struct TypoEdit {
    std::size_t cluster = 0;  // grapheme index in the input
    TypoEvent event = TypoEvent::duplication;
    std::string replacement;  // substitution only
};

/// QWERTY neighbours of a lowercase ASCII letter; empty for other input.
std::string_view qwerty_neighbours(char lower);

/// Applies edits at distinct cluster positions. A transposition swaps the
/// cluster with its right neighbour.
std::string apply_typo_edits(std::string_view text, const std::vector<TypoEdit>& edits);

std::string inject_typos(std::string_view text, std::size_t k, RngStream& rng);

std::string delete_word_span(std::string_view text, std::size_t k, RngStream& rng);

/// Places sentences[positions[perm[j]]] at positions[j]; joins with spaces.
std::string permute_sentences(const std::vector<std::string>& sentences,
                              const std::vector<std::size_t>& positions,
                              const std::vector<std::size_t>& perm);

std::string shuffle_sentences(std::string_view text, Magnitude k, RngStream& rng);

std::string substitute_ending_random(const Datapoint& dp, const Corpus& corpus, RngStream& rng);
std::string substitute_ending_wrong(const Datapoint& dp);
std::string substitute_answer_random(const Datapoint& dp, const Corpus& corpus, RngStream& rng);

/// Trims the reply and strips a leading "Revised ...:" label and
/// surrounding quotes.
std::string clean_llm_output(std::string_view raw);

/// Prompt-driven perturbation. `fields` supplies every placeholder of the
/// template (the text under revision sits in the evaluated slot); `item_id`
/// goes into the request tag. An empty or unchanged reply is re-requested
/// once; then NoChangeProduced. Provider errors become ProviderFailure.
std::string llm_perturb(std::string_view text, const PerturbationSpec& spec,
                        const PromptTemplate& tmpl, ChatClient& provider,
                        const std::map<std::string, std::string>& fields,
                        std::string_view item_id);

/// Produces the original variant followed by one variant per spec, in plan
/// order. Per-datapoint failures become exclusions with a warning.
std::vector<VariantCorpus> apply_plan(const Corpus& corpus, const PerturbationPlan& plan,
                                      std::int64_t seed, ChatClient* provider,
                                      const TemplateStore& templates, Diagnostics& diag);

}  // namespace discern
