#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace discern {

enum class TaskKind { summarization, story_completion, question_answering, translation };

std::string_view to_string(TaskKind task);
TaskKind parse_task(std::string_view name);

/// Fixed metric list of a task, in reporting order.
const std::vector<std::string>& metrics_for(TaskKind task);

struct Datapoint {
    std::string id;
    std::string context;
    std::string reference;
    std::optional<std::string> wrong_ending;

    bool operator==(const Datapoint&) const = default;
};

struct Corpus {
    TaskKind task = TaskKind::summarization;
    std::optional<std::pair<std::string, std::string>> language_pair;
    std::vector<Datapoint> datapoints;

    std::size_t size() const { return datapoints.size(); }
    bool operator==(const Corpus&) const = default;
};

struct CorpusStats {
    double avg_chars = 0;
    double avg_words = 0;
    double avg_sentences = 0;
};

/// Throws DataError if any datapoint breaks the task's field rules.
void validate_datapoint(const Datapoint& dp, TaskKind task);

/// Parses the dataset JSONL schema. `source` names the input in messages.
Corpus parse_corpus(std::istream& in, TaskKind task, std::string_view source = "<stream>");
Corpus load_corpus(const std::filesystem::path& path, TaskKind task);

void write_corpus(const Corpus& corpus, std::ostream& out);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Keeps datapoints whose reference has strictly more than `min_chars`
/// grapheme clusters. Applied before subset sampling.
Corpus filter_min_reference_chars(const Corpus& corpus, std::size_t min_chars);

/// Deterministic size-n sample preserving corpus order.
Corpus select_subset(const Corpus& corpus, std::size_t n, std::int64_t seed);

CorpusStats corpus_stats(const Corpus& corpus);

/// For question answering the context holds the question on its first line
/// and the paragraph after it.
std::pair<std::string, std::string> split_question_context(std::string_view context);

}  // namespace discern
