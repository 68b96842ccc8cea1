#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "discern/corpus.hpp"
#include "discern/perturb.hpp"
#include "discern/templates.hpp"

namespace discern {

class ChatClient;
class Diagnostics;

/// N x R raw scores for one (variant, metric). A hole (nullopt) marks an
/// excluded datapoint or a response that never yielded a score.
struct ScoreMatrix {
    std::string pid;
    std::string metric;
    int scale_min = 1;
    int scale_max = 5;
    std::size_t repeats = 0;
    std::vector<std::string> ids;                               // corpus order
    std::vector<std::vector<std::optional<double>>> values;     // [row][repeat]
    std::vector<std::vector<std::optional<std::string>>> raw;   // reply text; nullopt if never asked

    bool operator==(const ScoreMatrix&) const = default;
};

struct ScoreSet {
    std::string pid;
    std::string metric;
    std::vector<std::string> ids;
    std::vector<std::optional<double>> scores;

    bool operator==(const ScoreSet&) const = default;
};

/// First numeric token of `text` lying in [scale_min, scale_max]. Tokens are
/// digit runs with an optional fractional part; a '-' directly before the
/// digits (and not after another digit) makes the token negative.
/// Throws DataError("NoScoreFound").
double parse_score(std::string_view text, double scale_min, double scale_max);

/// Non-throwing variant of parse_score.
std::optional<double> try_parse_score(std::string_view text, double scale_min, double scale_max);

/// Request tag for repeat `r`; `retry` marks the single re-ask after an
/// unparseable reply.
std::string repeat_tag(std::size_t r, bool retry = false);

/// Scores every non-excluded datapoint of `variant` `repeats` times. The
/// variant text fills the evaluated slot and the datapoint's context fills
/// the rest; the original reference is never shown. Requests fan out across
/// the client's concurrency limit; results are assembled in corpus order.
///
/// Throws DataError("VariantUnusable") when more than 20% of the scored
/// (non-excluded) rows end up with a hole. AuthError propagates; other
/// provider errors become holes with a warning.
ScoreMatrix score_variant(const VariantCorpus& variant, const Corpus& corpus, const PromptTemplate& tmpl,
                          ChatClient& provider, std::size_t repeats, Diagnostics& diag);

/// Row means. A row with any hole averages to a hole.
ScoreSet average_repeats(const ScoreMatrix& m);

/// JSONL: one {"pid","metric","id","repeat","raw_text","score"} record per
/// cell, rows in corpus order, repeats ascending.
void write_score_matrix(const ScoreMatrix& m, std::ostream& out);
ScoreMatrix read_score_matrix(std::istream& in, int scale_min = 1, int scale_max = 5,
                              std::string_view source = "<stream>");

}  // namespace discern
