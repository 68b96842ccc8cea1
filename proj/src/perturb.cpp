#include "discern/perturb.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "discern/diagnostics.hpp"
#include "discern/error.hpp"
#include "discern/provider.hpp"
#include "discern/templates.hpp"
#include "discern/text.hpp"

namespace discern {

using json = nlohmann::json;

namespace {

[[noreturn]] void insufficient(const std::string& msg) {
    throw PerturbationError("InsufficientMaterial", "InsufficientMaterial: " + msg);
}

[[noreturn]] void inapplicable(const std::string& msg) {
    throw PerturbationError("Inapplicable", "Inapplicable: " + msg);
}

std::string substitute_random_donor(const Datapoint& dp, const Corpus& corpus, RngStream& rng) {
    const auto n = corpus.size();
    if (n < 2) inapplicable("random substitution needs at least two datapoints");
    const auto self = std::find_if(corpus.datapoints.begin(), corpus.datapoints.end(),
                                   [&](const Datapoint& d) { return d.id == dp.id; });
    if (self == corpus.datapoints.end()) inapplicable("datapoint '" + dp.id + "' not in corpus");
    const auto self_index = static_cast<std::size_t>(self - corpus.datapoints.begin());
    auto donor = static_cast<std::size_t>(rng.uniform_below(n - 1));
    if (donor >= self_index) ++donor;
    return corpus.datapoints[donor].reference;
}

bool is_identity(const std::vector<std::size_t>& perm) {
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] != i) return false;
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Variants

VariantCorpus original_variant(const Corpus& corpus) {
    VariantCorpus v;
    v.pid = std::string(kOriginalPid);
    for (const auto& dp : corpus.datapoints) v.texts.emplace(dp.id, dp.reference);
    return v;
}

void check_variant(const VariantCorpus& variant, const Corpus& corpus) {
    if (variant.texts.size() + variant.excluded.size() != corpus.size()) {
        throw DataError("VariantMismatch", "variant '" + variant.pid + "' does not cover the corpus");
    }
    for (const auto& dp : corpus.datapoints) {
        const bool has_text = variant.texts.count(dp.id) != 0;
        const bool is_excluded = variant.excluded.count(dp.id) != 0;
        if (has_text == is_excluded) {
            throw DataError("VariantMismatch",
                            "variant '" + variant.pid + "' has inconsistent entry for id '" + dp.id + "'");
        }
    }
}

void write_variant(const VariantCorpus& variant, const Corpus& corpus, std::ostream& out) {
    for (const auto& dp : corpus.datapoints) {
        json rec{{"id", dp.id}, {"pid", variant.pid}};
        if (auto it = variant.texts.find(dp.id); it != variant.texts.end()) {
            rec["text"] = it->second;
            rec["excluded"] = false;
        } else {
            rec["text"] = nullptr;
            rec["excluded"] = true;
        }
        out << rec.dump() << '\n';
    }
}

VariantCorpus read_variant(std::istream& in, std::string_view source) {
    VariantCorpus v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto rec = json::parse(line);
            const auto pid = rec.at("pid").get<std::string>();
            if (v.pid.empty()) v.pid = pid;
            if (pid != v.pid) throw DataError("VariantMismatch", "mixed pids in one variant file");
            const auto id = rec.at("id").get<std::string>();
            if (rec.at("excluded").get<bool>()) {
                v.excluded.insert(id);
            } else {
                v.texts.emplace(id, rec.at("text").get<std::string>());
            }
        } catch (const json::exception& e) {
            throw DataError("MalformedLine", std::string(source) + ":" + std::to_string(line_no) +
                                                 ": " + e.what());
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Character level

std::string delete_random_chars(std::string_view text, std::size_t k, RngStream& rng) {
    if (k == 0) return std::string(text);
    const auto clusters = text::graphemes(text);
    std::vector<std::size_t> alnum;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        if (text::is_alnum_cluster(clusters[i])) alnum.push_back(i);
    }
    if (alnum.size() < k) {
        insufficient("need " + std::to_string(k) + " alphanumeric characters, have " +
                     std::to_string(alnum.size()));
    }
    std::vector<bool> drop(clusters.size(), false);
    for (auto j : rng.sample_distinct(alnum.size(), k)) drop[alnum[j]] = true;
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        if (!drop[i]) out += clusters[i];
    }
    return out;
}

std::string_view qwerty_neighbours(char lower) {
    static const std::unordered_map<char, std::string_view> map{
        {'q', "wa"},   {'w', "qeas"},   {'e', "wrsd"},  {'r', "etdf"},   {'t', "ryfg"},
        {'y', "tugh"}, {'u', "yihj"},   {'i', "uojk"},  {'o', "ipkl"},   {'p', "ol"},
        {'a', "qwsz"}, {'s', "weadzx"}, {'d', "erfsxc"}, {'f', "rtdgcv"}, {'g', "tyfhvb"},
        {'h', "yugjbn"}, {'j', "uihknm"}, {'k', "iojlm"}, {'l', "opk"},  {'z', "asx"},
        {'x', "zsdc"}, {'c', "xdfv"},   {'v', "cfgb"},  {'b', "vghn"},   {'n', "bhjm"},
        {'m', "njk"}};
    auto it = map.find(lower);
    return it == map.end() ? std::string_view{} : it->second;
}

std::string apply_typo_edits(std::string_view text, const std::vector<TypoEdit>& edits) {
    const auto clusters = text::graphemes(text);
    std::unordered_map<std::size_t, const TypoEdit*> at;
    for (const auto& e : edits) {
        if (e.cluster >= clusters.size()) insufficient("typo position out of range");
        if (!at.emplace(e.cluster, &e).second) insufficient("typo positions must be distinct");
    }
    std::string out;
    out.reserve(text.size() + edits.size() * 4);
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        auto it = at.find(i);
        if (it == at.end()) {
            out += clusters[i];
            continue;
        }
        switch (it->second->event) {
            case TypoEvent::substitution: out += it->second->replacement; break;
            case TypoEvent::duplication: out += clusters[i] + clusters[i]; break;
            case TypoEvent::deletion: break;
            case TypoEvent::transposition:
                if (i + 1 >= clusters.size()) insufficient("transposition at the last character");
                out += clusters[i + 1];
                out += clusters[i];
                ++i;
                break;
        }
    }
    return out;
}

std::string inject_typos(std::string_view text, std::size_t k, RngStream& rng) {
    if (k == 0) return std::string(text);
    const auto clusters = text::graphemes(text);
    std::vector<std::size_t> letters;
    std::vector<bool> is_letter(clusters.size(), false);
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        if (text::is_letter_cluster(clusters[i])) {
            letters.push_back(i);
            is_letter[i] = true;
        }
    }
    if (letters.size() < k) {
        insufficient("need " + std::to_string(k) + " letters, have " + std::to_string(letters.size()));
    }

    std::vector<std::size_t> positions;
    for (auto j : rng.sample_distinct(letters.size(), k)) positions.push_back(letters[j]);
    const std::unordered_set<std::size_t> selected(positions.begin(), positions.end());

    std::vector<TypoEdit> edits;
    edits.reserve(k);
    for (auto pos : positions) {
        const auto& c = clusters[pos];
        const bool ascii = c.size() == 1 && std::isalpha(static_cast<unsigned char>(c[0]));
        const auto neighbours =
            ascii ? qwerty_neighbours(static_cast<char>(std::tolower(static_cast<unsigned char>(c[0]))))
                  : std::string_view{};

        std::vector<TypoEvent> applicable;
        if (!neighbours.empty()) applicable.push_back(TypoEvent::substitution);
        if (pos + 1 < clusters.size() && is_letter[pos + 1] && !selected.count(pos + 1) &&
            clusters[pos + 1] != c) {
            applicable.push_back(TypoEvent::transposition);
        }
        applicable.push_back(TypoEvent::duplication);
        applicable.push_back(TypoEvent::deletion);

        TypoEdit edit{pos, applicable[rng.uniform_below(applicable.size())], {}};
        if (edit.event == TypoEvent::substitution) {
            char repl = neighbours[rng.uniform_below(neighbours.size())];
            if (std::isupper(static_cast<unsigned char>(c[0]))) {
                repl = static_cast<char>(std::toupper(static_cast<unsigned char>(repl)));
            }
            edit.replacement = std::string(1, repl);
        }
        edits.push_back(std::move(edit));
    }
    return apply_typo_edits(text, edits);
}

// ---------------------------------------------------------------------------
// Word level

std::string delete_word_span(std::string_view text, std::size_t k, RngStream& rng) {
    if (k == 0) return std::string(text);
    auto words = text::tokenize_words(text);
    if (words.size() <= k) {
        insufficient("need more than " + std::to_string(k) + " words, have " +
                     std::to_string(words.size()));
    }
    const auto start = static_cast<std::size_t>(rng.uniform_below(words.size() - k + 1));
    words.erase(words.begin() + static_cast<std::ptrdiff_t>(start),
                words.begin() + static_cast<std::ptrdiff_t>(start + k));
    return text::join(words);
}

// ---------------------------------------------------------------------------
// Sentence level

std::string permute_sentences(const std::vector<std::string>& sentences,
                              const std::vector<std::size_t>& positions,
                              const std::vector<std::size_t>& perm) {
    auto out = sentences;
    for (std::size_t j = 0; j < positions.size(); ++j) {
        out[positions[j]] = sentences[positions[perm[j]]];
    }
    return text::join(out);
}

std::string shuffle_sentences(std::string_view text, Magnitude k, RngStream& rng) {
    const auto sentences = text::split_sentences(text);
    const auto m = sentences.size();
    if (m < 2) inapplicable("reordering needs at least two sentences, have " + std::to_string(m));
    const std::size_t count = k.all ? m : k.count;
    if (count < 2 || count > m) {
        inapplicable("cannot reorder " + std::to_string(count) + " of " + std::to_string(m) +
                     " sentences");
    }
    auto positions = rng.sample_distinct(m, count);
    std::sort(positions.begin(), positions.end());
    std::vector<std::size_t> perm;
    do {
        perm = rng.permutation(count);
    } while (is_identity(perm));
    return permute_sentences(sentences, positions, perm);
}

std::string substitute_ending_random(const Datapoint& dp, const Corpus& corpus, RngStream& rng) {
    return substitute_random_donor(dp, corpus, rng);
}

std::string substitute_ending_wrong(const Datapoint& dp) {
    if (!dp.wrong_ending) {
        throw PerturbationError("MissingField", "MissingField(wrong_ending) for id '" + dp.id + "'");
    }
    return *dp.wrong_ending;
}

std::string substitute_answer_random(const Datapoint& dp, const Corpus& corpus, RngStream& rng) {
    return substitute_random_donor(dp, corpus, rng);
}

// ---------------------------------------------------------------------------
// LLM-based

std::string clean_llm_output(std::string_view raw) {
    auto trim = [](std::string_view s) {
        const auto* ws = " \t\r\n";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string_view::npos) return std::string_view{};
        return s.substr(b, s.find_last_not_of(ws) - b + 1);
    };
    auto s = trim(raw);
    // Label such as "Revised Summary:" on its own or in front of the text.
    if (s.size() >= 8 && std::equal(s.begin(), s.begin() + 7, "Revised", [](char a, char b) {
            return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
        const auto colon = s.find(':');
        const auto nl = s.find('\n');
        if (colon != std::string_view::npos && (nl == std::string_view::npos || colon < nl)) {
            s = trim(s.substr(colon + 1));
        }
    }
    const std::pair<std::string_view, std::string_view> quotes[] = {
        {"\"", "\""}, {"'", "'"}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}};
    for (const auto& [open, close] : quotes) {
        if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
            s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
            break;
        }
    }
    return std::string(s);
}

std::string llm_perturb(std::string_view text, const PerturbationSpec& spec,
                        const PromptTemplate& tmpl, ChatClient& provider,
                        const std::map<std::string, std::string>& fields, std::string_view item_id) {
    const auto prompt = render_prompt(tmpl, fields);
    ChatRequest req;
    req.model = provider.config().model;
    req.user = prompt;
    req.temperature = 0.0;
    const std::string base_tag = "perturb|" + spec.pid + "|" + std::string(item_id);
    for (int attempt = 0; attempt < 2; ++attempt) {
        req.tag = attempt == 0 ? base_tag : base_tag + "|retry=1";
        std::string revised;
        try {
            revised = clean_llm_output(provider.complete(req).text);
        } catch (const AuthError&) {
            throw;
        } catch (const ProviderError& e) {
            throw PerturbationError("ProviderFailure", std::string("ProviderFailure: ") + e.what());
        }
        if (!revised.empty() && revised != text) return revised;
    }
    throw PerturbationError("NoChangeProduced", "NoChangeProduced: provider returned no revision");
}

// ---------------------------------------------------------------------------
// Plans

namespace {

std::string apply_rule(const PerturbationSpec& spec, const Datapoint& dp, const Corpus& corpus,
                       RngStream& rng) {
    const auto& text = dp.reference;
    const std::size_t k = spec.k ? spec.k->count : 0;
    switch (spec.kind) {
        case PerturbKind::delete_chars: return delete_random_chars(text, k, rng);
        case PerturbKind::typos: return inject_typos(text, k, rng);
        case PerturbKind::delete_word_span: return delete_word_span(text, k, rng);
        case PerturbKind::shuffle_sentences: return shuffle_sentences(text, *spec.k, rng);
        case PerturbKind::random_ending: return substitute_ending_random(dp, corpus, rng);
        case PerturbKind::wrong_ending: return substitute_ending_wrong(dp);
        case PerturbKind::random_answer: return substitute_answer_random(dp, corpus, rng);
        default: break;
    }
    throw ConfigError("kind " + std::string(to_string(spec.kind)) + " is not rule-based", "InvalidPlan");
}

}  // namespace

std::vector<VariantCorpus> apply_plan(const Corpus& corpus, const PerturbationPlan& plan,
                                      std::int64_t seed, ChatClient* provider,
                                      const TemplateStore& templates, Diagnostics& diag) {
    if (plan.task != corpus.task) {
        throw ConfigError("plan task " + std::string(to_string(plan.task)) + " does not match corpus task " +
                              std::string(to_string(corpus.task)),
                          "PlanTaskMismatch");
    }
    validate_plan(plan, &templates);
    const bool has_llm = std::any_of(plan.specs.begin(), plan.specs.end(),
                                     [](const auto& s) { return s.method == Method::llm; });
    if (has_llm && !provider) {
        throw ConfigError("plan contains llm specs but no perturbation provider is configured",
                          "ProviderMissing");
    }

    std::vector<VariantCorpus> variants;
    variants.reserve(plan.specs.size() + 1);
    variants.push_back(original_variant(corpus));

    const auto n = corpus.size();
    for (const auto& spec : plan.specs) {
        // Per-datapoint outcome; exactly one of text/error is set.
        std::vector<std::optional<std::string>> texts(n);
        std::vector<std::string> errors(n);

        auto run_one = [&](std::size_t i) {
            const auto& dp = corpus.datapoints[i];
            try {
                std::string out;
                if (spec.method == Method::rule) {
                    auto rng = RngStream::for_item(seed, spec.pid, dp.id);
                    out = apply_rule(spec, dp, corpus, rng);
                } else {
                    const auto& tmpl = templates.get(*spec.template_id);
                    out = llm_perturb(dp.reference, spec, tmpl, *provider,
                                      prompt_fields(corpus.task, dp, dp.reference), dp.id);
                }
                if (out == dp.reference) {
                    throw PerturbationError("NoChangeProduced",
                                            "NoChangeProduced: perturbed text equals the original");
                }
                texts[i] = std::move(out);
            } catch (const PerturbationError& e) {
                errors[i] = e.what();
            }
        };

        if (spec.method == Method::llm) {
            parallel_for(n, provider->config().max_concurrency, run_one);
        } else {
            for (std::size_t i = 0; i < n; ++i) run_one(i);
        }

        VariantCorpus v;
        v.pid = spec.pid;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& id = corpus.datapoints[i].id;
            if (texts[i]) {
                v.texts.emplace(id, std::move(*texts[i]));
            } else {
                v.excluded.insert(id);
                diag.warn("perturb", spec.pid + "/" + id + " excluded: " + errors[i]);
            }
        }
        variants.push_back(std::move(v));
    }
    return variants;
}

}  // namespace discern
