#include "discern/text.hpp"

#include <algorithm>
#include <memory>

#include <unicode/brkiter.h>
#include <unicode/uchar.h>
#include <unicode/utext.h>
#include <unicode/utf8.h>

#include "discern/error.hpp"

namespace discern::text {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_opening(char c) { return c == '(' || c == '[' || c == '{' || c == '"' || c == '\''; }

bool guarded(std::string_view word) {
    while (!word.empty() && is_opening(word.front())) word.remove_prefix(1);
    const auto& guard = abbreviation_guard();
    return std::find(guard.begin(), guard.end(), word) != guard.end();
}

UChar32 first_code_point(std::string_view cluster) {
    if (cluster.empty()) return U_SENTINEL;
    int32_t i = 0;
    UChar32 c = 0;
    const auto* bytes = reinterpret_cast<const uint8_t*>(cluster.data());
    U8_NEXT(bytes, i, static_cast<int32_t>(cluster.size()), c);
    return c;
}

std::unique_ptr<icu::BreakIterator> make_character_iterator() {
    UErrorCode status = U_ZERO_ERROR;
    std::unique_ptr<icu::BreakIterator> it(
        icu::BreakIterator::createCharacterInstance(icu::Locale::getRoot(), status));
    if (U_FAILURE(status) || !it) {
        throw DataError("IcuFailure", std::string("cannot create grapheme iterator: ") +
                                          u_errorName(status));
    }
    return it;
}

}  // namespace

const std::vector<std::string>& abbreviation_guard() {
    static const std::vector<std::string> guard{"Dr.", "Mr.", "Mrs.", "Ms.",  "St.", "e.g.",
                                                "i.e.", "etc.", "vs.", "Fig.", "No."};
    return guard;
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> tokenize_words(std::string_view s) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        const std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        if (i > start) words.emplace_back(s.substr(start, i - start));
    }
    return words;
}

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> sentences;
    std::string current;
    for (const auto& word : tokenize_words(s)) {
        if (!current.empty()) current.push_back(' ');
        current += word;
        if (is_terminator(word.back()) && !guarded(word)) {
            sentences.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) sentences.push_back(std::move(current));
    return sentences;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.append(sep);
        out += parts[i];
    }
    return out;
}

std::vector<std::string> graphemes(std::string_view utf8) {
    std::vector<std::string> clusters;
    if (utf8.empty()) return clusters;

    thread_local std::unique_ptr<icu::BreakIterator> iter = make_character_iterator();

    UErrorCode status = U_ZERO_ERROR;
    UText* ut = utext_openUTF8(nullptr, utf8.data(), static_cast<int64_t>(utf8.size()), &status);
    if (U_FAILURE(status)) {
        throw DataError("IcuFailure", std::string("cannot open text: ") + u_errorName(status));
    }
    iter->setText(ut, status);
    if (U_FAILURE(status)) {
        utext_close(ut);
        throw DataError("IcuFailure", std::string("cannot segment text: ") + u_errorName(status));
    }
    // With a UTF-8 UText the iterator reports native (byte) offsets.
    int32_t start = iter->first();
    for (int32_t end = iter->next(); end != icu::BreakIterator::DONE; end = iter->next()) {
        clusters.emplace_back(utf8.substr(static_cast<std::size_t>(start),
                                          static_cast<std::size_t>(end - start)));
        start = end;
    }
    // The iterator still points at `utf8`; it is re-targeted on the next call.
    utext_close(ut);
    return clusters;
}

bool is_alnum_cluster(std::string_view cluster) {
    const UChar32 c = first_code_point(cluster);
    return c >= 0 && (u_isalpha(c) || u_isdigit(c));
}

bool is_letter_cluster(std::string_view cluster) {
    const UChar32 c = first_code_point(cluster);
    return c >= 0 && u_isalpha(c);
}

std::size_t count_graphemes(std::string_view utf8) { return graphemes(utf8).size(); }

}  // namespace discern::text
