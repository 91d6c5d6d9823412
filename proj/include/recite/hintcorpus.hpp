#pragma once

#include "recite/core_model.hpp"
#include "recite/prompting.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace recite::backend {
class Backend;
}

namespace recite::hintcorpus {

inline constexpr std::string_view kHintDelimiter = " --- ";
inline constexpr std::string_view kParagraphPrefix = "Paragraph #";

struct HintParts {
    std::string page_title;
    std::vector<std::string> section_path;
    int para_index = 1;

    bool operator==(const HintParts&) const = default;
};

/// "Page --- Section --- Subsection --- Paragraph #N". Throws DataError for an
/// empty title, an empty component, a component containing the delimiter or
/// a newline, or para_index < 1.
std::string make_hint(std::string_view page_title, const std::vector<std::string>& section_path,
                      int para_index);

/// Inverse of make_hint. Throws ParseError with the byte position of the
/// grammar violation.
HintParts parse_hint(std::string_view hint);

struct HintedPassage {
    std::string page_title;
    std::vector<std::string> section_path;
    int para_index = 1;
    std::string text;
    std::string hint;

    bool operator==(const HintedPassage&) const = default;
};

struct SyntheticTriple {
    std::string question;
    std::string hint;
    std::string passage;

    bool operator==(const SyntheticTriple&) const = default;
};

/// A document section as it arrives from a dump: the ancestor section titles
/// (empty for the lead) and the raw section text. Paragraphs are the blocks
/// separated by blank lines, whitespace-normalized.
struct DumpSection {
    std::vector<std::string> path;
    std::string text;
};

struct DumpDocument {
    std::string title;
    std::vector<DumpSection> sections;
};

/// Splits section text into paragraphs: blank-line separated blocks with
/// internal whitespace collapsed; empty blocks dropped.
std::vector<std::string> split_paragraphs(std::string_view text);

/// Native dump format: one JSON object per line,
/// {"title": "...", "sections": [{"path": [...], "text": "..."}]}.
/// Errors name the 1-based line number.
std::vector<DumpDocument> read_jsonl_dump(std::istream& in);

/// Adapter for heading-markup text ("= Title =", "== Section ==",
/// "=== Subsection ===" on their own lines), as produced by common wiki
/// plain-text extractors. A new level-1 heading starts a new document.
std::vector<DumpDocument> read_markup_dump(std::istream& in);

/// Immutable passage store with id and hint lookup.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<HintedPassage> passages);  // throws DataError on duplicate hints

    std::size_t size() const { return passages_.size(); }
    const std::vector<HintedPassage>& passages() const { return passages_; }
    const HintedPassage& at(std::size_t id) const { return passages_.at(id); }
    std::optional<std::size_t> find_hint(std::string_view hint) const;

    /// n distinct passage ids, uniform without replacement, deterministic in seed.
    std::vector<std::size_t> sample(std::size_t n, std::uint64_t seed) const;

    /// Writes passages.jsonl and hints.idx (byte offset, tab, hint per line).
    void save(const std::string& dir) const;
    static Corpus load(const std::string& dir);

private:
    std::vector<HintedPassage> passages_;
    std::unordered_map<std::string, std::size_t> by_hint_;
};

/// One HintedPassage per paragraph, para_index counting from 1 within each
/// section. Throws DataError naming the colliding hint on duplicates.
Corpus build_corpus(const std::vector<DumpDocument>& docs);

struct SyntheticResult {
    std::vector<SyntheticTriple> triples;
    std::size_t dropped_empty = 0;
    std::size_t backend_failures = 0;
};

inline constexpr std::size_t kQuestionGenShots = 5;

/// Samples n passages (seeded), generates one question per passage with the
/// five-shot question-generation prompt, and pairs it with the passage's hint
/// and text. Empty generations and per-item backend failures are counted
/// and dropped.
SyntheticResult generate_synthetic_triples(const Corpus& corpus, std::size_t n,
                                           const std::vector<prompting::QuestionGenExemplar>& exemplars,
                                           backend::Backend& backend, std::uint64_t seed,
                                           const SamplingParams& params = SamplingParams::greedy(64),
                                           const prompting::PromptDialect& dialect = {},
                                           std::size_t max_in_flight = 8);

}  // namespace recite::hintcorpus

namespace recite {
std::string serialize(const hintcorpus::HintedPassage& p);
std::string serialize(const hintcorpus::SyntheticTriple& t);
template <> hintcorpus::HintedPassage deserialize<hintcorpus::HintedPassage>(std::string_view line);
template <> hintcorpus::SyntheticTriple deserialize<hintcorpus::SyntheticTriple>(std::string_view line);
}  // namespace recite
