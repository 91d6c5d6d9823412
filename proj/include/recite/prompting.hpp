#pragma once

#include "recite/core_model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recite::prompting {

/// Separator conventions and model-specific rewriting. The Default dialect
/// separates components within a block by two newlines and blocks by three;
/// UL2 additionally replaces every newline and wraps the prompt in the
/// S-denoiser sentinels.
struct PromptDialect {
    enum class Name { Default, UL2 };

    Name name = Name::Default;
    std::string intra_separator = "\n\n";
    std::string inter_separator = "\n\n\n";
    std::optional<std::string> newline_replacement;
    std::optional<std::string> wrapper_prefix;
    std::optional<std::string> wrapper_suffix;

    static PromptDialect default_dialect() { return {}; }
    static PromptDialect ul2();
    static PromptDialect from_name(std::string_view name);  // "default" | "ul2"

    std::string_view label() const { return name == Name::UL2 ? "ul2" : "default"; }

    /// Rewrites fully assembled prompt text. Identity for Default.
    std::string apply(std::string text) const;

    /// A separator as the model will see it after rewriting. Used for stop
    /// sequences and answer extraction.
    std::string rendered(std::string_view separator) const;
};

// Cue labels. Frozen by the golden prompt files.
inline constexpr std::string_view kQuestionCue = "Question:";
inline constexpr std::string_view kRecitationCue = "Recitation:";
inline constexpr std::string_view kAnswerCue = "Answer:";
inline constexpr std::string_view kHintCue = "Hint:";
inline constexpr std::string_view kPassageCue = "Passage:";
inline constexpr std::string_view kSoTheAnswerIs = "So the answer is";

/// "Recitation 3:" etc.
std::string numbered_recitation_cue(int index);

struct PromptSpec {
    Scheme scheme = Scheme::ReciteAnswer;
    std::vector<Exemplar> exemplars;
    std::string target_question;
    std::vector<std::string> target_recitations;
    int recitations_per_hop = 2;
    PromptDialect dialect;
};

/// Question -> passage hint -> passage demonstrations for diversified recitation.
struct HintExemplar {
    std::string question;
    std::string hint;
    std::string passage;

    bool operator==(const HintExemplar&) const = default;
};

/// Evidence passage -> question demonstrations for synthetic question generation.
struct QuestionGenExemplar {
    std::string evidence;
    std::string question;

    bool operator==(const QuestionGenExemplar&) const = default;
};

/// Few-shot recitation prompt: "Question / Recitation" blocks, ending at a
/// bare recitation cue for the target question.
std::string build_recitation_prompt(const PromptSpec& spec);

/// Recitation-conditioned QA prompt. Each block lists its recitations, then
/// the question, then the answer; the target block ends at "Answer:". With
/// scheme Direct every recitation list must be empty and the blocks reduce to
/// standard "Question / Answer" prompting. MultiHopRecite numbers the
/// recitation cues.
std::string build_qa_prompt(const PromptSpec& spec);

/// Multi-hop recitation prompt with numbered cues; the target block stops at
/// "Recitation 1:" so all recitations come out of a single decoding pass.
std::string build_multihop_prompt(const PromptSpec& spec);

/// Chain-of-thought baseline: question, rationale, "So the answer is X.".
std::string build_cot_prompt(const PromptSpec& spec);

class PassagePromptTemplate {
public:
    PassagePromptTemplate(std::string prefix, PromptDialect dialect)
        : prefix_(std::move(prefix)), dialect_(std::move(dialect)) {}

    /// Prompt eliciting the passage for `hint` via greedy decoding.
    std::string render(std::string_view hint) const;

private:
    std::string prefix_;
    PromptDialect dialect_;
};

struct HintPrompts {
    std::string hint_prompt;
    PassagePromptTemplate passage_prompt;
};

/// Builds the two prompts for diversified recitation. Every exemplar hint must
/// satisfy the passage-hint grammar.
HintPrompts build_hint_prompts(std::string_view question, const std::vector<HintExemplar>& exemplars,
                               const PromptDialect& dialect = {});

std::string build_question_generation_prompt(std::string_view passage,
                                             const std::vector<QuestionGenExemplar>& exemplars,
                                             const PromptDialect& dialect = {});

/// Uniform sample of n exemplars without replacement, then shuffled.
/// Deterministic in `seed`. Throws PromptError when the pool is too small.
template <class T>
std::vector<T> sample_exemplars(const std::vector<T>& pool, std::size_t n, std::uint64_t seed);

/// Indices chosen by sample_exemplars, exposed for frequency checks.
std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t n, std::uint64_t seed);

template <class T>
std::vector<T> sample_exemplars(const std::vector<T>& pool, std::size_t n, std::uint64_t seed) {
    std::vector<T> out;
    out.reserve(n);
    for (auto i : sample_indices(pool.size(), n, seed)) out.push_back(pool[i]);
    return out;
}

}  // namespace recite::prompting
