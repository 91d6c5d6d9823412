#include "recite/prompting.hpp"

#include "recite/errors.hpp"
#include "recite/hintcorpus.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace recite::prompting {

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (true) {
        auto hit = s.find(from, pos);
        if (hit == std::string::npos) break;
        out.append(s, pos, hit - pos);
        out.append(to);
        pos = hit + from.size();
    }
    out.append(s, pos, std::string::npos);
    return out;
}

// Rejects text that would be re-split by the separators, or that is empty.
void check_text(std::string_view text, std::string_view what, const PromptDialect& d) {
    if (text.empty()) throw PromptError(std::string(what) + " is empty");
    if (text.find(d.intra_separator) != std::string_view::npos ||
        text.find(d.inter_separator) != std::string_view::npos) {
        throw PromptError(std::string(what) + " contains a prompt separator");
    }
}

std::string labeled(std::string_view cue, std::string_view text) {
    std::string out(cue);
    out.push_back(' ');
    out.append(text);
    return out;
}

// Components joined by the intra separator make a block; blocks are each
// followed by the inter separator; the target block comes last, unterminated.
class Assembler {
public:
    explicit Assembler(const PromptDialect& d) : d_(d) {}

    void component(std::string text) { block_.push_back(std::move(text)); }

    void end_exemplar() {
        flush();
        out_.append(d_.inter_separator);
    }

    std::string finish() {
        flush();
        return d_.apply(std::move(out_));
    }

private:
    void flush() {
        for (std::size_t i = 0; i < block_.size(); ++i) {
            if (i > 0) out_.append(d_.intra_separator);
            out_.append(block_[i]);
        }
        block_.clear();
    }

    const PromptDialect& d_;
    std::vector<std::string> block_;
    std::string out_;
};

void recitation_components(Assembler& a, const std::vector<std::string>& recitations, bool numbered,
                           const PromptDialect& d) {
    for (std::size_t i = 0; i < recitations.size(); ++i) {
        check_text(recitations[i], "recitation", d);
        auto cue = numbered ? numbered_recitation_cue(static_cast<int>(i + 1)) : std::string(kRecitationCue);
        a.component(labeled(cue, recitations[i]));
    }
}

}  // namespace

PromptDialect PromptDialect::ul2() {
    PromptDialect d;
    d.name = Name::UL2;
    d.newline_replacement = " ; ";
    d.wrapper_prefix = "[NLG]";
    d.wrapper_suffix = "[extra_id_0]";
    return d;
}

PromptDialect PromptDialect::from_name(std::string_view name) {
    if (name == "default") return default_dialect();
    if (name == "ul2" || name == "UL2") return ul2();
    throw ConfigError("unknown prompt dialect '" + std::string(name) + "'");
}

std::string PromptDialect::apply(std::string text) const {
    if (newline_replacement) text = replace_all(std::move(text), "\n", *newline_replacement);
    if (wrapper_prefix) text.insert(0, *wrapper_prefix);
    if (wrapper_suffix) text.append(*wrapper_suffix);
    return text;
}

std::string PromptDialect::rendered(std::string_view separator) const {
    std::string s(separator);
    if (newline_replacement) s = replace_all(std::move(s), "\n", *newline_replacement);
    return s;
}

std::string numbered_recitation_cue(int index) { return "Recitation " + std::to_string(index) + ":"; }

std::string build_recitation_prompt(const PromptSpec& spec) {
    if (spec.scheme != Scheme::ReciteAnswer && spec.scheme != Scheme::DiversifiedRecite) {
        throw PromptError("recitation prompt requires a single-hop recitation scheme");
    }
    const auto& d = spec.dialect;
    Assembler a(d);
    for (const auto& ex : spec.exemplars) {
        if (ex.recitations.size() != 1) {
            throw PromptError("recitation exemplar '" + ex.question + "' must carry exactly one recitation");
        }
        check_text(ex.question, "exemplar question", d);
        check_text(ex.recitations.front(), "exemplar recitation", d);
        a.component(labeled(kQuestionCue, ex.question));
        a.component(labeled(kRecitationCue, ex.recitations.front()));
        a.end_exemplar();
    }
    check_text(spec.target_question, "target question", d);
    a.component(labeled(kQuestionCue, spec.target_question));
    a.component(std::string(kRecitationCue));
    return a.finish();
}

std::string build_qa_prompt(const PromptSpec& spec) {
    const auto& d = spec.dialect;
    const bool direct = spec.scheme == Scheme::Direct;
    const bool numbered = spec.scheme == Scheme::MultiHopRecite;
    if (spec.scheme == Scheme::ChainOfThought) throw PromptError("use build_cot_prompt for chain-of-thought");
    if (direct && !spec.target_recitations.empty()) throw PromptError("direct prompt cannot carry recitations");
    if (!direct && spec.target_recitations.empty()) throw PromptError("target_recitations is empty");
    if (numbered && static_cast<int>(spec.target_recitations.size()) != spec.recitations_per_hop) {
        throw PromptError("multi-hop target must carry recitations_per_hop recitations");
    }
    Assembler a(d);
    for (const auto& ex : spec.exemplars) {
        if (direct != ex.recitations.empty()) {
            throw PromptError(direct ? "direct exemplar '" + ex.question + "' carries recitations"
                                     : "QA exemplar '" + ex.question + "' lacks recitations");
        }
        if (numbered && static_cast<int>(ex.recitations.size()) != spec.recitations_per_hop) {
            throw PromptError("multi-hop exemplar '" + ex.question + "' has the wrong recitation count");
        }
        recitation_components(a, ex.recitations, numbered, d);
        check_text(ex.question, "exemplar question", d);
        check_text(ex.answer, "exemplar answer", d);
        a.component(labeled(kQuestionCue, ex.question));
        a.component(labeled(kAnswerCue, ex.answer));
        a.end_exemplar();
    }
    recitation_components(a, spec.target_recitations, numbered, d);
    check_text(spec.target_question, "target question", d);
    a.component(labeled(kQuestionCue, spec.target_question));
    a.component(std::string(kAnswerCue));
    return a.finish();
}

std::string build_multihop_prompt(const PromptSpec& spec) {
    if (spec.scheme != Scheme::MultiHopRecite) throw PromptError("multi-hop prompt requires MultiHopRecite");
    if (spec.recitations_per_hop < 2) throw PromptError("recitations_per_hop must be >= 2");
    const auto& d = spec.dialect;
    Assembler a(d);
    for (const auto& ex : spec.exemplars) {
        if (static_cast<int>(ex.recitations.size()) != spec.recitations_per_hop) {
            throw PromptError("multi-hop exemplar '" + ex.question + "' has " +
                              std::to_string(ex.recitations.size()) + " recitations, expected " +
                              std::to_string(spec.recitations_per_hop));
        }
        check_text(ex.question, "exemplar question", d);
        a.component(labeled(kQuestionCue, ex.question));
        recitation_components(a, ex.recitations, true, d);
        a.end_exemplar();
    }
    check_text(spec.target_question, "target question", d);
    a.component(labeled(kQuestionCue, spec.target_question));
    a.component(numbered_recitation_cue(1));
    return a.finish();
}

std::string build_cot_prompt(const PromptSpec& spec) {
    const auto& d = spec.dialect;
    Assembler a(d);
    for (const auto& ex : spec.exemplars) {
        if (!ex.rationale) throw PromptError("chain-of-thought exemplar '" + ex.question + "' lacks a rationale");
        check_text(ex.question, "exemplar question", d);
        check_text(*ex.rationale, "exemplar rationale", d);
        check_text(ex.answer, "exemplar answer", d);
        a.component(labeled(kQuestionCue, ex.question));
        std::string answer = std::string(kAnswerCue) + " " + *ex.rationale + " " + std::string(kSoTheAnswerIs) +
                             " " + ex.answer + ".";
        a.component(std::move(answer));
        a.end_exemplar();
    }
    check_text(spec.target_question, "target question", d);
    a.component(labeled(kQuestionCue, spec.target_question));
    a.component(std::string(kAnswerCue));
    return a.finish();
}

std::string PassagePromptTemplate::render(std::string_view hint) const {
    check_text(hint, "hint", dialect_);
    std::string text = prefix_;
    text.append(labeled(kHintCue, hint));
    text.append(dialect_.intra_separator);
    text.append(kRecitationCue);
    return dialect_.apply(std::move(text));
}

HintPrompts build_hint_prompts(std::string_view question, const std::vector<HintExemplar>& exemplars,
                               const PromptDialect& dialect) {
    if (exemplars.empty()) throw PromptError("hint prompts need at least one exemplar");
    for (const auto& ex : exemplars) {
        try {
            hintcorpus::parse_hint(ex.hint);
        } catch (const ParseError& e) {
            throw PromptError("exemplar hint '" + ex.hint + "' is not a valid passage hint: " + e.what());
        }
    }
    Assembler hints(dialect);
    for (const auto& ex : exemplars) {
        check_text(ex.question, "exemplar question", dialect);
        hints.component(labeled(kQuestionCue, ex.question));
        hints.component(labeled(kHintCue, ex.hint));
        hints.end_exemplar();
    }
    check_text(question, "target question", dialect);
    hints.component(labeled(kQuestionCue, question));
    hints.component(std::string(kHintCue));

    // The passage template is assembled undialected; render() applies the dialect
    // once to the complete text.
    PromptDialect plain = dialect;
    plain.newline_replacement.reset();
    plain.wrapper_prefix.reset();
    plain.wrapper_suffix.reset();
    Assembler passages(plain);
    for (const auto& ex : exemplars) {
        check_text(ex.passage, "exemplar passage", dialect);
        passages.component(labeled(kHintCue, ex.hint));
        passages.component(labeled(kRecitationCue, ex.passage));
        passages.end_exemplar();
    }
    return HintPrompts{hints.finish(), PassagePromptTemplate(passages.finish(), dialect)};
}

std::string build_question_generation_prompt(std::string_view passage,
                                             const std::vector<QuestionGenExemplar>& exemplars,
                                             const PromptDialect& dialect) {
    if (exemplars.empty()) throw PromptError("question generation needs at least one exemplar");
    Assembler a(dialect);
    for (const auto& ex : exemplars) {
        check_text(ex.evidence, "exemplar evidence", dialect);
        check_text(ex.question, "exemplar question", dialect);
        a.component(labeled(kPassageCue, ex.evidence));
        a.component(labeled(kQuestionCue, ex.question));
        a.end_exemplar();
    }
    check_text(passage, "passage", dialect);
    a.component(labeled(kPassageCue, passage));
    a.component(std::string(kQuestionCue));
    return a.finish();
}

std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw PromptError("exemplar count must be positive");
    if (pool_size < n) {
        throw PromptError("exemplar pool has " + std::to_string(pool_size) + " items, need " + std::to_string(n));
    }
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> all(pool_size);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    std::sample(all.begin(), all.end(), std::back_inserter(chosen), n, rng);
    std::shuffle(chosen.begin(), chosen.end(), rng);
    return chosen;
}

}  // namespace recite::prompting
