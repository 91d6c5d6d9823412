#pragma once

#include "recite/backend.hpp"
#include "recite/core_model.hpp"
#include "recite/evalkit.hpp"
#include "recite/prompting.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recite::hintcorpus {
class Corpus;
}

namespace recite::pipeline {

struct SchemeConfig {
    Scheme scheme = Scheme::ReciteAnswer;
    int n_paths = 20;
    SamplingParams recitation_params = SamplingParams::top_k(40, 0.7, 0);
    SamplingParams answer_params = SamplingParams::greedy(64);
    int n_hints = 20;
    std::uint64_t exemplar_seed = 0;
    int shots = 5;
    int recitations_per_hop = 2;
    prompting::PromptDialect dialect;
    /// false: one request per path (seed + path index); true: one request
    /// carrying n samples.
    bool samples_in_one_request = false;
    std::size_t max_in_flight = 8;
    evalkit::NormSteps vote_norm;
};

/// Problems with the configuration; empty when valid.
std::vector<std::string> validate(const SchemeConfig& cfg);

/// Exemplars already selected for one run.
struct RunExemplars {
    std::vector<Exemplar> qa;   // recitation + QA stages (recitations stripped for Direct)
    std::vector<Exemplar> cot;  // chain-of-thought baseline
    std::vector<prompting::HintExemplar> hints;
    /// Identifiers that go into the configuration fingerprint (file names or
    /// content hashes).
    std::vector<std::string> ids;
};

struct Extraction {
    std::string answer;
    bool ok = false;
};

/// Answer text after the last "Answer:" cue up to the first block separator,
/// trimmed. ChainOfThought reads after the last "So the answer is" and drops
/// a trailing period. A missing cue gives an empty answer with ok = false.
Extraction extract_answer(std::string_view raw, Scheme scheme, std::string_view separator = "\n\n");

/// Splits one multi-hop generation into its numbered recitations. The text
/// may start with or without the "Recitation 1:" cue. Returns nullopt when a
/// cue 2..n is missing or a recitation is empty; anything after a cue n+1 is
/// discarded.
std::optional<std::vector<std::string>> split_multihop(std::string_view text, int n);

/// Drops repeats under trim + whitespace collapse + ASCII case folding, and
/// empty hints. Keeps the first spelling of each.
std::vector<std::string> dedup_hints(const std::vector<std::string>& hints);

/// Supplies fixed contexts (gold evidence or retrieved passages) in place of
/// sampled recitations.
struct ContextProvider {
    std::string source;  // "gold", "bm25", ...
    std::function<std::vector<std::string>(const QuestionRecord&)> contexts;
};

class Pipeline {
public:
    Pipeline(backend::Backend& backend, SchemeConfig cfg, RunExemplars exemplars,
             std::optional<ContextProvider> context = std::nullopt,
             const hintcorpus::Corpus* hint_corpus = nullptr);

    const SchemeConfig& config() const { return cfg_; }

    /// Stable hash of prompt layout, sampling parameters, exemplar ids and
    /// backend id. Runs with equal fingerprints are interchangeable on resume.
    const std::string& fingerprint() const { return fingerprint_; }

    /// Dispatches on the configured scheme. Throws on all-paths failure.
    RunRecord run(const QuestionRecord& q) const;

    RunRecord answer_direct(const QuestionRecord& q) const;
    RunRecord recite_and_answer(const QuestionRecord& q) const;
    RunRecord recite_and_answer_multihop(const QuestionRecord& q) const;
    RunRecord diversified_recite_and_answer(const QuestionRecord& q) const;
    RunRecord chain_of_thought(const QuestionRecord& q) const;
    /// Single greedy answer conditioned on the given contexts.
    RunRecord answer_with_contexts(const QuestionRecord& q, const std::vector<std::string>& contexts,
                                   std::string_view source) const;

private:
    struct Sample {
        std::optional<std::string> text;
        std::string error;
        std::map<std::string, std::string> meta;
    };

    std::vector<backend::BatchSlot> dispatch(const std::vector<backend::GenerationRequest>& reqs) const;
    /// `count` samples of one prompt, one per path.
    std::vector<Sample> sample(const std::string& prompt, const SamplingParams& params, int count) const;
    /// Greedy answers for every path whose prompt is set; paths without a
    /// prompt keep the status they already carry.
    void answer_paths(std::vector<RecitationPath>& paths, const std::vector<std::optional<std::string>>& prompts,
                      Scheme scheme) const;
    RunRecord finish(const QuestionRecord& q, Scheme scheme, std::vector<RecitationPath> paths) const;
    SamplingParams answer_params() const;
    SamplingParams recitation_params(std::vector<std::string> stops) const;
    prompting::PromptSpec spec(const QuestionRecord& q, Scheme scheme) const;
    std::string separator() const { return cfg_.dialect.rendered(cfg_.dialect.intra_separator); }

    backend::Backend& backend_;
    SchemeConfig cfg_;
    RunExemplars exemplars_;
    std::optional<ContextProvider> context_;
    const hintcorpus::Corpus* hint_corpus_;
    std::string fingerprint_;
};

struct RunOptions {
    std::size_t limit = 0;  // 0 = all records; the usual subset is the first 1024
    bool resume = false;
    /// Directory for records.jsonl and timings.jsonl; empty = no persistence.
    std::string run_dir;
    std::size_t question_parallelism = 1;
    const std::atomic<bool>* cancel = nullptr;
    std::function<void(const RunRecord&)> on_record;
};

struct RunSummary {
    std::vector<RunRecord> records;  // input order
    std::size_t executed = 0;
    std::size_t reused = 0;
    std::size_t failed = 0;
    bool cancelled = false;
};

/// Runs the pipeline over `records` (first `limit`), questions in parallel,
/// emitting in input order. Per-question failures become Failed records.
/// With resume, records already in run_dir/records.jsonl with a matching
/// fingerprint and Ok status are reused instead of re-executed. Persisted
/// records carry no timing data (wall_clock_ms = 0, no latency meta); timings
/// go to timings.jsonl.
RunSummary run_dataset(const Pipeline& pipeline, const std::vector<QuestionRecord>& records,
                       const RunOptions& options);

/// Record as written to records.jsonl: timing fields removed.
RunRecord strip_volatile(RunRecord r);

}  // namespace recite::pipeline
