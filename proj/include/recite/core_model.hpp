#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recite {

enum class Dataset { NQ, TriviaQA, HotpotQA, Custom };

enum class Scheme { Direct, ReciteAnswer, MultiHopRecite, DiversifiedRecite, ChainOfThought };

enum class Strategy { Greedy, TopK };

/// Outcome of one self-consistency path. Only Ok paths take part in voting.
enum class PathStatus { Ok, ExtractionFailed, StructureError, BackendError };

enum class RunStatus { Ok, Failed };

std::string_view to_string(Dataset d);
std::string_view to_string(Scheme s);
std::string_view to_string(Strategy s);
std::string_view to_string(PathStatus s);
std::string_view to_string(RunStatus s);

// Parsers throw ConfigError on unknown names.
Dataset parse_dataset(std::string_view name);
Scheme parse_scheme(std::string_view name);
Strategy parse_strategy(std::string_view name);
PathStatus parse_path_status(std::string_view name);
RunStatus parse_run_status(std::string_view name);

struct QuestionRecord {
    std::string id;
    Dataset dataset = Dataset::Custom;
    std::string question;
    std::vector<std::string> gold_answers;
    std::optional<std::string> gold_evidence;
    int hop_count = 1;

    bool operator==(const QuestionRecord&) const = default;
};

/// One few-shot demonstration. Recitations and rationale are mutually
/// exclusive; both empty means a direct question/answer pair.
struct Exemplar {
    std::string question;
    std::vector<std::string> recitations;
    std::string answer;
    std::optional<std::string> rationale;

    bool operator==(const Exemplar&) const = default;
};

struct SamplingParams {
    Strategy strategy = Strategy::Greedy;
    int k = 40;               // TopK only
    double temperature = 0.7; // TopK only
    std::uint64_t seed = 0;
    int max_tokens = 256;
    std::vector<std::string> stop_sequences;

    bool operator==(const SamplingParams&) const = default;

    static SamplingParams greedy(int max_tokens = 256) {
        SamplingParams p;
        p.max_tokens = max_tokens;
        return p;
    }
    static SamplingParams top_k(int k, double temperature, std::uint64_t seed,
                                int max_tokens = 256) {
        SamplingParams p;
        p.strategy = Strategy::TopK;
        p.k = k;
        p.temperature = temperature;
        p.seed = seed;
        p.max_tokens = max_tokens;
        return p;
    }
};

struct RecitationPath {
    std::vector<std::string> recitations;
    std::string raw_answer_text;
    std::string extracted_answer;
    PathStatus status = PathStatus::Ok;
    std::map<std::string, std::string> backend_meta;

    bool operator==(const RecitationPath&) const = default;
};

struct RunRecord {
    std::string question_id;
    Scheme scheme = Scheme::Direct;
    RunStatus status = RunStatus::Ok;
    std::optional<std::string> error;
    std::vector<RecitationPath> paths;
    std::string voted_answer;
    std::string config_fingerprint;
    std::int64_t wall_clock_ms = 0;

    bool operator==(const RunRecord&) const = default;

    /// Extracted answers of the paths that take part in voting, in path order.
    std::vector<std::string> voting_answers() const;
};

// Validation never throws; an empty result means every invariant holds.
std::vector<std::string> validate(const QuestionRecord& r);
std::vector<std::string> validate(const Exemplar& e);
std::vector<std::string> validate(const SamplingParams& p);
/// `answer_separator` is the block separator the answer extractor cuts at
/// (dialect dependent).
std::vector<std::string> validate(const RunRecord& r, std::string_view answer_separator = "\n\n");

// Line-delimited JSON with sorted keys. serialize never emits a raw newline;
// deserialize throws ParseError naming the field and byte offset.
std::string serialize(const QuestionRecord& r);
std::string serialize(const Exemplar& e);
std::string serialize(const SamplingParams& p);
std::string serialize(const RecitationPath& p);
std::string serialize(const RunRecord& r);

template <class T>
T deserialize(std::string_view line);

template <> QuestionRecord deserialize<QuestionRecord>(std::string_view line);
template <> Exemplar deserialize<Exemplar>(std::string_view line);
template <> SamplingParams deserialize<SamplingParams>(std::string_view line);
template <> RecitationPath deserialize<RecitationPath>(std::string_view line);
template <> RunRecord deserialize<RunRecord>(std::string_view line);

}  // namespace recite
