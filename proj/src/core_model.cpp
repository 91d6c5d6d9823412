#include "recite/core_model.hpp"

#include "json_fields.hpp"
#include "recite/errors.hpp"
#include "recite/evalkit.hpp"
#include "recite/pipeline.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace recite {

using detail::Fields;
using detail::json;

namespace {

template <class E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
    for (const auto& [e, name] : table) {
        if (e == value) return name;
    }
    return "?";
}

template <class E, std::size_t N>
E value_of(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view name,
           std::string_view what) {
    for (const auto& [e, n] : table) {
        if (n == name) return e;
    }
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(name) + "'");
}

constexpr std::array<std::pair<Dataset, std::string_view>, 4> kDatasets{{
    {Dataset::NQ, "NQ"},
    {Dataset::TriviaQA, "TriviaQA"},
    {Dataset::HotpotQA, "HotpotQA"},
    {Dataset::Custom, "Custom"},
}};

constexpr std::array<std::pair<Scheme, std::string_view>, 5> kSchemes{{
    {Scheme::Direct, "direct"},
    {Scheme::ReciteAnswer, "recite_answer"},
    {Scheme::MultiHopRecite, "multihop_recite"},
    {Scheme::DiversifiedRecite, "diversified_recite"},
    {Scheme::ChainOfThought, "chain_of_thought"},
}};

constexpr std::array<std::pair<Strategy, std::string_view>, 2> kStrategies{{
    {Strategy::Greedy, "greedy"},
    {Strategy::TopK, "top_k"},
}};

constexpr std::array<std::pair<PathStatus, std::string_view>, 4> kPathStatuses{{
    {PathStatus::Ok, "ok"},
    {PathStatus::ExtractionFailed, "extraction_failed"},
    {PathStatus::StructureError, "structure_error"},
    {PathStatus::BackendError, "backend_error"},
}};

constexpr std::array<std::pair<RunStatus, std::string_view>, 2> kRunStatuses{{
    {RunStatus::Ok, "ok"},
    {RunStatus::Failed, "failed"},
}};

bool has_edge_whitespace(std::string_view s) {
    auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    return !s.empty() && (ws(s.front()) || ws(s.back()));
}

// Enum fields are parsed with the field name attached to any error.
template <class F>
auto parse_enum(const Fields& f, std::string_view field, F&& parse) {
    auto name = f.get<std::string>(field);
    try {
        return parse(name);
    } catch (const ConfigError& e) {
        f.fail(field, e.what());
    }
}

json to_json(const RecitationPath& p) {
    json j;
    j["recitations"] = p.recitations;
    j["raw_answer_text"] = p.raw_answer_text;
    j["extracted_answer"] = p.extracted_answer;
    j["status"] = to_string(p.status);
    j["backend_meta"] = p.backend_meta;
    return j;
}

RecitationPath path_from(const Fields& f) {
    RecitationPath p;
    p.recitations = f.get<std::vector<std::string>>("recitations");
    p.raw_answer_text = f.get<std::string>("raw_answer_text");
    p.extracted_answer = f.get<std::string>("extracted_answer");
    p.status = parse_enum(f, "status", parse_path_status);
    p.backend_meta = f.get<std::map<std::string, std::string>>("backend_meta");
    return p;
}

}  // namespace

std::string_view to_string(Dataset d) { return name_of(kDatasets, d); }
std::string_view to_string(Scheme s) { return name_of(kSchemes, s); }
std::string_view to_string(Strategy s) { return name_of(kStrategies, s); }
std::string_view to_string(PathStatus s) { return name_of(kPathStatuses, s); }
std::string_view to_string(RunStatus s) { return name_of(kRunStatuses, s); }

Dataset parse_dataset(std::string_view n) { return value_of(kDatasets, n, "dataset"); }
Scheme parse_scheme(std::string_view n) { return value_of(kSchemes, n, "scheme"); }
Strategy parse_strategy(std::string_view n) { return value_of(kStrategies, n, "sampling strategy"); }
PathStatus parse_path_status(std::string_view n) { return value_of(kPathStatuses, n, "path status"); }
RunStatus parse_run_status(std::string_view n) { return value_of(kRunStatuses, n, "run status"); }

std::vector<std::string> RunRecord::voting_answers() const {
    std::vector<std::string> out;
    for (const auto& p : paths) {
        if (p.status == PathStatus::Ok) out.push_back(p.extracted_answer);
    }
    return out;
}

// ---------------------------------------------------------------- validation

std::vector<std::string> validate(const QuestionRecord& r) {
    std::vector<std::string> v;
    if (r.id.empty()) v.emplace_back("id empty");
    if (r.question.empty()) v.emplace_back("question empty");
    if (has_edge_whitespace(r.question)) v.emplace_back("question has leading/trailing whitespace");
    if (r.gold_answers.empty()) v.emplace_back("gold_answers empty");
    if (std::any_of(r.gold_answers.begin(), r.gold_answers.end(),
                    [](const std::string& a) { return a.empty(); })) {
        v.emplace_back("gold_answers contains an empty alias");
    }
    if (r.hop_count < 1) v.emplace_back("hop_count must be >= 1");
    if (r.dataset == Dataset::HotpotQA && r.hop_count < 2) {
        v.emplace_back("HotpotQA record must have hop_count >= 2");
    }
    return v;
}

std::vector<std::string> validate(const Exemplar& e) {
    std::vector<std::string> v;
    if (e.question.empty()) v.emplace_back("question empty");
    if (e.answer.empty()) v.emplace_back("answer empty");
    if (!e.recitations.empty() && e.rationale) {
        v.emplace_back("exemplar carries both recitations and a rationale");
    }
    if (std::any_of(e.recitations.begin(), e.recitations.end(),
                    [](const std::string& r) { return r.empty(); })) {
        v.emplace_back("empty recitation");
    }
    return v;
}

std::vector<std::string> validate(const SamplingParams& p) {
    std::vector<std::string> v;
    if (p.max_tokens < 1) v.emplace_back("max_tokens must be positive");
    if (p.strategy == Strategy::TopK) {
        if (p.k < 1) v.emplace_back("top_k requires k >= 1");
        if (p.temperature == 0.0) v.emplace_back("temperature 0 under top_k (use greedy)");
        if (p.temperature < 0.0) v.emplace_back("temperature must be nonnegative");
    }
    if (std::any_of(p.stop_sequences.begin(), p.stop_sequences.end(),
                    [](const std::string& s) { return s.empty(); })) {
        v.emplace_back("empty stop sequence");
    }
    return v;
}

std::vector<std::string> validate(const RunRecord& r, std::string_view answer_separator) {
    std::vector<std::string> v;
    if (r.question_id.empty()) v.emplace_back("question_id empty");
    if (r.config_fingerprint.empty()) v.emplace_back("config_fingerprint empty");
    if (r.status == RunStatus::Ok && r.paths.empty()) v.emplace_back("paths empty");
    if (r.status == RunStatus::Ok && r.error) v.emplace_back("ok record carries an error");
    if (r.wall_clock_ms < 0) v.emplace_back("wall_clock_ms negative");
    for (std::size_t i = 0; i < r.paths.size(); ++i) {
        const auto& p = r.paths[i];
        if (r.scheme == Scheme::Direct && !p.recitations.empty()) {
            v.push_back("path " + std::to_string(i) + ": direct scheme path has recitations");
        }
        if (p.status == PathStatus::Ok || p.status == PathStatus::ExtractionFailed) {
            auto ex = pipeline::extract_answer(p.raw_answer_text, r.scheme, answer_separator);
            if (ex.answer != p.extracted_answer) {
                v.push_back("path " + std::to_string(i) +
                            ": extracted_answer not re-derivable from raw_answer_text");
            }
            if (ex.ok != (p.status == PathStatus::Ok)) {
                v.push_back("path " + std::to_string(i) + ": status disagrees with extraction");
            }
        }
    }
    auto answers = r.voting_answers();
    if (r.status == RunStatus::Ok && answers.empty()) v.emplace_back("ok record without a voting path");
    if (evalkit::plurality_vote(answers).winner_raw != r.voted_answer) {
        v.emplace_back("voted_answer is not the plurality winner");
    }
    return v;
}

// ------------------------------------------------------------- serialization

std::string serialize(const QuestionRecord& r) {
    json j;
    j["id"] = r.id;
    j["dataset"] = to_string(r.dataset);
    j["question"] = r.question;
    j["gold_answers"] = r.gold_answers;
    if (r.gold_evidence) j["gold_evidence"] = *r.gold_evidence;
    j["hop_count"] = r.hop_count;
    return detail::dump_line(j);
}

std::string serialize(const Exemplar& e) {
    json j;
    j["question"] = e.question;
    j["recitations"] = e.recitations;
    j["answer"] = e.answer;
    if (e.rationale) j["rationale"] = *e.rationale;
    return detail::dump_line(j);
}

std::string serialize(const SamplingParams& p) {
    json j;
    j["strategy"] = to_string(p.strategy);
    j["k"] = p.k;
    j["temperature"] = p.temperature;
    j["seed"] = p.seed;
    j["max_tokens"] = p.max_tokens;
    j["stop_sequences"] = p.stop_sequences;
    return detail::dump_line(j);
}

std::string serialize(const RecitationPath& p) { return detail::dump_line(to_json(p)); }

std::string serialize(const RunRecord& r) {
    json j;
    j["question_id"] = r.question_id;
    j["scheme"] = to_string(r.scheme);
    j["status"] = to_string(r.status);
    if (r.error) j["error"] = *r.error;
    j["paths"] = json::array();
    for (const auto& p : r.paths) j["paths"].push_back(to_json(p));
    j["voted_answer"] = r.voted_answer;
    j["config_fingerprint"] = r.config_fingerprint;
    j["wall_clock_ms"] = r.wall_clock_ms;
    return detail::dump_line(j);
}

template <>
QuestionRecord deserialize<QuestionRecord>(std::string_view line) {
    Fields f(line);
    QuestionRecord r;
    r.id = f.get<std::string>("id");
    r.dataset = parse_enum(f, "dataset", parse_dataset);
    r.question = f.get<std::string>("question");
    r.gold_answers = f.get<std::vector<std::string>>("gold_answers");
    r.gold_evidence = f.get_optional<std::string>("gold_evidence");
    r.hop_count = f.get<int>("hop_count");
    return r;
}

template <>
Exemplar deserialize<Exemplar>(std::string_view line) {
    Fields f(line);
    Exemplar e;
    e.question = f.get<std::string>("question");
    e.recitations = f.get<std::vector<std::string>>("recitations");
    e.answer = f.get<std::string>("answer");
    e.rationale = f.get_optional<std::string>("rationale");
    return e;
}

template <>
SamplingParams deserialize<SamplingParams>(std::string_view line) {
    Fields f(line);
    SamplingParams p;
    p.strategy = parse_enum(f, "strategy", parse_strategy);
    p.k = f.get<int>("k");
    p.temperature = f.get<double>("temperature");
    p.seed = f.get<std::uint64_t>("seed");
    p.max_tokens = f.get<int>("max_tokens");
    p.stop_sequences = f.get<std::vector<std::string>>("stop_sequences");
    return p;
}

template <>
RecitationPath deserialize<RecitationPath>(std::string_view line) {
    return path_from(Fields(line));
}

template <>
RunRecord deserialize<RunRecord>(std::string_view line) {
    Fields f(line);
    RunRecord r;
    r.question_id = f.get<std::string>("question_id");
    r.scheme = parse_enum(f, "scheme", parse_scheme);
    r.status = parse_enum(f, "status", parse_run_status);
    r.error = f.get_optional<std::string>("error");
    auto paths = f.get<json>("paths");
    if (!paths.is_array()) f.fail("paths", "expected array");
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!paths[i].is_object()) f.fail("paths", "element " + std::to_string(i) + " is not an object");
        auto text = paths[i].dump();
        try {
            r.paths.push_back(path_from(Fields(text)));
        } catch (const ParseError& e) {
            throw ParseError("paths[" + std::to_string(i) + "]." + e.field(),
                             detail::field_offset(line, "paths"), e.what());
        }
    }
    r.voted_answer = f.get<std::string>("voted_answer");
    r.config_fingerprint = f.get<std::string>("config_fingerprint");
    r.wall_clock_ms = f.get<std::int64_t>("wall_clock_ms");
    return r;
}

}  // namespace recite
