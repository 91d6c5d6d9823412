#include "recite/pipeline.hpp"

#include "json_fields.hpp"
#include "recite/hashing.hpp"
#include "recite/hintcorpus.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace recite::pipeline {

namespace {

using detail::json;
namespace fs = std::filesystem;

constexpr std::string_view kLayoutVersion = "recite-layout-1";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string collapse(std::string_view s) {
    std::string out;
    bool gap = false;
    for (char c : trim(s)) {
        if (is_space(c)) {
            gap = true;
            continue;
        }
        if (gap) out.push_back(' ');
        gap = false;
        out.push_back(c);
    }
    return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

void merge_meta(std::map<std::string, std::string>& into, std::string_view prefix,
                const std::map<std::string, std::string>& from) {
    for (const auto& [k, v] : from) into[std::string(prefix) + k] = v;
}

// All paths of a question failed; carries the partial record for the run log.
class RunFailure : public Error {
public:
    RunFailure(const std::string& what, RunRecord record) : Error(what), record_(std::move(record)) {}
    const RunRecord& record() const { return record_; }

private:
    RunRecord record_;
};

bool volatile_key(std::string_view key) {
    for (std::string_view suffix : {"latency_ms", "attempts", "cache"}) {
        if (key.size() >= suffix.size() && key.substr(key.size() - suffix.size()) == suffix) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> validate(const SchemeConfig& cfg) {
    std::vector<std::string> v;
    if (cfg.n_paths < 1) v.emplace_back("n_paths must be positive");
    if (cfg.n_hints < 1) v.emplace_back("n_hints must be positive");
    if (cfg.shots < 1) v.emplace_back("shots must be positive");
    if (cfg.max_in_flight < 1) v.emplace_back("max_in_flight must be positive");
    if (cfg.answer_params.strategy != Strategy::Greedy) v.emplace_back("answer_params must be greedy");
    if (cfg.scheme == Scheme::MultiHopRecite && cfg.recitations_per_hop < 2) {
        v.emplace_back("recitations_per_hop must be >= 2 for multi-hop");
    }
    const bool sampled = cfg.scheme == Scheme::ReciteAnswer || cfg.scheme == Scheme::MultiHopRecite ||
                         cfg.scheme == Scheme::ChainOfThought;
    if (sampled && cfg.n_paths > 1 && cfg.recitation_params.strategy != Strategy::TopK) {
        v.emplace_back("several paths need top-k sampling for recitation_params");
    }
    if (cfg.scheme == Scheme::DiversifiedRecite && cfg.n_hints > 1 &&
        cfg.recitation_params.strategy != Strategy::TopK) {
        v.emplace_back("several hints need top-k sampling for recitation_params");
    }
    for (const auto& p : validate(cfg.recitation_params)) v.push_back("recitation_params: " + p);
    for (const auto& p : validate(cfg.answer_params)) v.push_back("answer_params: " + p);
    return v;
}

Extraction extract_answer(std::string_view raw, Scheme scheme, std::string_view separator) {
    const std::string_view cue = scheme == Scheme::ChainOfThought ? prompting::kSoTheAnswerIs : prompting::kAnswerCue;
    auto pos = raw.rfind(cue);
    if (pos == std::string_view::npos) return {};
    auto rest = raw.substr(pos + cue.size());
    if (!separator.empty()) {
        if (auto cut = rest.find(separator); cut != std::string_view::npos) rest = rest.substr(0, cut);
    }
    rest = trim(rest);
    if (scheme == Scheme::ChainOfThought && !rest.empty() && rest.back() == '.') {
        rest.remove_suffix(1);
        rest = trim(rest);
    }
    return Extraction{std::string(rest), !rest.empty()};
}

std::optional<std::vector<std::string>> split_multihop(std::string_view text, int n) {
    if (n < 1) return std::nullopt;
    text = trim(text);
    const auto first = prompting::numbered_recitation_cue(1);
    if (text.substr(0, first.size()) == first) text.remove_prefix(first.size());
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (int k = 2; k <= n + 1; ++k) {
        const auto cue = prompting::numbered_recitation_cue(k);
        auto at = text.find(cue, pos);
        if (at == std::string_view::npos) {
            if (k <= n) return std::nullopt;
            at = text.size();
        }
        auto piece = trim(text.substr(pos, at - pos));
        if (piece.empty()) return std::nullopt;
        out.emplace_back(piece);
        pos = std::min(text.size(), at + cue.size());
    }
    return out;
}

std::vector<std::string> dedup_hints(const std::vector<std::string>& hints) {
    std::vector<std::string> out;
    std::vector<std::string> seen;
    for (const auto& h : hints) {
        auto key = collapse(h);
        if (key.empty()) continue;
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
            return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        });
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(std::move(key));
        out.push_back(h);
    }
    return out;
}

// ------------------------------------------------------------------ pipeline

Pipeline::Pipeline(backend::Backend& backend, SchemeConfig cfg, RunExemplars exemplars,
                   std::optional<ContextProvider> context, const hintcorpus::Corpus* hint_corpus)
    : backend_(backend),
      cfg_(std::move(cfg)),
      exemplars_(std::move(exemplars)),
      context_(std::move(context)),
      hint_corpus_(hint_corpus) {
    auto problems = validate(cfg_);
    if (!problems.empty()) throw ConfigError("invalid scheme config: " + problems.front());

    json j;
    j["layout"] = kLayoutVersion;
    j["scheme"] = to_string(cfg_.scheme);
    j["n_paths"] = cfg_.n_paths;
    j["n_hints"] = cfg_.n_hints;
    j["shots"] = cfg_.shots;
    j["exemplar_seed"] = cfg_.exemplar_seed;
    j["recitations_per_hop"] = cfg_.recitations_per_hop;
    j["samples_in_one_request"] = cfg_.samples_in_one_request;
    j["recitation_params"] = json::parse(serialize(cfg_.recitation_params));
    j["answer_params"] = json::parse(serialize(cfg_.answer_params));
    j["dialect"] = cfg_.dialect.label();
    j["separators"] = {cfg_.dialect.intra_separator, cfg_.dialect.inter_separator};
    j["vote_norm"] = {cfg_.vote_norm.lowercase, cfg_.vote_norm.strip_punct, cfg_.vote_norm.strip_articles,
                      cfg_.vote_norm.collapse_whitespace};
    j["exemplar_ids"] = exemplars_.ids;
    auto digest = [](const auto& items, auto&& line) {
        std::string all;
        for (const auto& it : items) all += line(it) + "\n";
        return sha256_hex(all);
    };
    j["qa"] = digest(exemplars_.qa, [](const Exemplar& e) { return serialize(e); });
    j["cot"] = digest(exemplars_.cot, [](const Exemplar& e) { return serialize(e); });
    j["hints"] = digest(exemplars_.hints, [](const prompting::HintExemplar& h) {
        return detail::dump_line(json{h.question, h.hint, h.passage});
    });
    j["context"] = context_ ? context_->source : "";
    j["backend"] = backend_.id();
    fingerprint_ = sha256_hex(detail::dump_line(j));
}

SamplingParams Pipeline::answer_params() const {
    auto p = cfg_.answer_params;
    p.stop_sequences.push_back(separator());
    return p;
}

SamplingParams Pipeline::recitation_params(std::vector<std::string> stops) const {
    auto p = cfg_.recitation_params;
    for (auto& s : stops) p.stop_sequences.push_back(std::move(s));
    return p;
}

prompting::PromptSpec Pipeline::spec(const QuestionRecord& q, Scheme scheme) const {
    prompting::PromptSpec s;
    s.scheme = scheme;
    s.target_question = q.question;
    s.recitations_per_hop = cfg_.recitations_per_hop;
    s.dialect = cfg_.dialect;
    s.exemplars = scheme == Scheme::ChainOfThought ? exemplars_.cot : exemplars_.qa;
    if (scheme == Scheme::Direct) {
        for (auto& e : s.exemplars) {
            e.recitations.clear();
            e.rationale.reset();
        }
    }
    return s;
}

std::vector<backend::BatchSlot> Pipeline::dispatch(const std::vector<backend::GenerationRequest>& reqs) const {
    return backend::generate_batch(backend_, reqs, cfg_.max_in_flight);
}

std::vector<Pipeline::Sample> Pipeline::sample(const std::string& prompt, const SamplingParams& params,
                                               int count) const {
    std::vector<backend::GenerationRequest> reqs;
    const bool one_request = cfg_.samples_in_one_request || count == 1;
    if (one_request) {
        reqs.push_back({prompt, params, count});
    } else {
        for (int i = 0; i < count; ++i) {
            auto p = params;
            p.seed = params.seed + static_cast<std::uint64_t>(i);
            reqs.push_back({prompt, std::move(p), 1});
        }
    }
    auto slots = dispatch(reqs);
    std::vector<Sample> out(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& slot = one_request ? slots.front() : slots[i];
        if (slot.ok()) {
            out[i].text = slot.result->texts.at(one_request ? i : 0);
            out[i].meta = slot.result->meta;
        } else {
            out[i].error = slot.error->what();
        }
    }
    return out;
}

void Pipeline::answer_paths(std::vector<RecitationPath>& paths,
                            const std::vector<std::optional<std::string>>& prompts, Scheme scheme) const {
    std::vector<backend::GenerationRequest> reqs;
    std::vector<std::size_t> owners;
    const auto params = answer_params();
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!prompts[i]) continue;
        reqs.push_back({*prompts[i], params, 1});
        owners.push_back(i);
    }
    auto slots = dispatch(reqs);
    const auto sep = separator();
    for (std::size_t s = 0; s < slots.size(); ++s) {
        auto& path = paths[owners[s]];
        if (!slots[s].ok()) {
            path.status = PathStatus::BackendError;
            path.backend_meta["error"] = slots[s].error->what();
            continue;
        }
        merge_meta(path.backend_meta, "answer.", slots[s].result->meta);
        path.raw_answer_text = std::string(prompting::kAnswerCue) + slots[s].result->texts.front();
        auto ex = extract_answer(path.raw_answer_text, scheme, sep);
        path.extracted_answer = std::move(ex.answer);
        path.status = ex.ok ? PathStatus::Ok : PathStatus::ExtractionFailed;
    }
}

RunRecord Pipeline::finish(const QuestionRecord& q, Scheme scheme, std::vector<RecitationPath> paths) const {
    RunRecord r;
    r.question_id = q.id;
    r.scheme = scheme;
    r.config_fingerprint = fingerprint_;
    r.paths = std::move(paths);
    auto answers = r.voting_answers();
    if (answers.empty()) {
        std::string first_error;
        for (const auto& p : r.paths) {
            if (auto it = p.backend_meta.find("error"); it != p.backend_meta.end()) {
                first_error = it->second;
                break;
            }
        }
        r.status = RunStatus::Failed;
        r.error = "all " + std::to_string(r.paths.size()) + " paths failed" +
                  (first_error.empty() ? std::string() : " (" + first_error + ")");
        auto what = "question " + q.id + ": " + *r.error;
        throw RunFailure(what, std::move(r));
    }
    r.voted_answer = evalkit::plurality_vote(answers, cfg_.vote_norm).winner_raw;
    return r;
}

RunRecord Pipeline::run(const QuestionRecord& q) const {
    const auto start = std::chrono::steady_clock::now();
    RunRecord r;
    if (context_) {
        r = answer_with_contexts(q, context_->contexts(q), context_->source);
    } else {
        switch (cfg_.scheme) {
            case Scheme::Direct: r = answer_direct(q); break;
            case Scheme::ReciteAnswer: r = recite_and_answer(q); break;
            case Scheme::MultiHopRecite: r = recite_and_answer_multihop(q); break;
            case Scheme::DiversifiedRecite: r = diversified_recite_and_answer(q); break;
            case Scheme::ChainOfThought: r = chain_of_thought(q); break;
        }
    }
    r.wall_clock_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return r;
}

RunRecord Pipeline::answer_direct(const QuestionRecord& q) const {
    std::vector<RecitationPath> paths(1);
    answer_paths(paths, {prompting::build_qa_prompt(spec(q, Scheme::Direct))}, Scheme::Direct);
    return finish(q, Scheme::Direct, std::move(paths));
}

RunRecord Pipeline::recite_and_answer(const QuestionRecord& q) const {
    const auto prompt = prompting::build_recitation_prompt(spec(q, Scheme::ReciteAnswer));
    auto samples = sample(prompt, recitation_params({separator()}), cfg_.n_paths);
    std::vector<RecitationPath> paths(samples.size());
    std::vector<std::optional<std::string>> prompts(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto& path = paths[i];
        merge_meta(path.backend_meta, "recitation.", samples[i].meta);
        if (!samples[i].text) {
            path.status = PathStatus::BackendError;
            path.backend_meta["error"] = samples[i].error;
            continue;
        }
        auto recitation = std::string(trim(*samples[i].text));
        if (recitation.empty()) {
            path.status = PathStatus::StructureError;
            path.backend_meta["error"] = "empty recitation";
            continue;
        }
        path.recitations.push_back(recitation);
        auto qa = spec(q, Scheme::ReciteAnswer);
        qa.target_recitations = path.recitations;
        try {
            prompts[i] = prompting::build_qa_prompt(qa);
        } catch (const PromptError& e) {
            path.status = PathStatus::StructureError;
            path.backend_meta["error"] = e.what();
        }
    }
    answer_paths(paths, prompts, Scheme::ReciteAnswer);
    return finish(q, Scheme::ReciteAnswer, std::move(paths));
}

RunRecord Pipeline::recite_and_answer_multihop(const QuestionRecord& q) const {
    const auto& d = cfg_.dialect;
    const auto prompt = prompting::build_multihop_prompt(spec(q, Scheme::MultiHopRecite));
    auto params = recitation_params(
        {d.rendered(d.inter_separator), d.rendered(d.intra_separator + std::string(prompting::kQuestionCue))});
    auto samples = sample(prompt, params, cfg_.n_paths);
    std::vector<RecitationPath> paths(samples.size());
    std::vector<std::optional<std::string>> prompts(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto& path = paths[i];
        merge_meta(path.backend_meta, "recitation.", samples[i].meta);
        if (!samples[i].text) {
            path.status = PathStatus::BackendError;
            path.backend_meta["error"] = samples[i].error;
            continue;
        }
        auto text = *samples[i].text;
        if (d.newline_replacement) text = replace_all(std::move(text), *d.newline_replacement, "\n");
        auto parts = split_multihop(text, cfg_.recitations_per_hop);
        if (!parts) {
            path.status = PathStatus::StructureError;
            path.backend_meta["error"] = "generation lacks the numbered recitation cues";
            continue;
        }
        path.recitations = std::move(*parts);
        auto qa = spec(q, Scheme::MultiHopRecite);
        qa.target_recitations = path.recitations;
        try {
            prompts[i] = prompting::build_qa_prompt(qa);
        } catch (const PromptError& e) {
            path.status = PathStatus::StructureError;
            path.backend_meta["error"] = e.what();
        }
    }
    answer_paths(paths, prompts, Scheme::MultiHopRecite);
    return finish(q, Scheme::MultiHopRecite, std::move(paths));
}

RunRecord Pipeline::diversified_recite_and_answer(const QuestionRecord& q) const {
    auto hp = prompting::build_hint_prompts(q.question, exemplars_.hints, cfg_.dialect);
    auto samples = sample(hp.hint_prompt, recitation_params({separator()}), cfg_.n_hints);
    std::vector<std::string> sampled;
    std::string first_error;
    for (const auto& s : samples) {
        if (s.text) {
            sampled.emplace_back(trim(*s.text));
        } else if (first_error.empty()) {
            first_error = s.error;
        }
    }
    auto hints = dedup_hints(sampled);

    std::vector<backend::GenerationRequest> reqs;
    std::vector<std::string> kept_hints;
    auto greedy = cfg_.answer_params;
    greedy.max_tokens = cfg_.recitation_params.max_tokens;
    greedy.stop_sequences = {separator()};
    for (const auto& h : hints) {
        try {
            reqs.push_back({hp.passage_prompt.render(h), greedy, 1});
            kept_hints.push_back(h);
        } catch (const PromptError& e) {
            spdlog::debug("question {}: hint dropped ({})", q.id, e.what());
        }
    }
    auto slots = dispatch(reqs);

    RecitationPath path;
    std::size_t in_corpus = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i].ok()) {
            if (first_error.empty()) first_error = slots[i].error->what();
            continue;
        }
        auto passage = collapse(slots[i].result->texts.front());
        if (passage.empty()) continue;
        path.recitations.push_back(std::move(passage));
        if (hint_corpus_ != nullptr && hint_corpus_->find_hint(kept_hints[i])) ++in_corpus;
    }
    path.backend_meta["hints.sampled"] = std::to_string(sampled.size());
    path.backend_meta["hints.unique"] = std::to_string(hints.size());
    path.backend_meta["hints.expanded"] = std::to_string(path.recitations.size());
    if (hint_corpus_ != nullptr) path.backend_meta["hints.in_corpus"] = std::to_string(in_corpus);

    std::vector<std::optional<std::string>> prompts(1);
    if (path.recitations.empty()) {
        path.status = PathStatus::BackendError;
        path.backend_meta["error"] = first_error.empty() ? "no hint produced a passage" : first_error;
    } else {
        auto qa = spec(q, Scheme::DiversifiedRecite);
        qa.target_recitations = path.recitations;
        prompts[0] = prompting::build_qa_prompt(qa);
    }
    std::vector<RecitationPath> paths{std::move(path)};
    answer_paths(paths, prompts, Scheme::DiversifiedRecite);
    return finish(q, Scheme::DiversifiedRecite, std::move(paths));
}

RunRecord Pipeline::chain_of_thought(const QuestionRecord& q) const {
    const auto prompt = prompting::build_cot_prompt(spec(q, Scheme::ChainOfThought));
    const auto params = cfg_.n_paths == 1 ? answer_params() : recitation_params({separator()});
    auto samples = sample(prompt, params, cfg_.n_paths);
    std::vector<RecitationPath> paths(samples.size());
    const auto sep = separator();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto& path = paths[i];
        merge_meta(path.backend_meta, "answer.", samples[i].meta);
        if (!samples[i].text) {
            path.status = PathStatus::BackendError;
            path.backend_meta["error"] = samples[i].error;
            continue;
        }
        path.raw_answer_text = std::string(prompting::kAnswerCue) + *samples[i].text;
        auto ex = extract_answer(path.raw_answer_text, Scheme::ChainOfThought, sep);
        path.extracted_answer = std::move(ex.answer);
        path.status = ex.ok ? PathStatus::Ok : PathStatus::ExtractionFailed;
    }
    return finish(q, Scheme::ChainOfThought, std::move(paths));
}

RunRecord Pipeline::answer_with_contexts(const QuestionRecord& q, const std::vector<std::string>& contexts,
                                         std::string_view source) const {
    std::vector<RecitationPath> paths(1);
    auto& path = paths.front();
    for (const auto& c : contexts) {
        auto text = collapse(c);
        if (!text.empty()) path.recitations.push_back(std::move(text));
    }
    path.backend_meta["context.source"] = std::string(source);
    std::vector<std::optional<std::string>> prompts(1);
    if (path.recitations.empty()) {
        path.status = PathStatus::StructureError;
        path.backend_meta["error"] = "no " + std::string(source) + " context for question";
    } else {
        auto qa = spec(q, Scheme::ReciteAnswer);
        qa.target_recitations = path.recitations;
        prompts[0] = prompting::build_qa_prompt(qa);
    }
    answer_paths(paths, prompts, Scheme::ReciteAnswer);
    return finish(q, Scheme::ReciteAnswer, std::move(paths));
}

// ------------------------------------------------------------------- dataset

RunRecord strip_volatile(RunRecord r) {
    r.wall_clock_ms = 0;
    for (auto& p : r.paths) {
        std::erase_if(p.backend_meta, [](const auto& kv) { return volatile_key(kv.first); });
    }
    return r;
}

namespace {

void load_previous(const fs::path& file, const std::string& fingerprint,
                   std::unordered_map<std::string, RunRecord>& into) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto r = deserialize<RunRecord>(line);
            if (r.status == RunStatus::Ok && r.config_fingerprint == fingerprint) {
                into.insert_or_assign(r.question_id, std::move(r));
            }
        } catch (const Error& e) {
            spdlog::warn("{}:{}: unreadable record skipped on resume ({})", file.string(), lineno, e.what());
        }
    }
}

json timing_line(const RunRecord& r) {
    json j;
    j["question_id"] = r.question_id;
    j["wall_clock_ms"] = r.wall_clock_ms;
    json lat = json::array();
    for (const auto& p : r.paths) {
        for (const auto& [k, v] : p.backend_meta) {
            if (volatile_key(k) && k.ends_with("latency_ms")) lat.push_back(std::stoll(v));
        }
    }
    j["latency_ms"] = std::move(lat);
    return j;
}

}  // namespace

RunSummary run_dataset(const Pipeline& pipeline, const std::vector<QuestionRecord>& records,
                       const RunOptions& options) {
    const std::size_t n = options.limit == 0 ? records.size() : std::min(options.limit, records.size());
    RunSummary summary;
    std::vector<std::optional<RunRecord>> results(n);

    std::unordered_map<std::string, RunRecord> previous;
    fs::path records_file, partial_file;
    std::ofstream out, timings;
    if (!options.run_dir.empty()) {
        fs::create_directories(options.run_dir);
        records_file = fs::path(options.run_dir) / "records.jsonl";
        partial_file = fs::path(options.run_dir) / "records.jsonl.partial";
        if (options.resume) {
            load_previous(records_file, pipeline.fingerprint(), previous);
            load_previous(partial_file, pipeline.fingerprint(), previous);
        }
        out.open(partial_file, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + partial_file.string());
        timings.open(fs::path(options.run_dir) / "timings.jsonl",
                     std::ios::binary | (options.resume ? std::ios::app : std::ios::trunc));
    }

    std::vector<char> reused(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (auto it = previous.find(records[i].id); it != previous.end()) {
            results[i] = it->second;
            reused[i] = 1;
        }
    }

    std::mutex mu;
    std::size_t next_emit = 0;
    auto emit_ready = [&] {  // caller holds mu
        while (next_emit < n && results[next_emit]) {
            const auto& r = *results[next_emit];
            if (out.is_open()) {
                out << serialize(strip_volatile(r)) << '\n';
                out.flush();
                if (!reused[next_emit] && timings.is_open()) timings << detail::dump_line(timing_line(r)) << '\n';
            }
            if (options.on_record) options.on_record(r);
            ++next_emit;
        }
    };

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stopped{false};
    auto worker = [&] {
        while (true) {
            if (options.cancel != nullptr && options.cancel->load()) {
                stopped = true;
                return;
            }
            auto i = next.fetch_add(1);
            if (i >= n) return;
            if (reused[i]) continue;
            RunRecord r;
            const auto start = std::chrono::steady_clock::now();
            try {
                r = pipeline.run(records[i]);
            } catch (const RunFailure& e) {
                r = e.record();
                spdlog::warn("{}", e.what());
            } catch (const std::exception& e) {
                r.question_id = records[i].id;
                r.scheme = pipeline.config().scheme;
                r.config_fingerprint = pipeline.fingerprint();
                r.status = RunStatus::Failed;
                r.error = e.what();
                spdlog::warn("question {}: {}", records[i].id, e.what());
            }
            if (r.status == RunStatus::Failed) {
                r.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - start)
                                      .count();
            }
            std::lock_guard lock(mu);
            results[i] = std::move(r);
            emit_ready();
        }
    };
    {
        std::lock_guard lock(mu);
        emit_ready();
    }
    const auto workers = std::max<std::size_t>(1, std::min(options.question_parallelism, n));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    // Completed records past a gap left by cancellation are still kept, in order.
    for (std::size_t i = next_emit; i < n; ++i) {
        if (!results[i]) continue;
        if (out.is_open()) out << serialize(strip_volatile(*results[i])) << '\n';
        if (options.on_record) options.on_record(*results[i]);
    }
    if (out.is_open()) {
        out.close();
        if (!out) throw DataError("write failed: " + partial_file.string());
        fs::rename(partial_file, records_file);
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!results[i]) continue;
        if (reused[i]) {
            ++summary.reused;
        } else {
            ++summary.executed;
        }
        if (results[i]->status == RunStatus::Failed) ++summary.failed;
        summary.records.push_back(std::move(*results[i]));
    }
    summary.cancelled = stopped.load() && summary.records.size() < n;
    return summary;
}

}  // namespace recite::pipeline
