#include "recite/config.hpp"

#include "json_fields.hpp"
#include "recite/errors.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

namespace recite::config {

namespace {

using detail::json;
namespace fs = std::filesystem;

// Strict view of one JSON object: typed getters, and finish() rejects any key
// nobody asked for.
class Obj {
public:
    Obj(const json& j, std::string path, const std::string& source) : j_(j), path_(std::move(path)), source_(source) {
        if (!j_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(std::string_view key, const std::string& what) const {
        throw ConfigError(source_ + ": field '" + dotted(key) + "': " + what);
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    template <class T>
    T get(const char* key, T fallback) {
        if (!has(key)) return fallback;
        return as<T>(key);
    }

    template <class T>
    T need(const char* key) {
        if (!has(key)) fail(key, "required");
        return as<T>(key);
    }

    Obj child(const char* key) {
        seen_.insert(key);
        return Obj(j_.at(key), dotted(key), source_);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) fail(it.key(), "unknown field");
        }
    }

private:
    std::string dotted(std::string_view key) const {
        if (path_.empty()) return std::string(key);
        return key.empty() ? path_ : path_ + "." + std::string(key);
    }

    template <class T>
    T as(const char* key) const {
        const auto& v = j_.at(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) fail(key, "expected true/false");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) fail(key, "expected a string");
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) fail(key, "expected an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) fail(key, "expected a number");
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            if (!v.is_array()) fail(key, "expected a list of strings");
            for (const auto& e : v) {
                if (!e.is_string()) fail(key, "expected a list of strings");
            }
        }
        return v.get<T>();
    }

    const json& j_;
    std::string path_;
    const std::string& source_;
    std::set<std::string> seen_;
};

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty()) return p;
    fs::path path(p);
    if (path.is_relative()) path = fs::path(base) / path;
    return path.lexically_normal().string();
}

evalkit::NormSteps read_steps(Obj& o, evalkit::NormSteps s) {
    s.lowercase = o.get("lowercase", s.lowercase);
    s.strip_punct = o.get("strip_punct", s.strip_punct);
    s.strip_articles = o.get("strip_articles", s.strip_articles);
    s.collapse_whitespace = o.get("collapse_whitespace", s.collapse_whitespace);
    return s;
}

json steps_json(const evalkit::NormSteps& s) {
    return {{"lowercase", s.lowercase},
            {"strip_punct", s.strip_punct},
            {"strip_articles", s.strip_articles},
            {"collapse_whitespace", s.collapse_whitespace}};
}

void require_file(const std::string& source, const std::string& field, const std::string& path, bool dir) {
    std::error_code ec;
    const bool ok = dir ? fs::is_directory(path, ec) : fs::is_regular_file(path, ec);
    if (!ok) throw ConfigError(source + ": field '" + field + "': " + (dir ? "directory" : "file") + " not found: " + path);
}

}  // namespace

RunConfig parse(std::string_view text, const std::string& base_dir, const std::string& source) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": malformed JSON: " + e.what());
    }
    RunConfig c;
    Obj root(j, "", source);

    {
        auto d = root.child("dataset");
        c.dataset = resolve(base_dir, d.need<std::string>("path"));
        c.adapter = d.get<std::string>("adapter", c.adapter);
        d.finish();
    }
    auto& s = c.scheme;
    try {
        s.scheme = parse_scheme(root.need<std::string>("scheme"));
    } catch (const ConfigError& e) {
        root.fail("scheme", e.what());
    }
    s.n_paths = root.get("n_paths", s.n_paths);
    s.n_hints = root.get("n_hints", s.n_hints);
    s.shots = root.get("shots", s.shots);
    s.recitations_per_hop = root.get("recitations_per_hop", s.recitations_per_hop);
    s.exemplar_seed = root.get("exemplar_seed", s.exemplar_seed);
    s.samples_in_one_request = root.get("samples_in_one_request", s.samples_in_one_request);
    c.sample_exemplars = root.get("sample_exemplars", c.sample_exemplars);
    if (root.has("recitation")) {
        auto r = root.child("recitation");
        auto& p = s.recitation_params;
        if (r.has("strategy")) {
            try {
                p.strategy = parse_strategy(r.need<std::string>("strategy"));
            } catch (const ConfigError& e) {
                r.fail("strategy", e.what());
            }
        }
        p.k = r.get("k", p.k);
        p.temperature = r.get("temperature", p.temperature);
        p.seed = r.get("seed", p.seed);
        p.max_tokens = r.get("max_tokens", p.max_tokens);
        p.stop_sequences = r.get("stop", p.stop_sequences);
        r.finish();
    }
    if (root.has("answer")) {
        auto a = root.child("answer");
        s.answer_params.max_tokens = a.get("max_tokens", s.answer_params.max_tokens);
        s.answer_params.stop_sequences = a.get("stop", s.answer_params.stop_sequences);
        a.finish();
    }
    try {
        s.dialect = prompting::PromptDialect::from_name(root.get<std::string>("dialect", "default"));
    } catch (const ConfigError& e) {
        root.fail("dialect", e.what());
    }

    {
        auto b = root.child("backend");
        auto& bc = c.backend;
        bc.type = b.need<std::string>("type");
        if (bc.type == "scripted") {
            bc.script = resolve(base_dir, b.get<std::string>("script", ""));
        } else if (bc.type == "remote") {
            bc.remote.base_url = b.need<std::string>("base_url");
            bc.remote.model = b.need<std::string>("model");
            bc.remote.path = b.get("path", bc.remote.path);
            bc.remote.timeout = std::chrono::milliseconds(b.get<std::int64_t>("timeout_ms", bc.remote.timeout.count()));
            bc.remote.send_top_k = b.get("send_top_k", bc.remote.send_top_k);
            bc.token_env = b.get("token_env", bc.token_env);
            if (b.has("retry")) {
                auto r = b.child("retry");
                bc.retry.max_attempts = r.get("max_attempts", bc.retry.max_attempts);
                bc.retry.base_delay = std::chrono::milliseconds(r.get<std::int64_t>("base_delay_ms", bc.retry.base_delay.count()));
                bc.retry.max_delay = std::chrono::milliseconds(r.get<std::int64_t>("max_delay_ms", bc.retry.max_delay.count()));
                bc.retry.jitter_seed = r.get("jitter_seed", bc.retry.jitter_seed);
                r.finish();
                if (bc.retry.max_attempts < 1) b.fail("retry.max_attempts", "must be >= 1");
            }
        } else {
            b.fail("type", "expected \"scripted\" or \"remote\"");
        }
        bc.cache = resolve(base_dir, b.get<std::string>("cache", ""));
        b.finish();
    }

    c.prompts = resolve(base_dir, root.need<std::string>("prompts"));
    c.limit = root.get("limit", c.limit);
    c.run_dir = resolve(base_dir, root.get("run_dir", c.run_dir));
    c.hint_corpus = resolve(base_dir, root.get<std::string>("hint_corpus", ""));

    if (root.has("normalization")) {
        auto n = root.child("normalization");
        c.normalization.steps = read_steps(n, c.normalization.steps);
        if (n.has("overrides")) {
            auto o = n.child("overrides");
            for (auto name : {"NQ", "TriviaQA", "HotpotQA", "Custom"}) {
                if (o.has(name)) {
                    auto d = o.child(name);
                    c.normalization.overrides[parse_dataset(name)] = read_steps(d, c.normalization.steps);
                    d.finish();
                }
            }
            o.finish();
        }
        n.finish();
    }
    s.vote_norm = c.normalization.steps;

    if (root.has("parallelism")) {
        auto p = root.child("parallelism");
        c.question_parallelism = p.get("questions", c.question_parallelism);
        s.max_in_flight = p.get("in_flight", s.max_in_flight);
        p.finish();
    }

    if (root.has("context")) {
        auto x = root.child("context");
        ContextConfig cc;
        cc.source = x.need<std::string>("source");
        if (cc.source == "bm25") {
            cc.index = resolve(base_dir, x.need<std::string>("index"));
            cc.corpus = resolve(base_dir, x.get<std::string>("corpus", ""));
            cc.docs = resolve(base_dir, x.get<std::string>("docs", ""));
            cc.top_k = x.get("top_k", cc.top_k);
            if (cc.corpus.empty() == cc.docs.empty()) x.fail("corpus", "bm25 context needs exactly one of corpus / docs");
            if (cc.top_k < 1) x.fail("top_k", "must be >= 1");
        } else if (cc.source != "gold") {
            x.fail("source", "expected \"gold\" or \"bm25\"");
        }
        x.finish();
        c.context = cc;
    }
    root.finish();
    return c;
}

RunConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto base = fs::absolute(path).parent_path().string();
    return parse(text, base, path);
}

void check(const RunConfig& c, const std::string& source) {
    auto problems = pipeline::validate(c.scheme);
    if (!problems.empty()) throw ConfigError(source + ": " + problems.front());
    if (c.question_parallelism < 1) throw ConfigError(source + ": field 'parallelism.questions': must be >= 1");
    require_file(source, "dataset.path", c.dataset, false);
    require_file(source, "prompts", c.prompts, true);
    require_file(source, "prompts", c.prompts + "/manifest.json", false);
    if (c.backend.type == "scripted") {
        if (c.backend.script.empty()) throw ConfigError(source + ": field 'backend.script': required for scripted backend");
        require_file(source, "backend.script", c.backend.script, false);
    }
    if (!c.hint_corpus.empty()) require_file(source, "hint_corpus", c.hint_corpus, true);
    if (c.context && c.context->source == "bm25") {
        require_file(source, "context.index", c.context->index, false);
        if (!c.context->corpus.empty()) require_file(source, "context.corpus", c.context->corpus, true);
        if (!c.context->docs.empty()) require_file(source, "context.docs", c.context->docs, false);
    }
    if (c.scheme.scheme == Scheme::DiversifiedRecite && c.context) {
        throw ConfigError(source + ": field 'context': fixed contexts replace recitation; use scheme recite_answer");
    }
}

std::string to_json(const RunConfig& c) {
    const auto& s = c.scheme;
    json j;
    j["dataset"] = {{"path", c.dataset}, {"adapter", c.adapter}};
    j["scheme"] = to_string(s.scheme);
    j["n_paths"] = s.n_paths;
    j["n_hints"] = s.n_hints;
    j["shots"] = s.shots;
    j["recitations_per_hop"] = s.recitations_per_hop;
    j["exemplar_seed"] = s.exemplar_seed;
    j["sample_exemplars"] = c.sample_exemplars;
    j["samples_in_one_request"] = s.samples_in_one_request;
    const auto& r = s.recitation_params;
    j["recitation"] = {{"strategy", to_string(r.strategy)}, {"k", r.k},
                       {"temperature", r.temperature}, {"seed", r.seed},
                       {"max_tokens", r.max_tokens}, {"stop", r.stop_sequences}};
    j["answer"] = {{"max_tokens", s.answer_params.max_tokens}, {"stop", s.answer_params.stop_sequences}};
    j["dialect"] = s.dialect.label();
    json b;
    b["type"] = c.backend.type;
    if (c.backend.type == "scripted") {
        b["script"] = c.backend.script;
    } else {
        const auto& o = c.backend.remote;
        b["base_url"] = o.base_url;
        b["model"] = o.model;
        b["path"] = o.path;
        b["timeout_ms"] = o.timeout.count();
        b["send_top_k"] = o.send_top_k;
        b["token_env"] = c.backend.token_env;
        b["retry"] = {{"max_attempts", c.backend.retry.max_attempts},
                      {"base_delay_ms", c.backend.retry.base_delay.count()},
                      {"max_delay_ms", c.backend.retry.max_delay.count()},
                      {"jitter_seed", c.backend.retry.jitter_seed}};
    }
    if (!c.backend.cache.empty()) b["cache"] = c.backend.cache;
    j["backend"] = b;
    j["prompts"] = c.prompts;
    j["limit"] = c.limit;
    j["run_dir"] = c.run_dir;
    if (!c.hint_corpus.empty()) j["hint_corpus"] = c.hint_corpus;
    auto norm = steps_json(c.normalization.steps);
    for (const auto& [d, steps] : c.normalization.overrides) norm["overrides"][std::string(to_string(d))] = steps_json(steps);
    j["normalization"] = norm;
    j["parallelism"] = {{"questions", c.question_parallelism}, {"in_flight", s.max_in_flight}};
    if (c.context) {
        json x{{"source", c.context->source}};
        if (c.context->source == "bm25") {
            x["index"] = c.context->index;
            if (!c.context->corpus.empty()) x["corpus"] = c.context->corpus;
            if (!c.context->docs.empty()) x["docs"] = c.context->docs;
            x["top_k"] = c.context->top_k;
        }
        j["context"] = x;
    }
    return j.dump(2) + "\n";
}

std::shared_ptr<backend::Backend> make_backend(const BackendConfig& cfg) {
    std::shared_ptr<backend::Backend> b;
    if (cfg.type == "scripted") {
        b = backend::ScriptedBackend::from_file(cfg.script);
    } else if (cfg.type == "remote") {
        auto opts = cfg.remote;
        if (!cfg.token_env.empty()) {
            if (const char* token = std::getenv(cfg.token_env.c_str())) opts.auth_token = token;
        }
        b = std::make_shared<backend::RetryingBackend>(std::make_shared<backend::RemoteBackend>(opts), cfg.retry);
    } else {
        throw ConfigError("unknown backend type '" + cfg.type + "'");
    }
    if (!cfg.cache.empty()) b = std::make_shared<backend::CachingBackend>(b, cfg.cache);
    return b;
}

}  // namespace recite::config
