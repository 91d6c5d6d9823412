#include "recite/backend.hpp"

#include "json_fields.hpp"
#include "recite/hashing.hpp"

#include <spdlog/spdlog.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <algorithm>
#include <fstream>
#include <random>
#include <thread>

namespace recite::backend {

namespace {

using detail::json;

constexpr std::pair<ErrorKind, std::string_view> kKinds[] = {
    {ErrorKind::Timeout, "timeout"},
    {ErrorKind::RateLimited, "rate_limited"},
    {ErrorKind::MalformedResponse, "malformed_response"},
    {ErrorKind::ScriptMiss, "script_miss"},
    {ErrorKind::HttpError, "http_error"},
    {ErrorKind::InvalidRequest, "invalid_request"},
    {ErrorKind::Cancelled, "cancelled"},
};

ErrorKind parse_kind(std::string_view name) {
    for (auto [k, n] : kKinds) {
        if (n == name) return k;
    }
    throw DataError("unknown scripted error kind '" + std::string(name) + "'");
}

void require_valid(const GenerationRequest& req) {
    auto problems = validate(req);
    if (!problems.empty()) throw BackendError(ErrorKind::InvalidRequest, "invalid request: " + problems.front());
}

std::string excerpt(std::string_view prompt) {
    constexpr std::size_t kMax = 120;
    std::string out(prompt.substr(prompt.size() > kMax ? prompt.size() - kMax : 0));
    for (auto& c : out) {
        if (c == '\n') c = ' ';
    }
    return (prompt.size() > kMax ? "..." : "") + out;
}

std::string cache_check(const std::string& key, const std::vector<std::string>& texts) {
    json j{{"key", key}, {"texts", texts}};
    return sha256_hex(detail::dump_line(j));
}

}  // namespace

std::string_view to_string(ErrorKind k) {
    for (auto [kind, name] : kKinds) {
        if (kind == k) return name;
    }
    return "?";
}

std::vector<std::string> validate(const GenerationRequest& req) {
    std::vector<std::string> v;
    if (req.prompt.empty()) v.emplace_back("prompt empty");
    if (req.n_samples < 1) v.emplace_back("n_samples must be positive");
    if (req.params.strategy == Strategy::Greedy && req.n_samples != 1) {
        v.emplace_back("greedy decoding is deterministic; n_samples must be 1");
    }
    for (auto& p : recite::validate(req.params)) v.push_back(std::move(p));
    return v;
}

std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stops) {
    auto cut = text.size();
    for (const auto& s : stops) {
        if (s.empty()) continue;
        auto pos = text.find(s);
        if (pos != std::string_view::npos) cut = std::min(cut, pos);
    }
    return std::string(text.substr(0, cut));
}

// ------------------------------------------------------------------ scripted

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open script " + path);
    auto b = std::make_unique<ScriptedBackend>();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            detail::Fields f(line);
            std::string hash;
            if (f.has("prompt_hash")) {
                hash = f.get<std::string>("prompt_hash");
            } else if (f.has("prompt")) {
                hash = sha256_hex(f.get<std::string>("prompt"));
            } else {
                f.fail("prompt_hash", "entry needs 'prompt_hash' or 'prompt'");
            }
            auto responses = f.get<json>("responses");
            if (!responses.is_array() || responses.empty()) f.fail("responses", "expected a nonempty array");
            std::vector<Entry> entries;
            for (const auto& r : responses) {
                if (r.is_string()) {
                    entries.push_back(Entry{r.get<std::string>(), std::nullopt});
                } else if (r.is_object() && r.contains("error") && r["error"].is_string()) {
                    entries.push_back(Entry{{}, parse_kind(r["error"].get<std::string>())});
                } else {
                    f.fail("responses", "each response is a string or {\"error\": kind}");
                }
            }
            b->add_hash(std::move(hash), std::move(entries));
        } catch (const Error& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return b;
}

void ScriptedBackend::add(std::string_view prompt, std::vector<std::string> responses) {
    std::vector<Entry> entries;
    for (auto& r : responses) entries.push_back(Entry{std::move(r), std::nullopt});
    add_entries(prompt, std::move(entries));
}

void ScriptedBackend::add_entries(std::string_view prompt, std::vector<Entry> entries) {
    add_hash(sha256_hex(prompt), std::move(entries));
}

void ScriptedBackend::add_hash(std::string prompt_hash, std::vector<Entry> entries) {
    if (entries.empty()) throw DataError("scripted response queue is empty");
    script_[std::move(prompt_hash)] = std::move(entries);
}

GenerationResult ScriptedBackend::generate(const GenerationRequest& request) {
    require_valid(request);
    ++calls_;
    auto hash = sha256_hex(request.prompt);
    std::vector<Entry> dynamic;
    const std::vector<Entry>* entries = nullptr;
    if (auto it = script_.find(hash); it != script_.end()) {
        entries = &it->second;
    } else if (responder_) {
        if (auto texts = responder_(request.prompt); texts && !texts->empty()) {
            for (auto& t : *texts) dynamic.push_back(Entry{std::move(t), std::nullopt});
            entries = &dynamic;
        }
    }
    if (entries == nullptr) {
        throw BackendError(ErrorKind::ScriptMiss,
                           "no scripted response for prompt " + hash + " (" + excerpt(request.prompt) + ")");
    }
    GenerationResult out;
    out.meta["model"] = "scripted";
    for (int i = 0; i < request.n_samples; ++i) {
        const auto& e = (*entries)[(request.params.seed + static_cast<std::uint64_t>(i)) % entries->size()];
        if (e.error) throw BackendError(*e.error, "scripted " + std::string(to_string(*e.error)) + " for " + hash);
        out.texts.push_back(truncate_at_stop(e.text, request.params.stop_sequences));
    }
    return out;
}

// -------------------------------------------------------------------- remote

RemoteBackend::RemoteBackend(Options options) : options_(std::move(options)) {
    if (options_.base_url.empty()) throw ConfigError("remote backend needs a base_url");
    if (options_.model.empty()) throw ConfigError("remote backend needs a model name");
}

std::string RemoteBackend::request_body(const GenerationRequest& request) const {
    const auto& p = request.params;
    json j;
    j["model"] = options_.model;
    j["prompt"] = request.prompt;
    j["max_tokens"] = p.max_tokens;
    j["n"] = request.n_samples;
    j["seed"] = p.seed;
    if (p.strategy == Strategy::Greedy) {
        j["temperature"] = 0.0;
    } else {
        j["temperature"] = p.temperature;
        if (options_.send_top_k) j["top_k"] = p.k;
    }
    if (!p.stop_sequences.empty()) j["stop"] = p.stop_sequences;
    return detail::dump_line(j);
}

std::vector<std::string> RemoteBackend::parse_response(std::string_view body, int n_samples,
                                                       std::map<std::string, std::string>* meta) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw BackendError(ErrorKind::MalformedResponse, std::string("response is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array()) {
        throw BackendError(ErrorKind::MalformedResponse, "response lacks a 'choices' array");
    }
    const auto& choices = j["choices"];
    if (static_cast<int>(choices.size()) != n_samples) {
        throw BackendError(ErrorKind::MalformedResponse, "expected " + std::to_string(n_samples) + " choices, got " +
                                                             std::to_string(choices.size()));
    }
    std::vector<std::string> texts(choices.size());
    std::vector<bool> filled(choices.size(), false);
    for (std::size_t i = 0; i < choices.size(); ++i) {
        const auto& c = choices[i];
        if (!c.is_object() || !c.contains("text") || !c["text"].is_string()) {
            throw BackendError(ErrorKind::MalformedResponse, "choice " + std::to_string(i) + " lacks 'text'");
        }
        std::size_t slot = i;
        if (c.contains("index") && c["index"].is_number_unsigned()) slot = c["index"].get<std::size_t>();
        if (slot >= texts.size() || filled[slot]) {
            throw BackendError(ErrorKind::MalformedResponse, "choice indices are not a permutation");
        }
        texts[slot] = c["text"].get<std::string>();
        filled[slot] = true;
    }
    if (meta != nullptr) {
        if (j.contains("model") && j["model"].is_string()) (*meta)["model"] = j["model"].get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            for (const auto& key : {"prompt_tokens", "completion_tokens", "total_tokens"}) {
                if (j["usage"].contains(key) && j["usage"][key].is_number_integer()) {
                    (*meta)[key] = std::to_string(j["usage"][key].get<long long>());
                }
            }
        }
    }
    return texts;
}

GenerationResult RemoteBackend::generate(const GenerationRequest& request) {
    require_valid(request);
    httplib::Client client(options_.base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!options_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + options_.auth_token);

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(options_.path, headers, request_body(request), "application/json");
    const auto latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    if (!res) {
        auto err = res.error();
        auto what = "request to " + options_.base_url + " failed: " + httplib::to_string(err);
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read || err == httplib::Error::Write) {
            throw BackendError(ErrorKind::Timeout, what);
        }
        throw BackendError(ErrorKind::HttpError, what);
    }
    if (res->status == 429) throw BackendError(ErrorKind::RateLimited, "HTTP 429 from " + options_.base_url);
    if (res->status == 408 || res->status == 503 || res->status == 504) {
        throw BackendError(ErrorKind::Timeout, "HTTP " + std::to_string(res->status) + " from " + options_.base_url);
    }
    if (res->status != 200) {
        throw BackendError(ErrorKind::HttpError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    GenerationResult out;
    out.meta["model"] = options_.model;
    out.texts = parse_response(res->body, request.n_samples, &out.meta);
    for (auto& t : out.texts) t = truncate_at_stop(t, request.params.stop_sequences);
    out.meta["latency_ms"] = std::to_string(latency);
    return out;
}

// --------------------------------------------------------------------- retry

std::chrono::milliseconds RetryingBackend::backoff(int attempt, std::uint64_t salt) const {
    const double base = static_cast<double>(policy_.base_delay.count());
    double delay = std::min(base * std::pow(2.0, attempt - 1), static_cast<double>(policy_.max_delay.count()));
    std::mt19937_64 rng(mix_seed(policy_.jitter_seed ^ salt, static_cast<std::uint64_t>(attempt)));
    std::uniform_real_distribution<double> jitter(0.5, 1.0);
    return std::chrono::milliseconds(static_cast<long long>(delay * jitter(rng)));
}

GenerationResult RetryingBackend::generate(const GenerationRequest& request) {
    const auto salt = std::hash<std::string>{}(request.prompt) ^ request.params.seed;
    for (int attempt = 1;; ++attempt) {
        try {
            auto out = inner_->generate(request);
            if (attempt > 1) out.meta["attempts"] = std::to_string(attempt);
            return out;
        } catch (const BackendError& e) {
            if (!e.retryable() || attempt >= policy_.max_attempts) throw;
            auto wait = backoff(attempt, salt);
            spdlog::debug("retrying after {} ({} ms, attempt {})", e.what(), wait.count(), attempt);
            std::this_thread::sleep_for(wait);
        }
    }
}

// --------------------------------------------------------------------- cache

std::string cache_key(std::string_view backend_id, const GenerationRequest& request) {
    json j;
    j["backend"] = backend_id;
    j["prompt"] = request.prompt;
    j["params"] = json::parse(serialize(request.params));
    j["n_samples"] = request.n_samples;
    return sha256_hex(detail::dump_line(j));
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::string cache_path)
    : inner_(std::move(inner)), path_(std::move(cache_path)) {
    load();
}

void CachingBackend::load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;  // no cache yet
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto j = json::parse(line);
            auto key = j.at("key").get<std::string>();
            auto texts = j.at("texts").get<std::vector<std::string>>();
            if (j.at("check").get<std::string>() != cache_check(key, texts)) throw std::runtime_error("checksum mismatch");
            entries_.emplace(std::move(key), std::move(texts));
        } catch (const std::exception& e) {
            ++corrupt_lines_;
            spdlog::warn("cache {}:{} ignored ({})", path_, lineno, e.what());
        }
    }
}

std::size_t CachingBackend::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::vector<std::string> CachingBackend::insert(const std::string& key, std::vector<std::string> texts) {
    std::lock_guard lock(mu_);
    auto [it, inserted] = entries_.emplace(key, std::move(texts));
    if (!inserted) return it->second;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    json j{{"key", key}, {"texts", it->second}, {"check", cache_check(key, it->second)}};
    out << detail::dump_line(j) << '\n';
    out.flush();
    if (!out) spdlog::warn("cache write to {} failed; continuing without persisting", path_);
    return it->second;
}

GenerationResult CachingBackend::generate(const GenerationRequest& request) {
    require_valid(request);
    const auto key = cache_key(inner_->id(), request);
    {
        std::lock_guard lock(mu_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            GenerationResult hit;
            hit.texts = it->second;
            hit.cache_hit = true;
            hit.meta["cache"] = "hit";
            return hit;
        }
    }
    auto out = inner_->generate(request);
    out.texts = insert(key, std::move(out.texts));
    return out;
}

// --------------------------------------------------------------------- batch

std::vector<BatchSlot> generate_batch(Backend& backend, const std::vector<GenerationRequest>& requests,
                                      std::size_t max_in_flight, const std::atomic<bool>* cancel) {
    if (max_in_flight == 0) throw BackendError(ErrorKind::InvalidRequest, "max_in_flight must be >= 1");
    std::vector<BatchSlot> slots(requests.size());
    std::vector<char> done(requests.size(), 0);
    std::atomic<std::size_t> next{0};
    auto cancelled = [cancel] { return cancel != nullptr && cancel->load(); };
    auto worker = [&] {
        while (!cancelled()) {
            auto i = next.fetch_add(1);
            if (i >= requests.size()) return;
            try {
                slots[i].result = backend.generate(requests[i]);
            } catch (const BackendError& e) {
                slots[i].error = e;
            } catch (const std::exception& e) {
                slots[i].error = BackendError(ErrorKind::MalformedResponse, e.what());
            }
            done[i] = 1;
        }
    };
    const auto workers = std::min(max_in_flight, requests.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (std::find(done.begin(), done.end(), 0) != done.end()) {
        throw BackendError(ErrorKind::Cancelled, "batch cancelled");
    }
    return slots;
}

}  // namespace recite::backend
