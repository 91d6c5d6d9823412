#pragma once

#include "recite/core_model.hpp"
#include "recite/errors.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace recite::backend {

struct GenerationRequest {
    std::string prompt;
    SamplingParams params;
    int n_samples = 1;

    bool operator==(const GenerationRequest&) const = default;
};

struct GenerationResult {
    std::vector<std::string> texts;
    std::map<std::string, std::string> meta;
    bool cache_hit = false;
};

enum class ErrorKind { Timeout, RateLimited, MalformedResponse, ScriptMiss, HttpError, InvalidRequest, Cancelled };
std::string_view to_string(ErrorKind k);

class BackendError : public Error {
public:
    BackendError(ErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept {
        return kind_ == ErrorKind::Timeout || kind_ == ErrorKind::RateLimited;
    }

private:
    ErrorKind kind_;
};

/// Problems with a request that no backend should see (empty prompt,
/// greedy with several samples, invalid params). Empty when valid.
std::vector<std::string> validate(const GenerationRequest& req);

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stops);

/// Uniform text-generation interface. Implementations must be safe to call
/// from many threads at once.
class Backend {
public:
    virtual ~Backend() = default;
    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    /// Stable identifier that goes into cache keys and fingerprints.
    virtual std::string id() const = 0;
};

/// Deterministic backend driven by a script of prompt-hash -> response queue.
///
/// The i-th sample of a request with seed s receives
/// queue[(s + i) mod queue.size()], so output is a pure function of
/// (prompt, seed, sample index). Queue entries may also be scripted errors.
/// Prompts without an entry fall through to an optional responder callback,
/// and otherwise fail with ScriptMiss naming the prompt hash.
class ScriptedBackend final : public Backend {
public:
    struct Entry {
        std::string text;
        std::optional<ErrorKind> error;  // set => this sample throws
    };
    using Responder = std::function<std::optional<std::vector<std::string>>(std::string_view prompt)>;

    ScriptedBackend() = default;

    /// Loads a `.jsonl` script: one object per line with `responses` and
    /// either `prompt_hash` (hex SHA-256 of the prompt) or `prompt`. A
    /// response is a string or {"error": "<timeout|rate_limited|...>"}.
    static std::unique_ptr<ScriptedBackend> from_file(const std::string& path);

    void add(std::string_view prompt, std::vector<std::string> responses);
    void add_entries(std::string_view prompt, std::vector<Entry> entries);
    void add_hash(std::string prompt_hash, std::vector<Entry> entries);
    void set_responder(Responder responder) { responder_ = std::move(responder); }

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override { return "scripted"; }

    /// Number of generate calls served so far.
    std::size_t calls() const { return calls_.load(); }

private:
    std::unordered_map<std::string, std::vector<Entry>> script_;
    Responder responder_;
    std::atomic<std::size_t> calls_{0};
};

/// Client for an HTTP JSON completions-style endpoint (POST <base>/v1/completions).
class RemoteBackend final : public Backend {
public:
    struct Options {
        std::string base_url;               // e.g. "http://localhost:8000"
        std::string path = "/v1/completions";
        std::string model;
        std::string auth_token;             // sent as "Authorization: Bearer ..."
        std::chrono::milliseconds timeout{60000};
        bool send_top_k = true;             // some providers reject unknown fields
    };

    explicit RemoteBackend(Options options);

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override { return "remote:" + options_.base_url + "/" + options_.model; }

    /// JSON request body (exposed for tests).
    std::string request_body(const GenerationRequest& request) const;
    /// Maps a response body to texts; throws MalformedResponse.
    static std::vector<std::string> parse_response(std::string_view body, int n_samples,
                                                   std::map<std::string, std::string>* meta);

private:
    Options options_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{30000};
    std::uint64_t jitter_seed = 0x5eed;
};

/// Retries Timeout and RateLimited with exponential backoff plus jitter.
class RetryingBackend final : public Backend {
public:
    RetryingBackend(std::shared_ptr<Backend> inner, RetryPolicy policy = {})
        : inner_(std::move(inner)), policy_(policy) {}

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override { return inner_->id(); }

    /// Delay before attempt `attempt` (1-based retry number), jitter included.
    std::chrono::milliseconds backoff(int attempt, std::uint64_t salt) const;

private:
    std::shared_ptr<Backend> inner_;
    RetryPolicy policy_;
};

/// Stable key over (backend id, prompt bytes, params, n_samples).
std::string cache_key(std::string_view backend_id, const GenerationRequest& request);

/// Append-only on-disk cache around another backend. Corrupt lines are
/// skipped with a warning; I/O failures degrade to cache misses. The first
/// value stored under a key wins, so concurrent misses converge.
class CachingBackend final : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::string cache_path);

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override { return inner_->id(); }

    std::size_t size() const;
    std::size_t corrupt_lines() const { return corrupt_lines_; }

private:
    void load();
    std::vector<std::string> insert(const std::string& key, std::vector<std::string> texts);

    std::shared_ptr<Backend> inner_;
    std::string path_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, std::vector<std::string>> entries_;
    std::size_t corrupt_lines_ = 0;
};

/// One slot of a batch: exactly one of result / error is set.
struct BatchSlot {
    std::optional<GenerationResult> result;
    std::optional<BackendError> error;

    bool ok() const { return result.has_value(); }
};

/// Runs requests with at most `max_in_flight` outstanding at once. Results are
/// positionally aligned with `requests`; per-request failures stay in their
/// slot. If `cancel` becomes true, in-flight requests finish, nothing new is
/// started, and the call throws BackendError(Cancelled).
std::vector<BatchSlot> generate_batch(Backend& backend, const std::vector<GenerationRequest>& requests,
                                      std::size_t max_in_flight,
                                      const std::atomic<bool>* cancel = nullptr);

}  // namespace recite::backend
