#pragma once

#include "recite/backend.hpp"
#include "recite/evalkit.hpp"
#include "recite/pipeline.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace recite::config {

struct BackendConfig {
    std::string type = "scripted";  // "scripted" | "remote"
    std::string script;             // scripted: response script (.jsonl)
    backend::RemoteBackend::Options remote;
    std::string token_env = "RECITE_API_TOKEN";
    backend::RetryPolicy retry;
    std::string cache;  // optional on-disk response cache
};

struct ContextConfig {
    std::string source;  // "gold" | "bm25"
    std::string index;   // bm25: saved index
    std::string corpus;  // bm25: hint corpus directory whose hints are the doc ids
    std::string docs;    // bm25: or a {"id", "text"} JSONL file
    std::size_t top_k = 1;
};

/// Everything a run needs. Relative paths in the file resolve against the
/// file's directory; load() stores them absolute.
struct RunConfig {
    std::string dataset;
    std::string adapter = "jsonl";
    pipeline::SchemeConfig scheme;
    bool sample_exemplars = false;
    BackendConfig backend;
    std::string prompts;
    std::size_t limit = 0;
    std::string run_dir = "run";
    evalkit::NormProfile normalization;
    std::size_t question_parallelism = 1;
    std::optional<ContextConfig> context;
    std::string hint_corpus;
};

/// Parses a JSON config. Unknown keys and wrong types are ConfigErrors naming
/// the file and the dotted field path. Call check() once overrides are in.
RunConfig load(const std::string& path);
RunConfig parse(std::string_view text, const std::string& base_dir, const std::string& source);

/// Scheme invariants plus existence of every referenced file.
void check(const RunConfig& cfg, const std::string& source);

/// Canonical JSON form, as written to run.json; parse() reads it back.
std::string to_json(const RunConfig& cfg);

/// Scripted, or remote wrapped in retries; either optionally cached.
std::shared_ptr<backend::Backend> make_backend(const BackendConfig& cfg);

}  // namespace recite::config
