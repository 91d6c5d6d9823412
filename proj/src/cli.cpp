#include "recite/cli.hpp"

#include "json_fields.hpp"
#include "recite/backend.hpp"
#include "recite/config.hpp"
#include "recite/datasets.hpp"
#include "recite/evalkit.hpp"
#include "recite/hintcorpus.hpp"
#include "recite/jsonl.hpp"
#include "recite/pipeline.hpp"
#include "recite/promptset.hpp"
#include "recite/retrieval.hpp"

#include "CLI11.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace recite::cli {

namespace {

using detail::json;
namespace fs = std::filesystem;

struct Interrupted : Error {
    using Error::Error;
};

void write_file(const fs::path& p, std::string_view text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw DataError("cannot write " + p.string());
}

std::string now_iso() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ------------------------------------------------------------------ run

struct RunOverrides {
    std::string scripted;
    std::string run_dir;
    std::optional<std::size_t> limit;
    std::optional<int> paths;
    std::optional<int> shots;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> exemplar_seed;
    std::optional<std::size_t> question_parallelism;
    bool resume = false;
};

void apply(const RunOverrides& o, config::RunConfig& c) {
    if (!o.scripted.empty()) {
        c.backend.type = "scripted";
        c.backend.script = fs::absolute(o.scripted).lexically_normal().string();
    }
    if (!o.run_dir.empty()) c.run_dir = fs::absolute(o.run_dir).lexically_normal().string();
    if (o.limit) c.limit = *o.limit;
    if (o.paths) c.scheme.n_paths = *o.paths;
    if (o.shots) c.scheme.shots = *o.shots;
    if (o.seed) c.scheme.recitation_params.seed = *o.seed;
    if (o.exemplar_seed) {
        c.scheme.exemplar_seed = *o.exemplar_seed;
        c.sample_exemplars = true;
    }
    if (o.question_parallelism) c.question_parallelism = *o.question_parallelism;
}

std::optional<pipeline::ContextProvider> make_context(const config::RunConfig& c) {
    if (!c.context) return std::nullopt;
    const auto& cc = *c.context;
    if (cc.source == "gold") {
        return pipeline::ContextProvider{"gold", [](const QuestionRecord& q) {
                                             return q.gold_evidence ? std::vector<std::string>{*q.gold_evidence}
                                                                    : std::vector<std::string>{};
                                         }};
    }
    auto index = std::make_shared<retrieval::Bm25Index>(retrieval::Bm25Index::load(cc.index));
    auto texts = std::make_shared<std::unordered_map<std::string, std::string>>();
    if (!cc.corpus.empty()) {
        const auto corpus = hintcorpus::Corpus::load(cc.corpus);
        for (const auto& p : corpus.passages()) texts->emplace(p.hint, p.text);
    } else {
        std::ifstream in(cc.docs, std::ios::binary);
        if (!in) throw DataError("cannot open " + cc.docs);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                detail::Fields f(line);
                texts->emplace(f.get<std::string>("id"), f.get<std::string>("text"));
            } catch (const ParseError& e) {
                throw DataError(cc.docs + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    const auto k = cc.top_k;
    return pipeline::ContextProvider{"bm25", [index, texts, k](const QuestionRecord& q) {
                                         std::vector<std::string> out;
                                         for (const auto& hit : index->top_k(q.question, k)) {
                                             auto it = texts->find(hit.id);
                                             if (it == texts->end()) {
                                                 throw DataError("index document '" + hit.id + "' has no text");
                                             }
                                             out.push_back(it->second);
                                         }
                                         return out;
                                     }};
}

struct RunOutcome {
    evalkit::EvalReport report;
    pipeline::RunSummary summary;
};

RunOutcome execute_run(const config::RunConfig& c, const std::string& source, bool resume) {
    config::check(c, source);
    auto questions = datasets::load(c.dataset, c.adapter);
    if (c.limit > 0 && questions.size() > c.limit) questions.resize(c.limit);
    if (questions.empty()) throw DataError(c.dataset + ": no questions");

    auto prompts = promptset::load(c.prompts);
    auto exemplars = promptset::select(prompts, c.scheme.scheme, c.scheme.shots,
                                       c.sample_exemplars ? std::optional(c.scheme.exemplar_seed) : std::nullopt);
    auto backend = config::make_backend(c.backend);
    std::optional<hintcorpus::Corpus> corpus;
    if (!c.hint_corpus.empty()) corpus = hintcorpus::Corpus::load(c.hint_corpus);
    pipeline::Pipeline pipe(*backend, c.scheme, exemplars, make_context(c), corpus ? &*corpus : nullptr);

    const fs::path dir(c.run_dir);
    fs::create_directories(dir);
    write_file(dir / "run.json", config::to_json(c));
    write_jsonl((dir / "questions.jsonl").string(), questions);
    const auto started = now_iso();

    pipeline::RunOptions opts;
    opts.resume = resume;
    opts.run_dir = dir.string();
    opts.question_parallelism = c.question_parallelism;
    opts.cancel = &cancel_flag();
    std::size_t done = 0;
    const std::size_t step = std::max<std::size_t>(1, questions.size() / 10);
    opts.on_record = [&](const RunRecord&) {
        if (++done % step == 0 || done == questions.size()) spdlog::info("{}/{} questions", done, questions.size());
    };
    spdlog::info("run {}: {} questions, scheme {}, fingerprint {}", dir.string(), questions.size(),
                 to_string(c.scheme.scheme), pipe.fingerprint().substr(0, 12));

    RunOutcome out;
    out.summary = pipeline::run_dataset(pipe, questions, opts);
    out.report = evalkit::aggregate_report(out.summary.records, questions, c.normalization);
    write_file(dir / "report.json", evalkit::report_to_json(out.report));
    json meta{{"started", started},
              {"finished", now_iso()},
              {"executed", out.summary.executed},
              {"reused", out.summary.reused},
              {"failed", out.summary.failed},
              {"cancelled", out.summary.cancelled},
              {"fingerprint", pipe.fingerprint()}};
    write_file(dir / "meta.json", meta.dump(2) + "\n");
    if (out.summary.cancelled) throw Interrupted("interrupted; completed records saved to " + dir.string());
    return out;
}

int cmd_run(const std::string& config_path, const RunOverrides& o) {
    auto c = config::load(config_path);
    apply(o, c);
    auto out = execute_run(c, config_path, o.resume);
    const auto& r = out.report;
    std::cout << fmt::format("EM {:.2f}  F1 {:.2f}  ({} questions, {} failed, {} reused)\n", 100.0 * r.em,
                             100.0 * r.f1, r.n_questions, r.n_failed, out.summary.reused);
    if (out.summary.executed > 0 && out.summary.failed == out.summary.executed) {
        spdlog::error("every question failed; see records.jsonl for the backend errors");
        return kBackendError;
    }
    return kOk;
}

// -------------------------------------------------------------- analyze

std::vector<std::size_t> parse_counts(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            auto v = std::stoull(item, &used);
            if (used != item.size() || v == 0) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("bad count '" + item + "' in '" + text + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty count list");
    return out;
}

int cmd_analyze(const std::string& run_dir, const std::string& counts_text, std::size_t trials, std::uint64_t seed,
                const std::string& out_dir) {
    const fs::path dir(run_dir);
    if (!fs::is_regular_file(dir / "records.jsonl")) throw DataError(run_dir + ": no records.jsonl");
    auto records = read_jsonl<RunRecord>((dir / "records.jsonl").string());
    if (records.empty()) throw DataError(run_dir + ": records.jsonl is empty");
    auto questions = read_jsonl<QuestionRecord>((dir / "questions.jsonl").string());
    evalkit::NormProfile profile;
    if (fs::is_regular_file(dir / "run.json")) {
        std::ifstream in(dir / "run.json", std::ios::binary);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        profile = config::parse(text, dir.string(), (dir / "run.json").string()).normalization;
    }

    std::vector<std::size_t> counts;
    if (counts_text.empty()) {
        std::size_t min_k = 0;
        for (const auto& r : records) {
            if (r.status == RunStatus::Ok) min_k = min_k == 0 ? r.paths.size() : std::min(min_k, r.paths.size());
        }
        for (std::size_t c : {1, 5, 10, 20}) {
            if (c <= min_k) counts.push_back(c);
        }
    } else {
        counts = parse_counts(counts_text);
    }

    auto report = evalkit::aggregate_report(records, questions, profile);
    const fs::path out = out_dir.empty() ? dir : fs::path(out_dir);
    fs::create_directories(out);
    const auto categories = evalkit::format_category_table(report);
    const auto quadrants = evalkit::format_quadrant_table(report);
    write_file(out / "report.json", evalkit::report_to_json(report));
    write_file(out / "categories.txt", categories);
    write_file(out / "quadrants.txt", quadrants);
    std::cout << fmt::format("EM {:.2f}  F1 {:.2f}  ({} questions, {} failed)\n\n", 100.0 * report.em,
                             100.0 * report.f1, report.n_questions, report.n_failed)
              << categories << "\n"
              << quadrants;
    if (!counts.empty()) {
        auto curve = evalkit::path_subsample_curve(records, questions, counts, trials, seed, profile);
        const auto csv = evalkit::curve_to_csv(curve);
        write_file(out / "subsample.csv", csv);
        std::cout << "\n" << csv;
    }
    return kOk;
}

// --------------------------------------------------------------- corpus

int cmd_build_corpus(const std::string& dump, const std::string& format, const std::string& out_dir) {
    std::ifstream in(dump, std::ios::binary);
    if (!in) throw DataError("cannot open dump " + dump);
    std::vector<hintcorpus::DumpDocument> docs;
    try {
        docs = format == "markup" ? hintcorpus::read_markup_dump(in) : hintcorpus::read_jsonl_dump(in);
    } catch (const DataError& e) {
        throw DataError(dump + ": " + e.what());
    }
    auto corpus = hintcorpus::build_corpus(docs);
    corpus.save(out_dir);
    std::cout << fmt::format("{} pages, {} passages -> {}\n", docs.size(), corpus.size(), out_dir);
    return kOk;
}

int cmd_gen_questions(const std::string& corpus_dir, std::size_t n, std::uint64_t seed,
                      const std::string& prompts_dir, const std::string& scripted,
                      const std::string& config_path, const std::string& out_path) {
    auto corpus = hintcorpus::Corpus::load(corpus_dir);
    std::shared_ptr<backend::Backend> b;
    prompting::PromptDialect dialect;
    std::string prompts = prompts_dir;
    std::size_t in_flight = 8;
    if (!config_path.empty()) {
        auto c = config::load(config_path);
        if (!scripted.empty()) {
            c.backend = config::BackendConfig{};
            c.backend.script = scripted;
        }
        b = config::make_backend(c.backend);
        dialect = c.scheme.dialect;
        in_flight = c.scheme.max_in_flight;
        if (prompts.empty()) prompts = c.prompts;
    } else if (!scripted.empty()) {
        b = backend::ScriptedBackend::from_file(scripted);
    } else {
        throw ConfigError("gen-questions needs --scripted or --config for the backend");
    }
    if (prompts.empty()) throw ConfigError("gen-questions needs --prompts (or a config with prompts)");
    auto set = promptset::load(prompts);
    if (set.question_gen.size() < hintcorpus::kQuestionGenShots) {
        throw ConfigError(prompts + ": question_gen needs " + std::to_string(hintcorpus::kQuestionGenShots) +
                          " exemplars, found " + std::to_string(set.question_gen.size()));
    }
    std::vector<prompting::QuestionGenExemplar> shots(set.question_gen.begin(),
                                                      set.question_gen.begin() + hintcorpus::kQuestionGenShots);
    auto result = hintcorpus::generate_synthetic_triples(corpus, n, shots, *b, seed, SamplingParams::greedy(64),
                                                         dialect, in_flight);
    write_jsonl(out_path, result.triples);
    std::cout << fmt::format("{} triples -> {} ({} empty, {} backend failures)\n", result.triples.size(), out_path,
                             result.dropped_empty, result.backend_failures);
    return kOk;
}

int cmd_index_build(const std::string& corpus_dir, const std::string& docs_path, const std::string& out,
                    double k1, double b) {
    std::vector<std::pair<std::string, std::string>> docs;
    if (!corpus_dir.empty()) {
        const auto corpus = hintcorpus::Corpus::load(corpus_dir);
        for (const auto& p : corpus.passages()) docs.emplace_back(p.hint, p.text);
    } else {
        std::ifstream in(docs_path, std::ios::binary);
        if (!in) throw DataError("cannot open " + docs_path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                detail::Fields f(line);
                docs.emplace_back(f.get<std::string>("id"), f.get<std::string>("text"));
            } catch (const ParseError& e) {
                throw DataError(docs_path + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    auto index = retrieval::Bm25Index::build(docs, retrieval::Bm25Params{k1, b});
    index.save(out);
    std::cout << fmt::format("{} documents, {} terms -> {}\n", index.doc_count(), index.vocabulary_size(), out);
    return kOk;
}

int cmd_index_query(const std::string& index_path, const std::string& query, std::size_t k) {
    auto index = retrieval::Bm25Index::load(index_path);
    auto hits = index.top_k(query, k);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        std::cout << fmt::format("{}\t{:.6f}\t{}\n", i + 1, hits[i].score, hits[i].id);
    }
    return kOk;
}

// ----------------------------------------------------------- seed sweep

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0};
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            auto v = std::stoull(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("bad seed '" + item + "' in '" + text + "'");
        }
    }
    if (out.size() < 2) throw ConfigError("seed-sweep needs at least two seeds");
    if (std::set<std::uint64_t>(out.begin(), out.end()).size() != out.size()) {
        throw ConfigError("seed list '" + text + "' repeats a seed");
    }
    return out;
}

int cmd_seed_sweep(const std::string& config_path, const RunOverrides& o, const std::string& seeds_text) {
    const auto seeds = parse_seeds(seeds_text);
    auto base = config::load(config_path);
    apply(o, base);
    std::vector<double> em, f1;
    json per_seed = json::array();
    for (auto seed : seeds) {
        auto c = base;
        c.scheme.exemplar_seed = seed;
        c.sample_exemplars = true;
        c.run_dir = (fs::path(base.run_dir) / ("seed-" + std::to_string(seed))).string();
        auto out = execute_run(c, config_path, o.resume);
        em.push_back(out.report.em);
        f1.push_back(out.report.f1);
        per_seed.push_back({{"seed", seed}, {"em", out.report.em}, {"f1", out.report.f1},
                            {"failed", out.report.n_failed}, {"run_dir", c.run_dir}});
        std::cout << fmt::format("seed {:>6}  EM {:6.2f}  F1 {:6.2f}\n", seed, 100.0 * out.report.em,
                                 100.0 * out.report.f1);
    }
    auto [em_mean, em_std] = mean_std(em);
    auto [f1_mean, f1_std] = mean_std(f1);
    json summary{{"seeds", per_seed},
                 {"em_mean", em_mean}, {"em_std", em_std},
                 {"f1_mean", f1_mean}, {"f1_std", f1_std}};
    write_file(fs::path(base.run_dir) / "sweep.json", summary.dump(2) + "\n");
    std::cout << fmt::format("mean     EM {:6.2f} ± {:.2f}  F1 {:6.2f} ± {:.2f}\n", 100.0 * em_mean, 100.0 * em_std,
                             100.0 * f1_mean, 100.0 * f1_std);
    return kOk;
}

void add_run_overrides(CLI::App* cmd, RunOverrides& o) {
    cmd->add_option("--scripted", o.scripted, "Use the scripted backend with this response script")
        ->check(CLI::ExistingFile);
    cmd->add_option("--run-dir", o.run_dir, "Output directory (overrides run_dir)");
    cmd->add_option("--limit", o.limit, "Evaluate only the first N questions");
    cmd->add_option("--paths", o.paths, "Self-consistency paths per question");
    cmd->add_option("--shots", o.shots, "Few-shot exemplars per prompt");
    cmd->add_option("--seed", o.seed, "Sampling seed");
    cmd->add_option("--exemplar-seed", o.exemplar_seed, "Sample exemplars with this seed instead of file order");
    cmd->add_option("--question-parallelism", o.question_parallelism, "Questions in flight at once");
    cmd->add_flag("--resume", o.resume, "Reuse finished records with a matching fingerprint");
}

}  // namespace

std::atomic<bool>& cancel_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

int run_main(const std::vector<std::string>& args) {
    CLI::App app{"Recitation-augmented closed-book QA harness"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    std::string config_path;
    RunOverrides run_o;
    auto* run = app.add_subcommand("run", "Run a configured scheme over a dataset");
    run->add_option("-c,--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    add_run_overrides(run, run_o);

    std::string run_dir, counts, analyze_out;
    std::size_t trials = 5;
    std::uint64_t analyze_seed = 0;
    auto* analyze = app.add_subcommand("analyze", "Error analysis and path-count curve for a run directory");
    analyze->add_option("run_dir", run_dir, "Run directory")->required();
    analyze->add_option("--counts", counts, "Path counts, comma separated (default 1,5,10,20 up to K)");
    analyze->add_option("--trials", trials, "Random subsets per count")->check(CLI::PositiveNumber);
    analyze->add_option("--seed", analyze_seed, "Subsampling seed");
    analyze->add_option("--out", analyze_out, "Output directory (default: the run directory)");

    std::string dump, format = "jsonl", corpus_out;
    auto* build = app.add_subcommand("build-corpus", "Build a passage-hint corpus from a document dump");
    build->add_option("--dump", dump, "Dump file")->required()->check(CLI::ExistingFile);
    build->add_option("--format", format, "Dump format")->check(CLI::IsMember({"jsonl", "markup"}));
    build->add_option("--out", corpus_out, "Corpus directory")->required();

    std::string gen_corpus, gen_prompts, gen_scripted, gen_config, gen_out;
    std::size_t gen_n = 0;
    std::uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen-questions", "Generate synthetic question-hint-passage triples");
    gen->add_option("--corpus", gen_corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    gen->add_option("-n", gen_n, "Number of passages to sample")->required();
    gen->add_option("--seed", gen_seed, "Sampling seed");
    gen->add_option("--prompts", gen_prompts, "Prompt set with question_gen exemplars")->check(CLI::ExistingDirectory);
    gen->add_option("--scripted", gen_scripted, "Scripted backend response script")->check(CLI::ExistingFile);
    gen->add_option("-c,--config", gen_config, "Take backend, dialect and prompts from a run config")
        ->check(CLI::ExistingFile);
    gen->add_option("--out", gen_out, "Output triples (.jsonl)")->required();

    auto* index = app.add_subcommand("index", "BM25 index over a corpus");
    index->require_subcommand(1);
    std::string idx_corpus, idx_docs, idx_out, idx_path, query;
    double k1 = retrieval::Bm25Params{}.k1, b = retrieval::Bm25Params{}.b;
    std::size_t top_k = 10;
    auto* ibuild = index->add_subcommand("build", "Index a corpus directory or an id/text JSONL file");
    auto* src_corpus = ibuild->add_option("--corpus", idx_corpus, "Corpus directory")->check(CLI::ExistingDirectory);
    auto* src_docs = ibuild->add_option("--docs", idx_docs, "JSONL with id and text")->check(CLI::ExistingFile);
    src_corpus->excludes(src_docs);
    ibuild->add_option("--out", idx_out, "Index file")->required();
    ibuild->add_option("--k1", k1, "Term-frequency saturation");
    ibuild->add_option("--b", b, "Length normalization");
    auto* iquery = index->add_subcommand("query", "Top-k documents for a query");
    iquery->add_option("--index", idx_path, "Index file")->required()->check(CLI::ExistingFile);
    iquery->add_option("-q,--query", query, "Query text")->required();
    iquery->add_option("-k,--top-k", top_k, "Results to show");

    std::string sweep_config, seeds = "0,1,2,3,4";
    RunOverrides sweep_o;
    auto* sweep = app.add_subcommand("seed-sweep", "Repeat a run over exemplar seeds and summarize");
    sweep->add_option("-c,--config", sweep_config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--seeds", seeds, "Exemplar seeds, comma separated");
    add_run_overrides(sweep, sweep_o);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        auto code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*run) return cmd_run(config_path, run_o);
        if (*analyze) return cmd_analyze(run_dir, counts, trials, analyze_seed, analyze_out);
        if (*build) return cmd_build_corpus(dump, format, corpus_out);
        if (*gen) {
            return cmd_gen_questions(gen_corpus, gen_n, gen_seed, gen_prompts, gen_scripted, gen_config, gen_out);
        }
        if (*ibuild) {
            if (idx_corpus.empty() && idx_docs.empty()) throw ConfigError("index build needs --corpus or --docs");
            return cmd_index_build(idx_corpus, idx_docs, idx_out, k1, b);
        }
        if (*iquery) return cmd_index_query(idx_path, query, top_k);
        if (*sweep) return cmd_seed_sweep(sweep_config, sweep_o, seeds);
    } catch (const Interrupted& e) {
        spdlog::warn("{}", e.what());
        return kInterrupted;
    } catch (const ConfigError& e) {
        spdlog::error("config: {}", e.what());
        return kConfigError;
    } catch (const PromptError& e) {
        spdlog::error("prompt: {}", e.what());
        return kConfigError;
    } catch (const backend::BackendError& e) {
        spdlog::error("backend ({}): {}", backend::to_string(e.kind()), e.what());
        return kBackendError;
    } catch (const DataError& e) {
        spdlog::error("data: {}", e.what());
        return kDataError;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kDataError;
    }
    return kConfigError;
}

}  // namespace recite::cli
