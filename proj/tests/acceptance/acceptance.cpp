// Prints one PASS/FAIL/SKIP line per acceptance criterion; exits nonzero on any FAIL.

#include "recite/backend.hpp"
#include "recite/cli.hpp"
#include "recite/evalkit.hpp"
#include "recite/hintcorpus.hpp"
#include "recite/jsonl.hpp"
#include "recite/pipeline.hpp"
#include "recite/retrieval.hpp"
#include "support/bm25_reference.hpp"
#include "support/fixtures.hpp"
#include "support/golden_prompts.hpp"
#include "support/hint_gen.hpp"

#include "json.hpp"
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace recite;
using recite::testing::ScriptWriter;
namespace fs = std::filesystem;

namespace {

// Frozen from tests/oracles/vote_oracle.py: 3-sigma lower bound on mean EM at
// 20 paths for 500 questions, p = 0.6 per path, 4 distinct wrong answers.
constexpr double kVoteOracleLowerBound = 0.9877924122249638;
constexpr double kBm25Tolerance = 1e-9;
constexpr double kScoreTolerance = 1e-12;

struct Outcome {
    enum Kind { Pass, Fail, Skip } kind = Pass;
    std::string detail;
};

Outcome fail(std::string why) { return {Outcome::Fail, std::move(why)}; }

class Checker {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && first_.empty()) first_ = what;
    }
    Outcome outcome(std::string detail = {}) const {
        return first_.empty() ? Outcome{Outcome::Pass, std::move(detail)} : fail(first_);
    }

private:
    std::string first_;
};

pipeline::RunExemplars exemplars() {
    pipeline::RunExemplars ex;
    ex.qa = recite::testing::qa_exemplars(5);
    ex.ids = {"acceptance"};
    return ex;
}

std::vector<RunRecord> run_scripted(const ScriptWriter& w, const std::vector<QuestionRecord>& qs, int paths,
                                    const std::string& run_dir = {}) {
    backend::ScriptedBackend b;
    w.apply(b);
    pipeline::Pipeline pipe(b, recite::testing::recite_config(paths), exemplars());
    pipeline::RunOptions opts;
    opts.question_parallelism = 4;
    opts.run_dir = run_dir;
    return pipeline::run_dataset(pipe, qs, opts).records;
}

std::string city(std::size_t i) { return "City " + std::to_string(i); }

// ---------------------------------------------------------------- 1 and 2

struct CategoryFixture {
    std::vector<QuestionRecord> questions;
    std::vector<RunRecord> records;
    std::array<std::size_t, 4> planned{};
    std::vector<std::size_t> category_of;
};

// Question i is scripted to land in category category_of[i]; the first four
// are the hand-traced ones, one per category.
const CategoryFixture& category_fixture() {
    static const CategoryFixture fx = [] {
        CategoryFixture f;
        f.questions = recite::testing::capital_questions(200);
        auto cfg = recite::testing::recite_config(20);
        auto ex = exemplars();
        std::mt19937_64 rng(2023);
        ScriptWriter w;
        for (std::size_t i = 0; i < f.questions.size(); ++i) {
            const auto& q = f.questions[i];
            const std::size_t cat = i < 4 ? i : rng() % 4;
            f.category_of.push_back(cat);
            ++f.planned[cat];
            std::vector<std::string> recs, answers;
            for (int p = 0; p < 20; ++p) {
                const auto tag = "Path " + std::to_string(p) + ": ";
                const bool evidence = cat <= 1 ? p % 2 == 0 : (cat == 2 && p == 7);
                recs.push_back(tag + (evidence ? *q.gold_evidence : "Country " + std::to_string(i) + " is remote."));
                bool correct = false;
                if (cat == 0) correct = p < 12;
                if (cat == 1) correct = p == 3 || p == 4 || p == 5;
                answers.push_back(correct ? city(i) : (p % 2 == 0 ? "Town A" : "Town B"));
            }
            if (cat == 1) answers[1] = "Town A";  // Town A 9, Town B 8, gold 3
            recite::testing::script_recite_answer(w, cfg, ex.qa, q, recs, answers);
        }
        f.records = run_scripted(w, f.questions, 20);
        return f;
    }();
    return fx;
}

Outcome criterion_categories() {
    const auto& fx = category_fixture();
    auto report = evalkit::aggregate_report(fx.records, fx.questions);
    Checker c;
    c.expect(report.n_failed == 0, "fixture records failed");
    c.expect(std::accumulate(report.category_counts.begin(), report.category_counts.end(), std::size_t{0}) == 200,
             "category counts do not sum to 200");
    c.expect(report.category_counts == fx.planned, "category counts differ from the scripted plan");
    double frac = 0.0, rounded = 0.0;
    for (double x : report.category_fractions) {
        frac += x;
        rounded += std::round(x * 10000.0) / 100.0;
    }
    c.expect(std::abs(frac - 1.0) <= kScoreTolerance, "category fractions do not sum to 1");
    c.expect(rounded >= 99.99 - 1e-9 && rounded <= 100.01 + 1e-9, "rounded percentages outside 99.99..100.01");
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& r = fx.records[i];
        auto got = evalkit::classify_question(fx.questions[i].gold_answers, r.paths, r.voted_answer);
        c.expect(got == evalkit::kErrorCategories[i],
                 "hand-traced question " + std::to_string(i) + " landed in " + std::string(evalkit::to_string(got)));
    }
    std::ostringstream d;
    d << "counts " << report.category_counts[0] << "/" << report.category_counts[1] << "/"
      << report.category_counts[2] << "/" << report.category_counts[3];
    return c.outcome(d.str());
}

Outcome criterion_quadrants() {
    const auto& fx = category_fixture();
    auto report = evalkit::aggregate_report(fx.records, fx.questions);
    Checker c;
    c.expect(report.n_paths_total == 4000, "expected 4000 paths");
    c.expect(std::accumulate(report.quadrant_counts.begin(), report.quadrant_counts.end(), std::size_t{0}) == 4000,
             "quadrant counts do not sum to the path count");
    double frac = std::accumulate(report.quadrant_fractions.begin(), report.quadrant_fractions.end(), 0.0);
    c.expect(std::abs(frac - 1.0) <= kScoreTolerance, "quadrant fractions do not sum to 1");
    for (auto n : report.quadrant_counts) c.expect(n > 0, "a quadrant is empty");
    return c.outcome();
}

// ---------------------------------------------------------------------- 3

Outcome criterion_em_f1() {
    const std::string path = std::string(RECITE_TEST_DATA_DIR) + "/em_f1_cases.jsonl";
    std::ifstream in(path);
    if (!in) return fail("cannot open " + path);
    Checker c;
    std::string line;
    std::size_t n = 0;
    bool saw_08 = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        auto pred = j["pred"].get<std::string>();
        auto golds = j["golds"].get<std::vector<std::string>>();
        const bool em = j["em"].get<bool>();
        const double f1 = std::stod(j["f1"].get<std::string>());
        ++n;
        c.expect(evalkit::exact_match(pred, golds) == em, "EM mismatch on '" + pred + "'");
        c.expect(std::abs(evalkit::token_f1(pred, golds) - f1) <= kScoreTolerance, "F1 mismatch on '" + pred + "'");
        if (pred == "open heart surgery" && std::abs(f1 - 0.8) <= kScoreTolerance) saw_08 = true;
    }
    c.expect(n == 50, "expected 50 cases, read " + std::to_string(n));
    c.expect(saw_08, "F1 = 0.8 case missing");
    return c.outcome(std::to_string(n) + " cases");
}

// ---------------------------------------------------------------------- 4

Outcome criterion_bm25() {
    Checker c;
    const auto docs = recite::testing::random_docs(100, 17);
    for (double k1 : {0.9, 1.2}) {
        for (double b : {0.4, 0.75}) {
            const retrieval::Bm25Params params{k1, b};
            auto index = retrieval::Bm25Index::build(docs, params);
            for (std::uint64_t qs = 0; qs < 25; ++qs) {
                const auto query = recite::testing::random_query(qs);
                auto scores = index.score_all(query);
                for (std::size_t d = 0; d < docs.size(); ++d) {
                    auto want = recite::testing::bm25_reference(docs, query, d, params);
                    c.expect(std::abs(scores[d] - want) <= kBm25Tolerance, "score differs for '" + query + "'");
                }
                auto got = index.top_k(query, 10);
                auto want = recite::testing::top_k_reference(docs, query, 10, params);
                c.expect(got.size() == want.size(), "top-10 size differs for '" + query + "'");
                for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
                    c.expect(got[i].id == want[i].id, "top-10 order differs for '" + query + "'");
                    c.expect(std::abs(got[i].score - want[i].score) <= kBm25Tolerance, "top-10 score differs");
                }
            }
        }
    }
    return c.outcome("4 parameter pairs x 25 queries");
}

// ----------------------------------------------------------------- 5 and 7

ScriptWriter split_vote_script(const std::vector<QuestionRecord>& qs) {
    auto cfg = recite::testing::recite_config(20);
    auto ex = exemplars();
    ScriptWriter w;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        std::vector<std::string> recs, answers;
        for (int p = 0; p < 20; ++p) {
            const bool right = p % 2 == 0 || p == 19;
            recs.push_back(right ? *qs[i].gold_evidence + " (" + std::to_string(p) + ")"
                                 : "Some say the capital is Town " + std::to_string(p) + ".");
            answers.push_back(right ? city(i) : "Town " + std::to_string(i));
        }
        recite::testing::script_recite_answer(w, cfg, ex.qa, qs[i], recs, answers);
    }
    return w;
}

Outcome criterion_end_to_end() {
    Checker c;
    const auto qs = recite::testing::capital_questions(20);
    auto cfg = recite::testing::recite_config(20);
    auto ex = exemplars();
    ScriptWriter w;
    for (const auto& q : qs) {
        std::vector<std::string> recs(20, *q.gold_evidence);
        std::vector<std::string> answers(20, q.gold_answers[0]);
        recite::testing::script_recite_answer(w, cfg, ex.qa, q, recs, answers);
    }
    auto report = evalkit::aggregate_report(run_scripted(w, qs, 20), qs);
    c.expect(report.em == 1.0, "gold-evidence fixture EM " + std::to_string(report.em));

    auto split = run_scripted(split_vote_script(qs), qs, 20);
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const auto& r = split[i];
        auto answers = r.voting_answers();
        auto right = std::count(answers.begin(), answers.end(), city(i));
        c.expect(r.paths.size() == 20 && right == 11, "question " + qs[i].id + " is not an 11 vs 9 split");
        c.expect(r.voted_answer == city(i), "question " + qs[i].id + " voted '" + r.voted_answer + "'");
    }
    return c.outcome("EM " + std::to_string(100.0 * report.em).substr(0, 5) + "%, 20/20 plurality");
}

Outcome criterion_determinism() {
    const auto qs = recite::testing::capital_questions(20);
    auto w = split_vote_script(qs);
    recite::testing::TempDir t;
    run_scripted(w, qs, 20, t / "a");
    run_scripted(w, qs, 20, t / "b");
    auto a = recite::testing::read_text(t / "a/records.jsonl");
    auto b = recite::testing::read_text(t / "b/records.jsonl");
    Checker c;
    c.expect(!a.empty(), "records.jsonl is empty");
    c.expect(a == b, "records.jsonl differs between runs");
    return c.outcome(std::to_string(a.size()) + " bytes");
}

// ---------------------------------------------------------------------- 6

Outcome criterion_goldens() {
    Checker c;
    auto diff = recite::testing::check_goldens(RECITE_GOLDEN_DIR);
    for (const auto& name : diff) c.expect(false, "golden mismatch: " + name);
    std::size_t ul2 = 0;
    std::set<std::string> families;
    for (const auto& [name, text] : recite::testing::all_golden_prompts()) {
        if (name.ends_with(".ul2")) {
            ++ul2;
            c.expect(text.find('\n') == std::string::npos, name + " contains a newline");
            c.expect(text.starts_with("[NLG]") && text.ends_with("[extra_id_0]"), name + " lacks the UL2 wrapper");
        } else {
            families.insert(name);
            if (name == "multihop") {
                c.expect(text.find("Recitation 1:") != std::string::npos &&
                             text.find("Recitation 2:") != std::string::npos,
                         "multi-hop prompt lacks numbered cues");
            }
        }
    }
    for (auto f : {"recitation", "qa", "multihop", "hint", "question_gen", "cot"}) {
        c.expect(families.count(f) == 1, std::string("no golden for ") + f);
    }
    return c.outcome(std::to_string(families.size()) + " families, " + std::to_string(ul2) + " UL2");
}

// ---------------------------------------------------------------------- 8

Outcome criterion_curve() {
    std::vector<QuestionRecord> qs;
    std::vector<RunRecord> rs;
    std::mt19937_64 rng(8);
    std::bernoulli_distribution correct(0.6);
    std::uniform_int_distribution<int> wrong(0, 3);
    for (int i = 0; i < 500; ++i) {
        QuestionRecord q;
        q.id = "p" + std::to_string(i);
        q.question = "q?";
        q.gold_answers = {"right"};
        RunRecord r;
        r.question_id = q.id;
        r.scheme = Scheme::ReciteAnswer;
        for (int k = 0; k < 20; ++k) {
            RecitationPath p;
            p.extracted_answer = correct(rng) ? "right" : "wrong " + std::to_string(wrong(rng));
            p.raw_answer_text = "Answer: " + p.extracted_answer;
            r.paths.push_back(std::move(p));
        }
        r.voted_answer = evalkit::plurality_vote(r.voting_answers()).winner_raw;
        qs.push_back(std::move(q));
        rs.push_back(std::move(r));
    }
    auto curve = evalkit::path_subsample_curve(rs, qs, {1, 5, 10, 20}, 5, 3);
    Checker c;
    c.expect(curve.size() == 4, "expected four curve points");
    if (curve.size() != 4) return c.outcome();
    for (std::size_t i = 1; i < curve.size(); ++i) {
        c.expect(curve[i].mean_em >= curve[i - 1].mean_em, "mean EM decreases at count " +
                                                                std::to_string(curve[i].path_count));
    }
    c.expect(curve[3].mean_em >= 0.95, "mean EM at 20 below 0.95");
    c.expect(curve[3].mean_em >= kVoteOracleLowerBound, "mean EM at 20 below the oracle 3-sigma bound");
    std::ostringstream d;
    d.precision(4);
    d << "mean EM";
    for (const auto& p : curve) d << " " << p.path_count << ":" << p.mean_em;
    return c.outcome(d.str());
}

// ---------------------------------------------------------------------- 9

Outcome criterion_hints() {
    Checker c;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        auto parts = recite::testing::random_hint_parts(rng);
        auto hint = hintcorpus::make_hint(parts.page_title, parts.section_path, parts.para_index);
        c.expect(hintcorpus::parse_hint(hint) == parts, "round trip failed for '" + hint + "'");
    }
    const std::string child = "Child support --- Compliance and enforcement issues --- Enforcement --- Paragraph #2";
    c.expect(hintcorpus::make_hint("Child support", {"Compliance and enforcement issues", "Enforcement"}, 2) == child,
             "Child-support hint differs");
    auto p = hintcorpus::parse_hint(child);
    c.expect(p.page_title == "Child support" && p.section_path.size() == 2 && p.para_index == 2,
             "Child-support hint parses wrongly");
    return c.outcome("1000 round trips");
}

// --------------------------------------------------------------------- 10

Outcome criterion_live() {
    const char* cfg = std::getenv("RECITE_LIVE_CONFIG");
    if (!cfg || !*cfg) return {Outcome::Skip, "set RECITE_LIVE_CONFIG to a remote run config"};
    recite::testing::TempDir t;
    int code = cli::run_main({"recite", "run", "-c", cfg, "--limit", "10", "--run-dir", t / "live"});
    Checker c;
    c.expect(code == cli::kOk, "run exited with " + std::to_string(code));
    c.expect(fs::exists(t.path() / "live" / "report.json"), "no report.json");
    return c.outcome();
}

struct Criterion {
    int number;
    const char* title;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "error categories partition the 200-question fixture", 5, criterion_categories},
        {2, "per-path quadrant fractions sum to 1", 5, criterion_quadrants},
        {3, "EM/F1 agree with the reference scorer", 1, criterion_em_f1},
        {4, "BM25 matches the brute-force formula", 10, criterion_bm25},
        {5, "scripted recite-and-answer end to end", 10, criterion_end_to_end},
        {6, "prompt golden files and UL2 dialect", 1, criterion_goldens},
        {7, "identical runs give byte-identical records", 10, criterion_determinism},
        {8, "path-count subsampling curve", 30, criterion_curve},
        {9, "passage hint grammar round trip", 1, criterion_hints},
        {10, "live backend smoke run", 600, criterion_live},
    };
    spdlog::set_level(spdlog::level::warn);
    int failures = 0;
    for (const auto& cr : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = cr.run();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.kind == Outcome::Pass && secs > cr.budget_s) {
            o = fail("took " + std::to_string(secs) + " s, budget " + std::to_string(cr.budget_s) + " s");
        }
        const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Fail ? "FAIL" : "SKIP";
        if (o.kind == Outcome::Fail) ++failures;
        std::printf("%s %2d  %-52s %7.3f s  %s\n", tag, cr.number, cr.title, secs, o.detail.c_str());
    }
    std::fflush(stdout);
    return failures == 0 ? 0 : 1;
}
