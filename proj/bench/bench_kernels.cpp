// Serial reference vs OpenMP kernels: BM25 score-all, per-question scoring
// and path subsampling.

#include "recite/evalkit.hpp"
#include "recite/retrieval.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <string>
#include <vector>

using namespace recite;

namespace {

std::string word(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    return "t" + std::to_string(static_cast<int>(x * x * 5000));
}

const retrieval::Bm25Index& index() {
    static const auto idx = [] {
        std::mt19937_64 rng(1);
        std::vector<std::pair<std::string, std::string>> docs;
        for (int d = 0; d < 50000; ++d) {
            std::string text;
            const int len = 40 + static_cast<int>(rng() % 160);
            for (int i = 0; i < len; ++i) text += word(rng) + " ";
            docs.emplace_back("d" + std::to_string(d), std::move(text));
        }
        return retrieval::Bm25Index::build(docs);
    }();
    return idx;
}

const std::string kQuery = "t1 t17 t230 t999 t2500 t4000 t12";

void BM_Bm25ScoreAllSerial(benchmark::State& state) {
    const auto& idx = index();
    for (auto _ : state) benchmark::DoNotOptimize(idx.score_all_serial(kQuery));
}

void BM_Bm25ScoreAllParallel(benchmark::State& state) {
    const auto& idx = index();
    omp_set_num_threads(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(idx.score_all(kQuery));
}

struct RunFixture {
    std::vector<QuestionRecord> questions;
    std::vector<RunRecord> records;
};

const RunFixture& run_fixture() {
    static const auto fx = [] {
        RunFixture f;
        std::mt19937_64 rng(2);
        for (int i = 0; i < 5000; ++i) {
            QuestionRecord q;
            q.id = "q" + std::to_string(i);
            q.question = "question " + std::to_string(i) + "?";
            q.gold_answers = {"The answer " + std::to_string(i), "alias " + std::to_string(i)};
            RunRecord r;
            r.question_id = q.id;
            r.scheme = Scheme::ReciteAnswer;
            for (int k = 0; k < 20; ++k) {
                RecitationPath p;
                const bool right = rng() % 10 < 6;
                p.recitations = {"A passage that mentions " + (right ? q.gold_answers[0] : "something else") +
                                 " among many other words of filler text."};
                p.extracted_answer = right ? q.gold_answers[0] : "wrong " + std::to_string(rng() % 4);
                p.raw_answer_text = "Answer: " + p.extracted_answer;
                r.paths.push_back(std::move(p));
            }
            r.voted_answer = evalkit::plurality_vote(r.voting_answers()).winner_raw;
            f.questions.push_back(std::move(q));
            f.records.push_back(std::move(r));
        }
        return f;
    }();
    return fx;
}

void BM_ScoreQuestionsSerial(benchmark::State& state) {
    const auto& f = run_fixture();
    for (auto _ : state) benchmark::DoNotOptimize(evalkit::score_questions_serial(f.records, f.questions));
}

void BM_ScoreQuestionsParallel(benchmark::State& state) {
    const auto& f = run_fixture();
    omp_set_num_threads(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(evalkit::score_questions(f.records, f.questions));
}

void BM_SubsampleCurveSerial(benchmark::State& state) {
    const auto& f = run_fixture();
    for (auto _ : state) {
        benchmark::DoNotOptimize(evalkit::path_subsample_curve_serial(f.records, f.questions, {1, 5, 10, 20}, 5, 7));
    }
}

void BM_SubsampleCurveParallel(benchmark::State& state) {
    const auto& f = run_fixture();
    omp_set_num_threads(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(evalkit::path_subsample_curve(f.records, f.questions, {1, 5, 10, 20}, 5, 7));
    }
}

}  // namespace

BENCHMARK(BM_Bm25ScoreAllSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bm25ScoreAllParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreQuestionsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreQuestionsParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SubsampleCurveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SubsampleCurveParallel)->RangeMultiplier(2)->Range(1, 8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
