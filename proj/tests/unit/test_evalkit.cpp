#include "doctest.h"

#include "recite/errors.hpp"
#include "recite/evalkit.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace recite;
using namespace recite::evalkit;

namespace {

RecitationPath path(std::string recitation, std::string answer, PathStatus status = PathStatus::Ok) {
    RecitationPath p;
    if (!recitation.empty()) p.recitations = {std::move(recitation)};
    p.raw_answer_text = "Answer: " + answer;
    p.extracted_answer = std::move(answer);
    p.status = status;
    return p;
}

RunRecord record(std::string id, std::vector<RecitationPath> paths) {
    RunRecord r;
    r.question_id = std::move(id);
    r.scheme = Scheme::ReciteAnswer;
    r.config_fingerprint = "f";
    r.paths = std::move(paths);
    r.voted_answer = plurality_vote(r.voting_answers()).winner_raw;
    return r;
}

QuestionRecord question(std::string id, std::vector<std::string> golds) {
    QuestionRecord q;
    q.id = std::move(id);
    q.question = "q?";
    q.gold_answers = std::move(golds);
    return q;
}

}  // namespace

TEST_CASE("normalization steps") {
    CHECK(normalize("The  Eiffel Tower!") == "eiffel tower");
    CHECK(normalize("  a cat, an apple; THE end ") == "cat apple end");
    CHECK(normalize("theatre") == "theatre");
    NormSteps keep_case;
    keep_case.lowercase = false;
    CHECK(normalize("The Tower", keep_case) == "The Tower");
    NormSteps none{false, false, false, false};
    CHECK(normalize(" x  y ", none) == " x  y ");
    for (auto s : {"A  b.C", "the the", "  ", "U.S.A.", "naïve café"}) {
        CHECK(normalize(normalize(s)) == normalize(s));
    }
}

TEST_CASE("exact match and token F1") {
    CHECK(exact_match("the Eiffel tower", {"Eiffel Tower"}));
    CHECK_FALSE(exact_match("Eiffel", {"Eiffel Tower"}));
    CHECK(exact_match("Paris", {"London", "paris."}));
    CHECK(token_f1("open heart surgery", {"heart surgery"}) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(token_f1("xyz", {"abc"}) == 0.0);
    CHECK(token_f1("heart surgery", {"open heart surgery", "heart surgery"}) == 1.0);
    CHECK(token_f1("", {"b"}) == 0.0);
    CHECK(token_f1("the", {"a"}) == 1.0);
}

TEST_CASE("plurality vote groups by normalized form, ties to first occurrence") {
    auto v = plurality_vote({"Paris", "Rome", "rome.", "paris", "Berlin"});
    CHECK(v.winner_raw == "Paris");
    REQUIRE(v.groups.size() == 3);
    CHECK(v.groups[0].count == 2);
    CHECK(v.groups[1].first_raw == "Rome");
    CHECK(v.groups[1].first_index == 1);

    CHECK(plurality_vote({"b", "a", "a"}).winner_raw == "a");
    CHECK(plurality_vote({}).winner_raw.empty());
    CHECK(plurality_vote({"x"}).winner_raw == "x");
}

TEST_CASE("vote winner is stable under permutations that keep tied groups in order") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> answers;
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) answers.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
        auto v = plurality_vote(answers);
        const auto best = std::max_element(v.groups.begin(), v.groups.end(), [](auto& a, auto& b) {
                              return a.count < b.count;
                          })->count;
        for (const auto& g : v.groups) CHECK(g.count <= best);
        auto shuffled = answers;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto w = plurality_vote(shuffled);
        const auto winner_count = [&](const VoteResult& r) {
            for (const auto& g : r.groups) {
                if (g.first_raw == r.winner_raw) return g.count;
            }
            return std::size_t{0};
        };
        CHECK(winner_count(w) == best);
        CHECK(winner_count(v) == best);
    }
}

TEST_CASE("error categories follow the decision order") {
    const std::vector<std::string> golds{"City 3"};
    // Majority right.
    CHECK(classify_question(golds, {path("", "City 3"), path("", "x")}, "City 3") == ErrorCategory::HitsAtMajority);
    // Some path right, majority wrong.
    CHECK(classify_question(golds, {path("", "x"), path("", "x"), path("", "City 3")}, "x") ==
          ErrorCategory::HitsAt20Path);
    // No path right but a recitation mentions the gold.
    CHECK(classify_question(golds, {path("Its capital is city 3.", "x")}, "x") == ErrorCategory::HitsAt20Recit);
    // Nothing.
    CHECK(classify_question(golds, {path("Nothing useful.", "x")}, "x") == ErrorCategory::NotRecit);
    // A failed path never counts as a hit even if its stale answer matches.
    CHECK(classify_question(golds, {path("", "City 3", PathStatus::StructureError), path("", "x")}, "x") ==
          ErrorCategory::NotRecit);
}

TEST_CASE("per-path quadrants and recitation containment") {
    const std::vector<std::string> golds{"Rome"};
    CHECK(per_path_quadrant(golds, path("Rome is the capital.", "Rome")).index() == 0);
    CHECK(per_path_quadrant(golds, path("Rome is the capital.", "Milan")).index() == 1);
    CHECK(per_path_quadrant(golds, path("Italy.", "rome")).index() == 2);
    CHECK(per_path_quadrant(golds, path("Italy.", "Milan")).index() == 3);
    // Golds that normalize to nothing never match.
    CHECK_FALSE(recitation_contains_gold({""}, path("anything", "x"), {}));
}

TEST_CASE("report partitions questions and paths") {
    std::vector<QuestionRecord> qs{question("a", {"1"}), question("b", {"2"}), question("c", {"3"})};
    std::vector<RunRecord> rs{record("a", {path("1", "1"), path("", "1")}),
                              record("b", {path("2 is here", "9")}),
                              record("c", {path("", "0"), path("", "0"), path("", "3")})};
    auto rep = aggregate_report(rs, qs);
    CHECK(rep.n_questions == 3);
    CHECK(rep.em == doctest::Approx(1.0 / 3.0));
    CHECK(std::accumulate(rep.category_counts.begin(), rep.category_counts.end(), std::size_t{0}) == 3);
    CHECK(std::accumulate(rep.quadrant_counts.begin(), rep.quadrant_counts.end(), std::size_t{0}) == 6);
    CHECK(rep.category_counts == std::array<std::size_t, 4>{1, 1, 1, 0});
    CHECK(rep.quadrant_counts == std::array<std::size_t, 4>{1, 1, 2, 2});
    CHECK(rep.n_paths_total == 6);
    CHECK(rep.n_paths_per_question == 3);
    CHECK(rep.f1 >= rep.em);

    auto serial = score_questions_serial(rs, qs);
    auto parallel = score_questions(rs, qs);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].em == parallel[i].em);
        CHECK(serial[i].f1 == parallel[i].f1);
        CHECK(serial[i].category == parallel[i].category);
    }

    rs.push_back(record("zzz", {path("", "1")}));
    CHECK_THROWS_AS(aggregate_report(rs, qs), DataError);
}

TEST_CASE("category table percentages sum to 100 within rounding") {
    std::vector<QuestionRecord> qs;
    std::vector<RunRecord> rs;
    for (int i = 0; i < 7; ++i) {
        qs.push_back(question("q" + std::to_string(i), {"yes"}));
        rs.push_back(record("q" + std::to_string(i), {path("", i % 3 == 0 ? "yes" : "no")}));
    }
    auto table = format_category_table(aggregate_report(rs, qs));
    CHECK(table.find("Hits@Majority") != std::string::npos);
    CHECK(table.find("Not Recit.") != std::string::npos);
}

TEST_CASE("path subsample curve") {
    std::vector<QuestionRecord> qs;
    std::vector<RunRecord> rs;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 60; ++i) {
        qs.push_back(question("q" + std::to_string(i), {"right"}));
        std::vector<RecitationPath> ps;
        for (int k = 0; k < 10; ++k) ps.push_back(path("", rng() % 10 < 6 ? "right" : "w" + std::to_string(rng() % 4)));
        rs.push_back(record("q" + std::to_string(i), ps));
    }
    auto curve = path_subsample_curve(rs, qs, {1, 5, 10}, 5, 42);
    REQUIRE(curve.size() == 3);
    CHECK(curve[2].std_em == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(curve[2].mean_em == doctest::Approx(aggregate_report(rs, qs).em));
    CHECK(curve[0].trial_em.size() == 5);

    auto again = path_subsample_curve(rs, qs, {1, 5, 10}, 5, 42);
    auto serial = path_subsample_curve_serial(rs, qs, {1, 5, 10}, 5, 42);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].trial_em == again[i].trial_em);
        CHECK(curve[i].trial_em == serial[i].trial_em);
        CHECK(curve[i].trial_f1 == serial[i].trial_f1);
    }

    CHECK_THROWS_AS(path_subsample_curve(rs, qs, {11}, 5, 1), DataError);
    CHECK_THROWS_AS(path_subsample_curve(rs, qs, {1}, 0, 1), DataError);

    auto csv = curve_to_csv(curve);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("failed records score as empty votes in the curve") {
    std::vector<QuestionRecord> qs{question("a", {"x"}), question("b", {"y"})};
    auto ok = record("a", {path("", "x"), path("", "x")});
    RunRecord failed;
    failed.question_id = "b";
    failed.status = RunStatus::Failed;
    failed.error = "boom";
    auto curve = path_subsample_curve({ok, failed}, qs, {1, 2}, 3, 0);
    CHECK(curve[0].mean_em == 0.5);
    CHECK(curve[1].mean_em == 0.5);
}
