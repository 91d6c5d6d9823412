#pragma once

#include "recite/core_model.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace recite::evalkit {

/// Which normalization steps run. Steps always apply in the order
/// lowercase -> strip_punct -> strip_articles -> collapse_whitespace.
struct NormSteps {
    bool lowercase = true;
    bool strip_punct = true;
    bool strip_articles = true;
    bool collapse_whitespace = true;

    bool operator==(const NormSteps&) const = default;
};

/// Default steps plus per-dataset overrides.
struct NormProfile {
    NormSteps steps;
    std::map<Dataset, NormSteps> overrides;

    const NormSteps& for_dataset(Dataset d) const {
        auto it = overrides.find(d);
        return it == overrides.end() ? steps : it->second;
    }
};

std::string normalize(std::string_view text, const NormSteps& steps = {});

bool exact_match(std::string_view pred, const std::vector<std::string>& golds,
                 const NormSteps& steps = {});

double token_f1(std::string_view pred, const std::vector<std::string>& golds,
                const NormSteps& steps = {});

struct VoteGroup {
    std::string normalized;
    std::string first_raw;
    std::size_t count = 0;
    std::size_t first_index = 0;
};

struct VoteResult {
    std::string winner_raw;
    std::vector<VoteGroup> groups;  // in order of first occurrence
};

/// Plurality vote over normalized answers; ties go to the group that occurs
/// first. Empty input yields an empty winner and no groups.
VoteResult plurality_vote(const std::vector<std::string>& answers, const NormSteps& steps = {});

enum class ErrorCategory { HitsAtMajority, HitsAt20Path, HitsAt20Recit, NotRecit };
inline constexpr std::array<ErrorCategory, 4> kErrorCategories = {
    ErrorCategory::HitsAtMajority, ErrorCategory::HitsAt20Path, ErrorCategory::HitsAt20Recit,
    ErrorCategory::NotRecit};
std::string_view to_string(ErrorCategory c);

/// Per-question error analysis: majority hit, then any-path hit, then gold
/// string contained in any normalized recitation, else not recited.
ErrorCategory classify_question(const std::vector<std::string>& golds,
                                const std::vector<RecitationPath>& paths, std::string_view voted,
                                const NormSteps& steps = {});

struct PathQuadrant {
    bool recitation_has_answer = false;
    bool answer_correct = false;

    bool operator==(const PathQuadrant&) const = default;
    std::size_t index() const { return (recitation_has_answer ? 0 : 2) + (answer_correct ? 0 : 1); }
};
/// Quadrants in table order: (Y,Y), (Y,N), (N,Y), (N,N).
inline constexpr std::array<PathQuadrant, 4> kQuadrants = {
    PathQuadrant{true, true}, PathQuadrant{true, false}, PathQuadrant{false, true},
    PathQuadrant{false, false}};
std::string to_string(PathQuadrant q);

PathQuadrant per_path_quadrant(const std::vector<std::string>& golds, const RecitationPath& path,
                               const NormSteps& steps = {});

/// True when some nonempty normalized gold occurs inside a normalized
/// recitation of the path.
bool recitation_contains_gold(const std::vector<std::string>& normalized_golds,
                              const RecitationPath& path, const NormSteps& steps);

struct EvalReport {
    double em = 0.0;
    double f1 = 0.0;
    std::size_t n_questions = 0;
    std::size_t n_failed = 0;
    std::size_t n_paths_per_question = 0;  // largest path count seen
    std::size_t n_paths_total = 0;
    std::array<std::size_t, 4> category_counts{};
    std::array<std::size_t, 4> quadrant_counts{};
    std::array<double, 4> category_fractions{};
    std::array<double, 4> quadrant_fractions{};
};

/// Per-question scores, the unit the parallel kernels work on.
struct QuestionScore {
    bool em = false;
    double f1 = 0.0;
    ErrorCategory category = ErrorCategory::NotRecit;
    std::array<std::size_t, 4> quadrants{};
    std::size_t n_paths = 0;
    bool failed = false;
};

/// Scores run records against their questions (resolved by id) in parallel.
/// Throws DataError for an unresolved question id.
std::vector<QuestionScore> score_questions(const std::vector<RunRecord>& records,
                                           const std::vector<QuestionRecord>& questions,
                                           const NormProfile& profile = {});
/// Serial reference for score_questions.
std::vector<QuestionScore> score_questions_serial(const std::vector<RunRecord>& records,
                                                  const std::vector<QuestionRecord>& questions,
                                                  const NormProfile& profile = {});

/// Sums per-question scores in record order and divides once.
EvalReport reduce_scores(const std::vector<QuestionScore>& scores);

EvalReport aggregate_report(const std::vector<RunRecord>& records,
                            const std::vector<QuestionRecord>& questions,
                            const NormProfile& profile = {});

struct CurvePoint {
    std::size_t path_count = 0;
    std::size_t trials = 0;
    double mean_em = 0.0;
    double std_em = 0.0;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
    std::vector<double> trial_em;
    std::vector<double> trial_f1;
};

/// Re-votes random path subsets: for each count and trial, picks `count`
/// stored paths per question without replacement and scores the new vote.
/// Std is the sample standard deviation over trials (0 for a single trial).
/// Throws DataError when a count exceeds the stored path count of an Ok record.
/// Failed records score as an empty vote at every count.
std::vector<CurvePoint> path_subsample_curve(const std::vector<RunRecord>& records,
                                             const std::vector<QuestionRecord>& questions,
                                             const std::vector<std::size_t>& path_counts,
                                             std::size_t trials, std::uint64_t seed,
                                             const NormProfile& profile = {});
std::vector<CurvePoint> path_subsample_curve_serial(const std::vector<RunRecord>& records,
                                                    const std::vector<QuestionRecord>& questions,
                                                    const std::vector<std::size_t>& path_counts,
                                                    std::size_t trials, std::uint64_t seed,
                                                    const NormProfile& profile = {});

// Report output.
std::string report_to_json(const EvalReport& r);
/// Category table (category, fraction, count) with percentages to 2 decimals.
std::string format_category_table(const EvalReport& r);
std::string format_quadrant_table(const EvalReport& r);
std::string curve_to_csv(const std::vector<CurvePoint>& curve);

}  // namespace recite::evalkit
