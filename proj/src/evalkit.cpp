#include "recite/evalkit.hpp"

#include "json_fields.hpp"
#include "recite/errors.hpp"
#include "recite/hashing.hpp"
#include "text_case.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

namespace recite::evalkit {

namespace {

constexpr std::string_view kPunctuation = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

bool is_punct(char c) { return kPunctuation.find(c) != std::string_view::npos; }

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Word characters for article boundaries: ASCII alnum, underscore, and any
// non-ASCII byte (UTF-8 letters).
bool is_word(char c) {
    auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u) || c == '_';
}

std::string strip_articles(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_word(s[i])) {
            out.push_back(s[i++]);
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && is_word(s[j])) ++j;
        auto word = s.substr(i, j - i);
        if (word == "a" || word == "an" || word == "the") {
            out.push_back(' ');
        } else {
            out.append(word);
        }
        i = j;
    }
    return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_space(s[j])) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string> normalize_all(const std::vector<std::string>& xs, const NormSteps& steps) {
    std::vector<std::string> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(normalize(x, steps));
    return out;
}

bool contains(const std::vector<std::string>& haystack, const std::string& needle) {
    return std::find(haystack.begin(), haystack.end(), needle) != haystack.end();
}

double f1_tokens(const std::vector<std::string_view>& pred, const std::vector<std::string_view>& gold) {
    if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
    std::unordered_map<std::string_view, long> counts;
    for (auto t : gold) ++counts[t];
    long same = 0;
    for (auto t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) return 0.0;
    double precision = static_cast<double>(same) / static_cast<double>(pred.size());
    double recall = static_cast<double>(same) / static_cast<double>(gold.size());
    return 2 * precision * recall / (precision + recall);
}

std::unordered_map<std::string, const QuestionRecord*> index_questions(
    const std::vector<QuestionRecord>& questions) {
    std::unordered_map<std::string, const QuestionRecord*> out;
    for (const auto& q : questions) out.emplace(q.id, &q);
    return out;
}

std::vector<const QuestionRecord*> resolve(const std::vector<RunRecord>& records,
                                           const std::vector<QuestionRecord>& questions) {
    auto by_id = index_questions(questions);
    std::vector<const QuestionRecord*> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        auto it = by_id.find(r.question_id);
        if (it == by_id.end()) throw DataError("run record references unknown question id '" + r.question_id + "'");
        out.push_back(it->second);
    }
    return out;
}

QuestionScore score_one(const RunRecord& r, const QuestionRecord& q, const NormProfile& profile) {
    const auto& steps = profile.for_dataset(q.dataset);
    QuestionScore s;
    s.failed = r.status == RunStatus::Failed;
    s.em = exact_match(r.voted_answer, q.gold_answers, steps);
    s.f1 = token_f1(r.voted_answer, q.gold_answers, steps);
    s.category = classify_question(q.gold_answers, r.paths, r.voted_answer, steps);
    for (const auto& p : r.paths) ++s.quadrants[per_path_quadrant(q.gold_answers, p, steps).index()];
    s.n_paths = r.paths.size();
    return s;
}

void check_counts(const std::vector<RunRecord>& records, const std::vector<std::size_t>& counts) {
    for (auto c : counts) {
        if (c == 0) throw DataError("path count must be positive");
        for (const auto& r : records) {
            if (r.status == RunStatus::Ok && c > r.paths.size()) {
                throw DataError(fmt::format("path count {} exceeds the {} stored paths of question '{}'", c,
                                            r.paths.size(), r.question_id));
            }
        }
    }
}

// One subsampled re-vote. The RNG stream depends only on (seed, count, trial,
// question index), so serial and parallel evaluation agree exactly.
std::pair<bool, double> subsample_score(const RunRecord& r, const QuestionRecord& q, std::size_t count,
                                        std::size_t trial, std::size_t qi, std::uint64_t seed,
                                        const NormProfile& profile) {
    const auto& steps = profile.for_dataset(q.dataset);
    if (r.status == RunStatus::Failed) return {exact_match("", q.gold_answers, steps), token_f1("", q.gold_answers, steps)};
    std::mt19937_64 rng(mix_seed(mix_seed(seed, count), mix_seed(trial, qi)));
    std::vector<std::size_t> idx(r.paths.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates, then restore path order so the tie-break stays
    // "earliest path" within the subset.
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count));
    std::vector<std::string> answers;
    for (std::size_t i = 0; i < count; ++i) {
        const auto& p = r.paths[idx[i]];
        if (p.status == PathStatus::Ok) answers.push_back(p.extracted_answer);
    }
    auto voted = plurality_vote(answers, steps).winner_raw;
    return {exact_match(voted, q.gold_answers, steps), token_f1(voted, q.gold_answers, steps)};
}

void summarize(CurvePoint& pt) {
    auto mean_std = [](const std::vector<double>& xs, double& mean, double& sd) {
        mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        sd = 0.0;
        if (xs.size() > 1) {
            double ss = 0.0;
            for (double x : xs) ss += (x - mean) * (x - mean);
            sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
        }
    };
    mean_std(pt.trial_em, pt.mean_em, pt.std_em);
    mean_std(pt.trial_f1, pt.mean_f1, pt.std_f1);
}

template <bool Parallel>
std::vector<CurvePoint> subsample_impl(const std::vector<RunRecord>& records,
                                       const std::vector<QuestionRecord>& questions,
                                       const std::vector<std::size_t>& path_counts, std::size_t trials,
                                       std::uint64_t seed, const NormProfile& profile) {
    if (trials == 0) throw DataError("trials must be positive");
    check_counts(records, path_counts);
    auto qs = resolve(records, questions);
    const auto n = static_cast<std::ptrdiff_t>(records.size());
    std::vector<CurvePoint> curve;
    for (auto count : path_counts) {
        CurvePoint pt;
        pt.path_count = count;
        pt.trials = trials;
        for (std::size_t t = 0; t < trials; ++t) {
            std::vector<char> em(records.size());
            std::vector<double> f1(records.size());
            if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
                for (std::ptrdiff_t i = 0; i < n; ++i) {
                    auto [e, f] = subsample_score(records[i], *qs[i], count, t, i, seed, profile);
                    em[i] = e;
                    f1[i] = f;
                }
            } else {
                for (std::ptrdiff_t i = 0; i < n; ++i) {
                    auto [e, f] = subsample_score(records[i], *qs[i], count, t, i, seed, profile);
                    em[i] = e;
                    f1[i] = f;
                }
            }
            // Serial reduction in question order keeps the sums bit-identical.
            std::size_t hits = std::count(em.begin(), em.end(), 1);
            double f1_sum = 0.0;
            for (double f : f1) f1_sum += f;
            double denom = records.empty() ? 1.0 : static_cast<double>(records.size());
            pt.trial_em.push_back(static_cast<double>(hits) / denom);
            pt.trial_f1.push_back(f1_sum / denom);
        }
        summarize(pt);
        curve.push_back(std::move(pt));
    }
    return curve;
}

}  // namespace

std::string normalize(std::string_view text, const NormSteps& steps) {
    std::string s = steps.lowercase ? detail::utf8_lower(text) : std::string(text);
    if (steps.strip_punct) s.erase(std::remove_if(s.begin(), s.end(), is_punct), s.end());
    if (steps.strip_articles) s = strip_articles(s);
    if (steps.collapse_whitespace) {
        std::string out;
        for (auto tok : split_ws(s)) {
            if (!out.empty()) out.push_back(' ');
            out.append(tok);
        }
        s = std::move(out);
    }
    return s;
}

bool exact_match(std::string_view pred, const std::vector<std::string>& golds, const NormSteps& steps) {
    auto p = normalize(pred, steps);
    return std::any_of(golds.begin(), golds.end(),
                       [&](const std::string& g) { return normalize(g, steps) == p; });
}

double token_f1(std::string_view pred, const std::vector<std::string>& golds, const NormSteps& steps) {
    auto p = normalize(pred, steps);
    auto pt = split_ws(p);
    double best = 0.0;
    for (const auto& g : golds) {
        auto gn = normalize(g, steps);
        best = std::max(best, f1_tokens(pt, split_ws(gn)));
    }
    return best;
}

VoteResult plurality_vote(const std::vector<std::string>& answers, const NormSteps& steps) {
    VoteResult out;
    std::unordered_map<std::string, std::size_t> group_of;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        auto key = normalize(answers[i], steps);
        auto [it, inserted] = group_of.emplace(key, out.groups.size());
        if (inserted) out.groups.push_back(VoteGroup{key, answers[i], 0, i});
        ++out.groups[it->second].count;
    }
    const VoteGroup* best = nullptr;
    for (const auto& g : out.groups) {
        // Groups are in first-occurrence order, so strict > keeps the earliest on ties.
        if (best == nullptr || g.count > best->count) best = &g;
    }
    if (best != nullptr) out.winner_raw = best->first_raw;
    return out;
}

std::string_view to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::HitsAtMajority: return "Hits@Majority";
        case ErrorCategory::HitsAt20Path: return "Hits@20-Path";
        case ErrorCategory::HitsAt20Recit: return "Hits@20-Recit";
        case ErrorCategory::NotRecit: return "Not Recit.";
    }
    return "?";
}

std::string to_string(PathQuadrant q) {
    return fmt::format("recit={} ans={}", q.recitation_has_answer ? "Y" : "N", q.answer_correct ? "Y" : "N");
}

bool recitation_contains_gold(const std::vector<std::string>& normalized_golds, const RecitationPath& path,
                              const NormSteps& steps) {
    for (const auto& rec : path.recitations) {
        auto nr = normalize(rec, steps);
        for (const auto& g : normalized_golds) {
            if (!g.empty() && nr.find(g) != std::string::npos) return true;
        }
    }
    return false;
}

ErrorCategory classify_question(const std::vector<std::string>& golds, const std::vector<RecitationPath>& paths,
                                std::string_view voted, const NormSteps& steps) {
    auto gold_norm = normalize_all(golds, steps);
    if (contains(gold_norm, normalize(voted, steps))) return ErrorCategory::HitsAtMajority;
    for (const auto& p : paths) {
        if (p.status == PathStatus::Ok && contains(gold_norm, normalize(p.extracted_answer, steps))) {
            return ErrorCategory::HitsAt20Path;
        }
    }
    for (const auto& p : paths) {
        if (recitation_contains_gold(gold_norm, p, steps)) return ErrorCategory::HitsAt20Recit;
    }
    return ErrorCategory::NotRecit;
}

PathQuadrant per_path_quadrant(const std::vector<std::string>& golds, const RecitationPath& path,
                               const NormSteps& steps) {
    PathQuadrant q;
    q.recitation_has_answer = recitation_contains_gold(normalize_all(golds, steps), path, steps);
    q.answer_correct = path.status == PathStatus::Ok && exact_match(path.extracted_answer, golds, steps);
    return q;
}

std::vector<QuestionScore> score_questions(const std::vector<RunRecord>& records,
                                           const std::vector<QuestionRecord>& questions,
                                           const NormProfile& profile) {
    auto qs = resolve(records, questions);
    std::vector<QuestionScore> out(records.size());
    const auto n = static_cast<std::ptrdiff_t>(records.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score_one(records[i], *qs[i], profile);
    return out;
}

std::vector<QuestionScore> score_questions_serial(const std::vector<RunRecord>& records,
                                                  const std::vector<QuestionRecord>& questions,
                                                  const NormProfile& profile) {
    auto qs = resolve(records, questions);
    std::vector<QuestionScore> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out.push_back(score_one(records[i], *qs[i], profile));
    return out;
}

EvalReport reduce_scores(const std::vector<QuestionScore>& scores) {
    EvalReport r;
    r.n_questions = scores.size();
    std::size_t em_hits = 0;
    double f1_sum = 0.0;
    for (const auto& s : scores) {
        em_hits += s.em ? 1 : 0;
        f1_sum += s.f1;
        ++r.category_counts[static_cast<std::size_t>(s.category)];
        for (std::size_t k = 0; k < 4; ++k) r.quadrant_counts[k] += s.quadrants[k];
        r.n_paths_total += s.n_paths;
        r.n_paths_per_question = std::max(r.n_paths_per_question, s.n_paths);
        r.n_failed += s.failed ? 1 : 0;
    }
    if (r.n_questions > 0) {
        auto n = static_cast<double>(r.n_questions);
        r.em = static_cast<double>(em_hits) / n;
        r.f1 = f1_sum / n;
        for (std::size_t k = 0; k < 4; ++k) r.category_fractions[k] = static_cast<double>(r.category_counts[k]) / n;
    }
    if (r.n_paths_total > 0) {
        auto n = static_cast<double>(r.n_paths_total);
        for (std::size_t k = 0; k < 4; ++k) r.quadrant_fractions[k] = static_cast<double>(r.quadrant_counts[k]) / n;
    }
    return r;
}

EvalReport aggregate_report(const std::vector<RunRecord>& records, const std::vector<QuestionRecord>& questions,
                            const NormProfile& profile) {
    return reduce_scores(score_questions(records, questions, profile));
}

std::vector<CurvePoint> path_subsample_curve(const std::vector<RunRecord>& records,
                                             const std::vector<QuestionRecord>& questions,
                                             const std::vector<std::size_t>& path_counts, std::size_t trials,
                                             std::uint64_t seed, const NormProfile& profile) {
    return subsample_impl<true>(records, questions, path_counts, trials, seed, profile);
}

std::vector<CurvePoint> path_subsample_curve_serial(const std::vector<RunRecord>& records,
                                                    const std::vector<QuestionRecord>& questions,
                                                    const std::vector<std::size_t>& path_counts,
                                                    std::size_t trials, std::uint64_t seed,
                                                    const NormProfile& profile) {
    return subsample_impl<false>(records, questions, path_counts, trials, seed, profile);
}

std::string report_to_json(const EvalReport& r) {
    detail::json j;
    j["em"] = r.em;
    j["f1"] = r.f1;
    j["n_questions"] = r.n_questions;
    j["n_failed"] = r.n_failed;
    j["n_paths_per_question"] = r.n_paths_per_question;
    j["n_paths_total"] = r.n_paths_total;
    for (std::size_t k = 0; k < 4; ++k) {
        auto name = std::string(to_string(kErrorCategories[k]));
        j["categories"][name] = {{"count", r.category_counts[k]}, {"fraction", r.category_fractions[k]}};
        auto qname = to_string(kQuadrants[k]);
        j["quadrants"][qname] = {{"count", r.quadrant_counts[k]}, {"fraction", r.quadrant_fractions[k]}};
    }
    return j.dump(2) + "\n";
}

std::string format_category_table(const EvalReport& r) {
    std::string out = fmt::format("{:<16} {:>9} {:>7}\n", "category", "fraction", "count");
    for (std::size_t k = 0; k < 4; ++k) {
        out += fmt::format("{:<16} {:>8.2f}% {:>7}\n", to_string(kErrorCategories[k]),
                           100.0 * r.category_fractions[k], r.category_counts[k]);
    }
    out += fmt::format("{:<16} {:>9} {:>7}\n", "questions", "", r.n_questions);
    return out;
}

std::string format_quadrant_table(const EvalReport& r) {
    std::string out = fmt::format("{:<6} {:<5} {:>9} {:>7}\n", "recit", "ans", "fraction", "count");
    for (std::size_t k = 0; k < 4; ++k) {
        const auto& q = kQuadrants[k];
        out += fmt::format("{:<6} {:<5} {:>8.2f}% {:>7}\n", q.recitation_has_answer ? "Y" : "N",
                           q.answer_correct ? "Y" : "N", 100.0 * r.quadrant_fractions[k], r.quadrant_counts[k]);
    }
    out += fmt::format("{:<12} {:>9} {:>7}\n", "paths", "", r.n_paths_total);
    return out;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "path_count,trials,mean_em,std_em,mean_f1,std_f1\n";
    for (const auto& p : curve) {
        out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", p.path_count, p.trials, p.mean_em, p.std_em,
                           p.mean_f1, p.std_f1);
    }
    return out;
}

}  // namespace recite::evalkit
