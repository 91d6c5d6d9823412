#include "bm25_reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace recite::testing {

double bm25_reference(const Docs& docs, const std::string& query, std::size_t doc, retrieval::Bm25Params p) {
    std::vector<std::vector<std::string>> toks;
    double total = 0;
    for (const auto& [id, text] : docs) {
        toks.push_back(retrieval::tokenize(text));
        total += static_cast<double>(toks.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avg = total / n;
    double score = 0;
    for (const auto& term : retrieval::tokenize(query)) {
        double df = 0;
        for (const auto& t : toks) df += std::find(t.begin(), t.end(), term) != t.end() ? 1 : 0;
        if (df == 0) continue;
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double tf = static_cast<double>(std::count(toks[doc].begin(), toks[doc].end(), term));
        const double len = static_cast<double>(toks[doc].size());
        score += idf * tf * (p.k1 + 1) / (tf + p.k1 * (1 - p.b + p.b * len / avg));
    }
    return score;
}

std::vector<retrieval::ScoredDoc> top_k_reference(const Docs& docs, const std::string& query, std::size_t k,
                                                  retrieval::Bm25Params p) {
    std::vector<retrieval::ScoredDoc> all;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        auto s = bm25_reference(docs, query, d, p);
        if (s > 0) all.push_back({docs[d].first, s});
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        const double ka = std::round(a.score * 1e10), kb = std::round(b.score * 1e10);
        if (ka != kb) return ka > kb;
        return a.id < b.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

namespace {

const std::vector<std::string>& vocab() {
    static const std::vector<std::string> v = [] {
        std::vector<std::string> out;
        for (int i = 0; i < 60; ++i) out.push_back("w" + std::to_string(i));
        return out;
    }();
    return v;
}

std::string word(std::mt19937_64& rng) {
    // Squaring a uniform skews toward low ranks.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto r = u(rng);
    return vocab()[static_cast<std::size_t>(r * r * static_cast<double>(vocab().size()))];
}

}  // namespace

Docs random_docs(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Docs out;
    for (std::size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "doc-%03zu", i);
        std::string text;
        auto len = rng() % 40;
        for (std::size_t w = 0; w < len; ++w) text += (w ? " " : "") + word(rng);
        out.emplace_back(id, text);
    }
    return out;
}

std::string random_query(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::string q;
    auto len = 1 + rng() % 4;
    for (std::size_t w = 0; w < len; ++w) q += (w ? " " : "") + word(rng);
    return q;
}

}  // namespace recite::testing
