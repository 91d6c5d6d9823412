#include "recite/retrieval.hpp"

#include "json_fields.hpp"
#include "recite/errors.hpp"
#include "text_case.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace recite::retrieval {

namespace {

constexpr std::string_view kFormat = "recite-bm25";
constexpr int kVersion = 1;

bool is_token_char(unsigned char c) {
    return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

const std::vector<Posting> kNoPostings;

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (is_token_char(c)) {
            cur.push_back(ch);
        } else if (!cur.empty()) {
            out.push_back(detail::utf8_lower(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(detail::utf8_lower(cur));
    return out;
}

Bm25Index Bm25Index::build(const std::vector<std::pair<std::string, std::string>>& docs, Bm25Params params) {
    Bm25Index idx;
    idx.params_ = params;
    std::uint64_t total_len = 0;
    for (const auto& [id, text] : docs) {
        if (!idx.doc_lookup_.emplace(id, idx.doc_ids_.size()).second) {
            throw DataError("duplicate document id '" + id + "'");
        }
        const auto doc = static_cast<std::uint32_t>(idx.doc_ids_.size());
        idx.doc_ids_.push_back(id);
        auto tokens = tokenize(text);
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total_len += tokens.size();

        std::map<std::uint32_t, std::uint32_t> tf;
        for (auto& t : tokens) {
            auto [it, inserted] = idx.term_ids_.emplace(std::move(t), static_cast<std::uint32_t>(idx.terms_.size()));
            if (inserted) {
                idx.terms_.push_back(it->first);
                idx.postings_.emplace_back();
            }
            ++tf[it->second];
        }
        auto& fwd = idx.forward_.emplace_back();
        for (auto [term, count] : tf) {
            idx.postings_[term].push_back(Posting{doc, count});
            fwd.push_back(TermEntry{term, count});
        }
    }
    idx.avg_doc_len_ = idx.doc_ids_.empty() ? 0.0
                                             : static_cast<double>(total_len) / static_cast<double>(idx.doc_ids_.size());
    return idx;
}

const std::vector<Posting>& Bm25Index::postings(std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    return it == term_ids_.end() ? kNoPostings : postings_[it->second];
}

double Bm25Index::idf(std::string_view term) const {
    auto n = static_cast<double>(doc_ids_.size());
    auto df = static_cast<double>(doc_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::term_weight(std::uint32_t tf, std::uint32_t doc) const {
    const double f = tf;
    const double ratio = avg_doc_len_ > 0.0 ? doc_lengths_[doc] / avg_doc_len_ : 0.0;
    return f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * ratio));
}

// Unknown query terms are dropped: they contribute nothing to any document.
std::vector<Bm25Index::QueryTerm> Bm25Index::resolve(std::string_view query) const {
    std::vector<QueryTerm> out;
    for (const auto& t : tokenize(query)) {
        auto it = term_ids_.find(t);
        if (it != term_ids_.end()) out.push_back(QueryTerm{it->second, idf(t)});
    }
    return out;
}

double Bm25Index::score_doc(const std::vector<QueryTerm>& q, std::size_t doc) const {
    const auto& fwd = forward_[doc];
    double score = 0.0;
    for (const auto& qt : q) {
        auto it = std::lower_bound(fwd.begin(), fwd.end(), qt.term,
                                   [](const TermEntry& e, std::uint32_t t) { return e.term < t; });
        if (it != fwd.end() && it->term == qt.term) {
            score += qt.idf * term_weight(it->tf, static_cast<std::uint32_t>(doc));
        }
    }
    return score;
}

double Bm25Index::score(std::string_view query, std::string_view doc_id) const {
    auto it = doc_lookup_.find(std::string(doc_id));
    if (it == doc_lookup_.end()) throw DataError("unknown document id '" + std::string(doc_id) + "'");
    return score_doc(resolve(query), it->second);
}

std::vector<double> Bm25Index::score_all(std::string_view query) const {
    const auto q = resolve(query);
    std::vector<double> scores(doc_ids_.size(), 0.0);
    // Each block walks the postings of its document range in query-term
    // order, matching the serial accumulation order exactly.
    constexpr std::size_t kBlock = 4096;
    const auto blocks = static_cast<std::ptrdiff_t>((doc_ids_.size() + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
        const auto lo = static_cast<std::uint32_t>(static_cast<std::size_t>(blk) * kBlock);
        const auto hi = static_cast<std::uint32_t>(std::min(doc_ids_.size(), static_cast<std::size_t>(lo) + kBlock));
        for (const auto& qt : q) {
            const auto& plist = postings_[qt.term];
            auto it = std::lower_bound(plist.begin(), plist.end(), lo,
                                       [](const Posting& p, std::uint32_t d) { return p.doc < d; });
            for (; it != plist.end() && it->doc < hi; ++it) scores[it->doc] += qt.idf * term_weight(it->tf, it->doc);
        }
    }
    return scores;
}

std::vector<double> Bm25Index::score_all_serial(std::string_view query) const {
    std::vector<double> scores(doc_ids_.size(), 0.0);
    for (const auto& qt : resolve(query)) {
        for (const auto& p : postings_[qt.term]) scores[p.doc] += qt.idf * term_weight(p.tf, p.doc);
    }
    return scores;
}

std::vector<ScoredDoc> Bm25Index::top_k(std::string_view query, std::size_t k) const {
    auto scores = score_all(query);
    std::vector<std::size_t> hits;
    for (std::size_t d = 0; d < scores.size(); ++d) {
        if (scores[d] > 0.0) hits.push_back(d);
    }
    auto better = [&](std::size_t a, std::size_t b) {
        const double ka = rank_key(scores[a]), kb = rank_key(scores[b]);
        if (ka != kb) return ka > kb;
        return doc_ids_[a] < doc_ids_[b];
    };
    auto keep = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
    std::vector<ScoredDoc> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(ScoredDoc{doc_ids_[hits[i]], scores[hits[i]]});
    return out;
}

void Bm25Index::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write index " + path);
    detail::json header{{"format", kFormat}, {"version", kVersion}, {"k1", params_.k1}, {"b", params_.b},
                        {"docs", doc_ids_.size()}};
    out << detail::dump_line(header) << '\n';
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        detail::json terms = detail::json::object();
        for (const auto& e : forward_[d]) terms[terms_[e.term]] = e.tf;
        detail::json line{{"id", doc_ids_[d]}, {"len", doc_lengths_[d]}, {"tf", terms}};
        out << detail::dump_line(line) << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

Bm25Index Bm25Index::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open index " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty index file");
    Bm25Index idx;
    std::size_t expected_docs = 0;
    try {
        detail::Fields h(line);
        if (h.get<std::string>("format") != kFormat) h.fail("format", "not a BM25 index");
        if (h.get<int>("version") != kVersion) h.fail("version", "unsupported index version");
        idx.params_.k1 = h.get<double>("k1");
        idx.params_.b = h.get<double>("b");
        expected_docs = h.get<std::size_t>("docs");
    } catch (const ParseError& e) {
        throw DataError(path + ":1: " + e.what());
    }
    std::uint64_t total_len = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            detail::Fields f(line);
            auto id = f.get<std::string>("id");
            auto len = f.get<std::uint32_t>("len");
            auto tf = f.get<detail::json>("tf");
            if (!tf.is_object()) f.fail("tf", "expected object");
            const auto doc = static_cast<std::uint32_t>(idx.doc_ids_.size());
            if (!idx.doc_lookup_.emplace(id, doc).second) f.fail("id", "duplicate document id");
            idx.doc_ids_.push_back(id);
            idx.doc_lengths_.push_back(len);
            total_len += len;
            std::map<std::uint32_t, std::uint32_t> entries;
            for (auto it = tf.begin(); it != tf.end(); ++it) {
                if (!it.value().is_number_unsigned() || it.value().get<std::uint32_t>() == 0) {
                    f.fail("tf", "term frequencies must be positive integers");
                }
                auto [t, inserted] =
                    idx.term_ids_.emplace(it.key(), static_cast<std::uint32_t>(idx.terms_.size()));
                if (inserted) {
                    idx.terms_.push_back(it.key());
                    idx.postings_.emplace_back();
                }
                entries[t->second] = it.value().get<std::uint32_t>();
            }
            auto& fwd = idx.forward_.emplace_back();
            for (auto [term, count] : entries) {
                idx.postings_[term].push_back(Posting{doc, count});
                fwd.push_back(TermEntry{term, count});
            }
        } catch (const ParseError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (idx.doc_ids_.size() != expected_docs) throw DataError(path + ": truncated index (document count mismatch)");
    idx.avg_doc_len_ = idx.doc_ids_.empty() ? 0.0
                                             : static_cast<double>(total_len) / static_cast<double>(idx.doc_ids_.size());
    return idx;
}

}  // namespace recite::retrieval
