#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace recite::retrieval {

/// Lowercases ASCII, splits on runs of ASCII non-alphanumerics. Bytes >= 0x80
/// count as word characters, so UTF-8 letters pass through unchanged.
std::vector<std::string> tokenize(std::string_view text);

struct Bm25Params {
    double k1 = 0.9;
    double b = 0.4;

    bool operator==(const Bm25Params&) const = default;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
};

/// Ranking key: the score rounded to 1e-10.
inline double rank_key(double score) { return std::round(score * 1e10); }

struct ScoredDoc {
    std::string id;
    double score = 0.0;
};

/// Okapi BM25 over an in-memory inverted index. Immutable after build; every
/// query method is safe for concurrent readers.
class Bm25Index {
public:
    /// Throws DataError on duplicate doc ids.
    static Bm25Index build(const std::vector<std::pair<std::string, std::string>>& docs,
                           Bm25Params params = {});

    std::size_t doc_count() const { return doc_ids_.size(); }
    std::size_t vocabulary_size() const { return terms_.size(); }
    double avg_doc_len() const { return avg_doc_len_; }
    const Bm25Params& params() const { return params_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<std::uint32_t>& doc_lengths() const { return doc_lengths_; }
    /// Postings for a term in ascending doc order; empty when absent.
    const std::vector<Posting>& postings(std::string_view term) const;
    std::size_t doc_frequency(std::string_view term) const { return postings(term).size(); }

    /// ln(1 + (N - df + 0.5) / (df + 0.5)).
    double idf(std::string_view term) const;

    /// Sum over query tokens (repeats count) of idf * tf*(k1+1) / (tf + k1*(1-b+b*len/avg)).
    /// Throws DataError for an unknown doc id.
    double score(std::string_view query, std::string_view doc_id) const;

    /// Scores for every document, parallel across blocks of documents; equal
    /// bit for bit to score_all_serial.
    std::vector<double> score_all(std::string_view query) const;
    /// Serial term-at-a-time reference over the postings lists.
    std::vector<double> score_all_serial(std::string_view query) const;

    /// Highest-scoring documents with score > 0, descending, ties by ascending
    /// id. Scores that agree to rank_key() precision count as ties, so rounding
    /// noise between equal scores cannot reorder documents.
    std::vector<ScoredDoc> top_k(std::string_view query, std::size_t k) const;

    /// Line-delimited sidecar: a version header line, then one line per
    /// document with its id, length and term frequencies.
    void save(const std::string& path) const;
    static Bm25Index load(const std::string& path);

private:
    struct TermEntry {
        std::uint32_t term = 0;
        std::uint32_t tf = 0;
    };
    struct QueryTerm {
        std::uint32_t term = 0;
        double idf = 0.0;
    };

    std::vector<QueryTerm> resolve(std::string_view query) const;
    double term_weight(std::uint32_t tf, std::uint32_t doc) const;
    double score_doc(const std::vector<QueryTerm>& q, std::size_t doc) const;

    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::size_t> doc_lookup_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_len_ = 0.0;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::string> terms_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<std::vector<TermEntry>> forward_;  // per doc, sorted by term id
};

}  // namespace recite::retrieval
