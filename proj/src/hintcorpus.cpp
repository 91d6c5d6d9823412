#include "recite/hintcorpus.hpp"

#include "json_fields.hpp"
#include "recite/backend.hpp"
#include "recite/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace recite::hintcorpus {

namespace {

void check_component(std::string_view c, std::string_view what) {
    if (c.empty()) throw DataError(std::string(what) + " is empty");
    if (c.find(kHintDelimiter) != std::string_view::npos) {
        throw DataError(std::string(what) + " '" + std::string(c) + "' contains the hint delimiter");
    }
    if (c.find('\n') != std::string_view::npos) throw DataError(std::string(what) + " contains a newline");
    if (c.front() == ' ' || c.back() == ' ') {
        throw DataError(std::string(what) + " '" + std::string(c) + "' has edge spaces");
    }
    if (c.starts_with("--- ") || c.ends_with(" ---")) {
        throw DataError(std::string(what) + " '" + std::string(c) + "' would run into the hint delimiter");
    }
}

std::string collapse_ws(std::string_view s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
            pending = !out.empty();
        } else {
            if (pending) out.push_back(' ');
            pending = false;
            out.push_back(c);
        }
    }
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// "== Title ==" -> (2, "Title"); level 0 when the line is not a heading.
std::pair<int, std::string> heading(std::string_view line) {
    auto t = trim(line);
    std::size_t lead = 0;
    while (lead < t.size() && t[lead] == '=') ++lead;
    std::size_t tail = 0;
    while (tail < t.size() - lead && t[t.size() - 1 - tail] == '=') ++tail;
    if (lead == 0 || lead != tail || t.size() <= 2 * lead) return {0, {}};
    auto title = trim(std::string_view(t).substr(lead, t.size() - 2 * lead));
    if (title.empty()) return {0, {}};
    return {static_cast<int>(lead), title};
}

}  // namespace

std::string make_hint(std::string_view page_title, const std::vector<std::string>& section_path, int para_index) {
    check_component(page_title, "page title");
    for (const auto& s : section_path) check_component(s, "section title");
    if (para_index < 1) throw DataError("paragraph index must be >= 1");
    std::string out(page_title);
    for (const auto& s : section_path) {
        out.append(kHintDelimiter);
        out.append(s);
    }
    out.append(kHintDelimiter);
    out.append(kParagraphPrefix);
    out.append(std::to_string(para_index));
    return out;
}

HintParts parse_hint(std::string_view hint) {
    std::vector<std::string> parts;
    std::vector<std::size_t> starts;
    std::size_t pos = 0;
    while (true) {
        auto hit = hint.find(kHintDelimiter, pos);
        starts.push_back(pos);
        if (hit == std::string_view::npos) {
            parts.emplace_back(hint.substr(pos));
            break;
        }
        parts.emplace_back(hint.substr(pos, hit - pos));
        pos = hit + kHintDelimiter.size();
    }
    if (parts.size() < 2) throw ParseError("hint", hint.size(), "hint lacks a ' --- Paragraph #N' tail");
    const auto& tail = parts.back();
    const auto tail_at = starts.back();
    if (tail.rfind(kParagraphPrefix, 0) != 0) {
        throw ParseError("hint", tail_at, "last hint component must start with 'Paragraph #'");
    }
    auto digits = std::string_view(tail).substr(kParagraphPrefix.size());
    int index = 0;
    auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (digits.empty() || ec != std::errc() || end != digits.data() + digits.size() || digits.front() == '0' ||
        index < 1) {
        throw ParseError("hint", tail_at + kParagraphPrefix.size(), "paragraph number must be a positive integer");
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        const auto& c = parts[i];
        if (c.empty() || c.front() == ' ' || c.back() == ' ' || c.find('\n') != std::string::npos ||
            c.starts_with("--- ") || c.ends_with(" ---")) {
            throw ParseError("hint", starts[i], "malformed hint component");
        }
    }
    HintParts out;
    out.page_title = parts.front();
    out.section_path.assign(parts.begin() + 1, parts.end() - 1);
    out.para_index = index;
    return out;
}

std::vector<std::string> split_paragraphs(std::string_view text) {
    std::vector<std::string> out;
    std::string block;
    auto flush = [&] {
        auto p = collapse_ws(block);
        if (!p.empty()) out.push_back(std::move(p));
        block.clear();
    };
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (trim(line).empty()) {
            flush();
        } else {
            block.append(line);
            block.push_back('\n');
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    flush();
    return out;
}

std::vector<DumpDocument> read_jsonl_dump(std::istream& in) {
    std::vector<DumpDocument> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            detail::Fields f(line);
            DumpDocument doc;
            doc.title = f.get<std::string>("title");
            auto sections = f.get<detail::json>("sections");
            if (!sections.is_array()) f.fail("sections", "expected array");
            for (const auto& s : sections) {
                if (!s.is_object() || !s.contains("text") || !s["text"].is_string()) {
                    f.fail("sections", "each section needs a string 'text'");
                }
                DumpSection sec;
                sec.text = s["text"].get<std::string>();
                if (s.contains("path")) {
                    if (!s["path"].is_array()) f.fail("sections", "'path' must be an array of strings");
                    for (const auto& p : s["path"]) {
                        if (!p.is_string()) f.fail("sections", "'path' must be an array of strings");
                        sec.path.push_back(p.get<std::string>());
                    }
                }
                doc.sections.push_back(std::move(sec));
            }
            docs.push_back(std::move(doc));
        } catch (const ParseError& e) {
            throw DataError("dump line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

std::vector<DumpDocument> read_markup_dump(std::istream& in) {
    std::vector<DumpDocument> docs;
    std::vector<std::string> path;
    std::string text;
    std::string line;
    std::size_t lineno = 0;
    auto flush_section = [&] {
        if (docs.empty()) return;
        if (!trim(text).empty()) docs.back().sections.push_back(DumpSection{path, text});
        text.clear();
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto [level, title] = heading(line);
        if (level == 1) {
            flush_section();
            docs.push_back(DumpDocument{title, {}});
            path.clear();
        } else if (level > 1) {
            if (docs.empty()) throw DataError("dump line " + std::to_string(lineno) + ": section heading before any page title");
            flush_section();
            if (static_cast<std::size_t>(level - 1) > path.size() + 1) {
                throw DataError("dump line " + std::to_string(lineno) + ": heading level skips a parent section");
            }
            path.resize(level - 2);
            path.push_back(title);
        } else {
            if (docs.empty()) {
                if (trim(line).empty()) continue;
                throw DataError("dump line " + std::to_string(lineno) + ": text before any page title");
            }
            text.append(line);
            text.push_back('\n');
        }
    }
    flush_section();
    return docs;
}

Corpus::Corpus(std::vector<HintedPassage> passages) : passages_(std::move(passages)) {
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        auto [it, inserted] = by_hint_.emplace(passages_[i].hint, i);
        if (!inserted) throw DataError("duplicate passage hint '" + passages_[i].hint + "'");
    }
}

std::optional<std::size_t> Corpus::find_hint(std::string_view hint) const {
    auto it = by_hint_.find(std::string(hint));
    if (it == by_hint_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> Corpus::sample(std::size_t n, std::uint64_t seed) const {
    if (n > passages_.size()) {
        throw DataError("cannot sample " + std::to_string(n) + " passages from a corpus of " +
                        std::to_string(passages_.size()));
    }
    std::vector<std::size_t> all(passages_.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> out;
    std::mt19937_64 rng(seed);
    std::sample(all.begin(), all.end(), std::back_inserter(out), n, rng);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

void Corpus::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream passages(dir + "/passages.jsonl", std::ios::binary | std::ios::trunc);
    std::ofstream index(dir + "/hints.idx", std::ios::binary | std::ios::trunc);
    if (!passages || !index) throw DataError("cannot write corpus to " + dir);
    std::uint64_t offset = 0;
    for (const auto& p : passages_) {
        auto line = serialize(p);
        index << offset << '\t' << p.hint << '\n';
        passages << line << '\n';
        offset += line.size() + 1;
    }
    if (!passages || !index) throw DataError("write failed for corpus " + dir);
}

Corpus Corpus::load(const std::string& dir) {
    std::ifstream in(dir + "/passages.jsonl", std::ios::binary);
    if (!in) throw DataError("cannot open " + dir + "/passages.jsonl");
    std::vector<HintedPassage> passages;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            passages.push_back(deserialize<HintedPassage>(line));
        } catch (const ParseError& e) {
            throw DataError(dir + "/passages.jsonl:" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return Corpus(std::move(passages));
}

Corpus build_corpus(const std::vector<DumpDocument>& docs) {
    std::vector<HintedPassage> passages;
    std::set<std::string> seen;
    for (const auto& doc : docs) {
        // A section path repeated within one page continues its numbering.
        // Two pages with the same title collide.
        std::map<std::vector<std::string>, int> next_index;
        for (const auto& sec : doc.sections) {
            for (auto& para : split_paragraphs(sec.text)) {
                int idx = ++next_index[sec.path];
                HintedPassage p;
                p.page_title = doc.title;
                p.section_path = sec.path;
                p.para_index = idx;
                p.text = std::move(para);
                p.hint = make_hint(doc.title, sec.path, idx);
                if (!seen.insert(p.hint).second) throw DataError("duplicate passage hint '" + p.hint + "'");
                passages.push_back(std::move(p));
            }
        }
    }
    return Corpus(std::move(passages));
}

SyntheticResult generate_synthetic_triples(const Corpus& corpus, std::size_t n,
                                           const std::vector<prompting::QuestionGenExemplar>& exemplars,
                                           backend::Backend& backend, std::uint64_t seed,
                                           const SamplingParams& params, const prompting::PromptDialect& dialect,
                                           std::size_t max_in_flight) {
    if (exemplars.size() != kQuestionGenShots) {
        throw PromptError("question generation uses exactly " + std::to_string(kQuestionGenShots) +
                          " evidence/question exemplars, got " + std::to_string(exemplars.size()));
    }
    auto ids = corpus.sample(n, seed);
    SamplingParams p = params;
    if (p.stop_sequences.empty()) p.stop_sequences.push_back(dialect.rendered("\n"));
    std::vector<backend::GenerationRequest> requests;
    requests.reserve(ids.size());
    for (auto id : ids) {
        requests.push_back({prompting::build_question_generation_prompt(corpus.at(id).text, exemplars, dialect), p, 1});
    }
    auto slots = backend::generate_batch(backend, requests, max_in_flight);
    SyntheticResult out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!slots[i].ok()) {
            ++out.backend_failures;
            spdlog::warn("question generation failed for '{}': {}", corpus.at(ids[i]).hint, slots[i].error->what());
            continue;
        }
        auto question = collapse_ws(slots[i].result->texts.front());
        if (question.empty()) {
            ++out.dropped_empty;
            continue;
        }
        const auto& passage = corpus.at(ids[i]);
        out.triples.push_back(SyntheticTriple{std::move(question), passage.hint, passage.text});
    }
    return out;
}

}  // namespace recite::hintcorpus

namespace recite {

std::string serialize(const hintcorpus::HintedPassage& p) {
    detail::json j;
    j["page_title"] = p.page_title;
    j["section_path"] = p.section_path;
    j["para_index"] = p.para_index;
    j["text"] = p.text;
    j["hint"] = p.hint;
    return detail::dump_line(j);
}

std::string serialize(const hintcorpus::SyntheticTriple& t) {
    detail::json j;
    j["question"] = t.question;
    j["hint"] = t.hint;
    j["passage"] = t.passage;
    return detail::dump_line(j);
}

template <>
hintcorpus::HintedPassage deserialize<hintcorpus::HintedPassage>(std::string_view line) {
    detail::Fields f(line);
    hintcorpus::HintedPassage p;
    p.page_title = f.get<std::string>("page_title");
    p.section_path = f.get<std::vector<std::string>>("section_path");
    p.para_index = f.get<int>("para_index");
    p.text = f.get<std::string>("text");
    p.hint = f.get<std::string>("hint");
    std::string expected;
    try {
        expected = hintcorpus::make_hint(p.page_title, p.section_path, p.para_index);
    } catch (const DataError& e) {
        f.fail("hint", e.what());
    }
    if (expected != p.hint) f.fail("hint", "does not match page_title/section_path/para_index");
    if (p.text.empty()) f.fail("text", "empty passage");
    return p;
}

template <>
hintcorpus::SyntheticTriple deserialize<hintcorpus::SyntheticTriple>(std::string_view line) {
    detail::Fields f(line);
    hintcorpus::SyntheticTriple t;
    t.question = f.get<std::string>("question");
    t.hint = f.get<std::string>("hint");
    t.passage = f.get<std::string>("passage");
    return t;
}

}  // namespace recite
