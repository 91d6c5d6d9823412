#include "recite/datasets.hpp"

#include "json_fields.hpp"
#include "recite/errors.hpp"
#include "recite/jsonl.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <unordered_set>

namespace recite::datasets {

namespace {

using detail::json;

std::string trimmed(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

void add_alias(std::vector<std::string>& golds, std::string_view alias) {
    auto a = trimmed(alias);
    if (!a.empty() && std::find(golds.begin(), golds.end(), a) == golds.end()) golds.push_back(std::move(a));
}

json parse_whole(std::istream& in, std::string_view what) {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

std::string string_at(const json& j, const char* key, std::string_view where) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
        throw DataError(std::string(where) + ": missing string field '" + key + "'");
    }
    return j[key].get<std::string>();
}

}  // namespace

const std::vector<std::string>& adapter_names() {
    static const std::vector<std::string> names{"jsonl", "nq", "triviaqa", "hotpotqa"};
    return names;
}

std::vector<QuestionRecord> read_nq_open(std::istream& in) {
    std::vector<QuestionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            detail::Fields f(line);
            QuestionRecord q;
            q.dataset = Dataset::NQ;
            q.id = f.has("id") ? f.get<std::string>("id") : "nq-" + std::to_string(out.size());
            q.question = trimmed(f.get<std::string>("question"));
            for (const auto& a : f.get<std::vector<std::string>>("answer")) add_alias(q.gold_answers, a);
            if (auto la = f.get_optional<std::string>("long_answer")) q.gold_evidence = *la;
            out.push_back(std::move(q));
        } catch (const ParseError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<QuestionRecord> read_triviaqa(std::istream& in) {
    auto j = parse_whole(in, "triviaqa");
    if (!j.is_object() || !j.contains("Data") || !j["Data"].is_array()) {
        throw DataError("triviaqa: expected an object with a 'Data' array");
    }
    std::vector<QuestionRecord> out;
    for (std::size_t i = 0; i < j["Data"].size(); ++i) {
        const auto& item = j["Data"][i];
        const auto where = "triviaqa Data[" + std::to_string(i) + "]";
        QuestionRecord q;
        q.dataset = Dataset::TriviaQA;
        q.id = string_at(item, "QuestionId", where);
        q.question = trimmed(string_at(item, "Question", where));
        if (!item.contains("Answer") || !item["Answer"].is_object()) throw DataError(where + ": missing 'Answer'");
        const auto& ans = item["Answer"];
        add_alias(q.gold_answers, string_at(ans, "Value", where + ".Answer"));
        if (ans.contains("Aliases") && ans["Aliases"].is_array()) {
            for (const auto& a : ans["Aliases"]) {
                if (a.is_string()) add_alias(q.gold_answers, a.get<std::string>());
            }
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<QuestionRecord> read_hotpotqa(std::istream& in) {
    auto j = parse_whole(in, "hotpotqa");
    if (!j.is_array()) throw DataError("hotpotqa: expected a JSON array");
    std::vector<QuestionRecord> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& item = j[i];
        const auto where = "hotpotqa[" + std::to_string(i) + "]";
        QuestionRecord q;
        q.dataset = Dataset::HotpotQA;
        q.hop_count = 2;
        q.id = string_at(item, "_id", where);
        q.question = trimmed(string_at(item, "question", where));
        add_alias(q.gold_answers, string_at(item, "answer", where));
        if (item.contains("supporting_facts") && item.contains("context") && item["context"].is_array()) {
            std::string evidence;
            for (const auto& fact : item["supporting_facts"]) {
                if (!fact.is_array() || fact.size() < 2 || !fact[0].is_string() || !fact[1].is_number_integer()) {
                    throw DataError(where + ": malformed supporting fact");
                }
                const auto title = fact[0].get<std::string>();
                const auto sent = fact[1].get<std::size_t>();
                for (const auto& para : item["context"]) {
                    if (para.is_array() && para.size() == 2 && para[0] == title && para[1].is_array() &&
                        sent < para[1].size() && para[1][sent].is_string()) {
                        if (!evidence.empty()) evidence.push_back(' ');
                        evidence += trimmed(para[1][sent].get<std::string>());
                        break;
                    }
                }
            }
            if (!evidence.empty()) q.gold_evidence = std::move(evidence);
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<QuestionRecord> load(const std::string& path, std::string_view adapter) {
    std::vector<QuestionRecord> out;
    if (adapter == "jsonl") {
        out = read_jsonl<QuestionRecord>(path);
    } else {
        try {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw DataError("cannot open dataset");
            if (adapter == "nq") {
                out = read_nq_open(in);
            } else if (adapter == "triviaqa") {
                out = read_triviaqa(in);
            } else if (adapter == "hotpotqa") {
                out = read_hotpotqa(in);
            } else {
                throw ConfigError("unknown dataset adapter '" + std::string(adapter) + "'");
            }
        } catch (const DataError& e) {
            throw DataError(path + ": " + e.what());
        }
    }
    std::unordered_set<std::string> ids;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto problems = validate(out[i]);
        if (!problems.empty()) {
            throw DataError(path + ": record " + std::to_string(i + 1) + " ('" + out[i].id + "'): " + problems.front());
        }
        if (!ids.insert(out[i].id).second) throw DataError(path + ": duplicate question id '" + out[i].id + "'");
    }
    return out;
}

}  // namespace recite::datasets
