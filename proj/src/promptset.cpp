#include "recite/promptset.hpp"

#include "json_fields.hpp"
#include "recite/errors.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>

namespace recite::promptset {

namespace {

namespace fs = std::filesystem;

constexpr std::array<std::string_view, 6> kLabels = {"Question", "Recitation", "Answer",
                                                     "Rationale", "Hint", "Passage"};

std::string trimmed(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Reader {
    const Block& block;
    std::string where;

    std::vector<std::string> all(std::string_view label) const {
        std::vector<std::string> out;
        for (const auto& [k, v] : block) {
            if (k == label) out.push_back(v);
        }
        return out;
    }

    std::string one(std::string_view label) const {
        auto v = all(label);
        if (v.size() != 1) {
            throw DataError(where + ": expected exactly one '" + std::string(label) + ":' line, found " +
                            std::to_string(v.size()));
        }
        return v.front();
    }

    void only(std::initializer_list<std::string_view> allowed) const {
        for (const auto& [k, v] : block) {
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
                throw DataError(where + ": label '" + k + ":' does not belong in this file");
            }
        }
    }
};

std::vector<Block> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open prompt file " + p.string());
    return parse_blocks(in, p.string());
}

template <class T>
std::vector<std::size_t> pick(const std::vector<T>& pool, int shots, std::optional<std::uint64_t> seed,
                              std::string_view what) {
    if (shots < 1) throw ConfigError("shots must be positive");
    const auto n = static_cast<std::size_t>(shots);
    if (pool.size() < n) {
        throw ConfigError("prompt set has " + std::to_string(pool.size()) + " " + std::string(what) +
                          " exemplars, " + std::to_string(n) + " needed");
    }
    if (seed) return prompting::sample_indices(pool.size(), n, *seed);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace

std::vector<Block> parse_blocks(std::istream& in, const std::string& source) {
    std::vector<Block> blocks;
    Block cur;
    std::string line;
    std::size_t lineno = 0;
    auto flush = [&] {
        if (!cur.empty()) blocks.push_back(std::move(cur));
        cur.clear();
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line.front() == '#') continue;
        auto text = trimmed(line);
        if (text.empty()) {
            flush();
            continue;
        }
        bool labeled = false;
        for (auto label : kLabels) {
            if (text.size() > label.size() && text.compare(0, label.size(), label) == 0 &&
                text[label.size()] == ':') {
                cur.emplace_back(std::string(label), trimmed(std::string_view(text).substr(label.size() + 1)));
                labeled = true;
                break;
            }
        }
        if (labeled) continue;
        if (cur.empty()) throw DataError(source + ":" + std::to_string(lineno) + ": text before any label");
        auto& value = cur.back().second;
        if (!value.empty()) value.push_back(' ');
        value += text;
    }
    flush();
    return blocks;
}

PromptSet load(const std::string& dir) {
    const fs::path root(dir);
    const auto manifest_path = root / "manifest.json";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw ConfigError("prompt set " + dir + " has no manifest.json");
    detail::json manifest;
    try {
        manifest = detail::json::parse(std::string(std::istreambuf_iterator<char>(in), {}));
    } catch (const detail::json::parse_error& e) {
        throw ConfigError(manifest_path.string() + ": " + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("files") || !manifest["files"].is_object()) {
        throw ConfigError(manifest_path.string() + ": expected {\"files\": {...}}");
    }
    PromptSet set;
    set.name = manifest.value("name", root.filename().string());
    for (auto it = manifest["files"].begin(); it != manifest["files"].end(); ++it) {
        const auto& kind = it.key();
        if (!it.value().is_string()) throw ConfigError(manifest_path.string() + ": files." + kind + " must be a string");
        const auto file = it.value().get<std::string>();
        auto blocks = read_file(root / file);
        auto& ids = set.ids[kind];
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            Reader r{blocks[b], file + " block " + std::to_string(b + 1)};
            if (kind == "qa") {
                r.only({"Question", "Recitation", "Answer"});
                set.qa.push_back(Exemplar{r.one("Question"), r.all("Recitation"), r.one("Answer"), std::nullopt});
            } else if (kind == "cot") {
                r.only({"Question", "Rationale", "Answer"});
                set.cot.push_back(Exemplar{r.one("Question"), {}, r.one("Answer"), r.one("Rationale")});
            } else if (kind == "hints") {
                r.only({"Question", "Hint", "Passage"});
                set.hints.push_back(prompting::HintExemplar{r.one("Question"), r.one("Hint"), r.one("Passage")});
            } else if (kind == "question_gen") {
                r.only({"Passage", "Question"});
                set.question_gen.push_back(prompting::QuestionGenExemplar{r.one("Passage"), r.one("Question")});
            } else {
                throw ConfigError(manifest_path.string() + ": unknown exemplar kind '" + kind + "'");
            }
            ids.push_back(file + "#" + std::to_string(b + 1));
        }
    }
    for (const auto& e : set.qa) {
        auto problems = validate(e);
        if (!problems.empty()) throw ConfigError(dir + ": qa exemplar '" + e.question + "': " + problems.front());
    }
    return set;
}

pipeline::RunExemplars select(const PromptSet& set, Scheme scheme, int shots,
                              std::optional<std::uint64_t> sample_seed) {
    pipeline::RunExemplars out;
    auto ids_of = [&](const std::string& kind, const std::vector<std::size_t>& idx) {
        const auto& ids = set.ids.at(kind);
        for (auto i : idx) out.ids.push_back(ids[i]);
    };
    if (scheme == Scheme::ChainOfThought) {
        auto idx = pick(set.cot, shots, sample_seed, "cot");
        for (auto i : idx) out.cot.push_back(set.cot[i]);
        ids_of("cot", idx);
        return out;
    }
    auto idx = pick(set.qa, shots, sample_seed, "qa");
    for (auto i : idx) out.qa.push_back(set.qa[i]);
    ids_of("qa", idx);
    if (scheme == Scheme::DiversifiedRecite) {
        auto hidx = pick(set.hints, shots, sample_seed ? std::optional(*sample_seed + 1) : std::nullopt, "hint");
        for (auto i : hidx) out.hints.push_back(set.hints[i]);
        ids_of("hints", hidx);
    }
    return out;
}

}  // namespace recite::promptset
