#pragma once

#include "recite/backend.hpp"
#include "recite/core_model.hpp"
#include "recite/pipeline.hpp"
#include "recite/prompting.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace recite::testing {

std::vector<Exemplar> qa_exemplars(std::size_t n = 5);
std::vector<Exemplar> multihop_exemplars(std::size_t n = 4);
std::vector<Exemplar> cot_exemplars(std::size_t n = 5);
std::vector<prompting::HintExemplar> hint_exemplars(std::size_t n = 5);
std::vector<prompting::QuestionGenExemplar> qgen_exemplars(std::size_t n = 5);

/// "Which city is the capital of Country i?" with gold "City i" and an
/// evidence passage that names it.
std::vector<QuestionRecord> capital_questions(std::size_t n);

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

/// Collects prompt -> response-queue entries; feeds a ScriptedBackend or
/// writes a script file the CLI can load.
class ScriptWriter {
public:
    void add(const std::string& prompt, std::vector<std::string> responses);
    void apply(backend::ScriptedBackend& b) const;
    void save(const std::string& path) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
};

/// Scripts a recite-and-answer question: path i recites recitations[i] and
/// then answers answers[i].
void script_recite_answer(ScriptWriter& w, const pipeline::SchemeConfig& cfg, const std::vector<Exemplar>& qa,
                          const QuestionRecord& q, const std::vector<std::string>& recitations,
                          const std::vector<std::string>& answers);

pipeline::SchemeConfig recite_config(int n_paths);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace recite::testing
