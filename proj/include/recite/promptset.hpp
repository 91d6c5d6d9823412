#pragma once

#include "recite/core_model.hpp"
#include "recite/pipeline.hpp"
#include "recite/prompting.hpp"

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace recite::promptset {

/// Exemplar pools read from a prompt-set directory.
///
/// The directory holds a manifest.json such as
///   {"name": "nq", "files": {"qa": "qa.txt", "cot": "cot.txt",
///                            "hints": "hints.txt", "question_gen": "qgen.txt"}}
/// and plain-text exemplar files. Each file is a sequence of blocks separated
/// by blank lines; each block is a run of "Label: value" lines. A line with no
/// known label continues the previous value (joined with a space). Lines
/// starting with '#' are comments.
///
///   qa            Question, Recitation (0..n, in order), Answer
///   cot           Question, Rationale, Answer
///   hints         Question, Hint, Passage
///   question_gen  Passage, Question
struct PromptSet {
    std::string name;
    std::vector<Exemplar> qa;
    std::vector<Exemplar> cot;
    std::vector<prompting::HintExemplar> hints;
    std::vector<prompting::QuestionGenExemplar> question_gen;
    /// "<file>#<block>" per exemplar, parallel to the pools above.
    std::map<std::string, std::vector<std::string>> ids;
};

using Block = std::vector<std::pair<std::string, std::string>>;

/// Splits exemplar text into labeled blocks. `source` prefixes error
/// messages, which carry the 1-based line number.
std::vector<Block> parse_blocks(std::istream& in, const std::string& source);

PromptSet load(const std::string& dir);

/// Chooses `shots` exemplars per pool the scheme needs: the first `shots` in
/// file order, or, with a sample seed, a seeded sample in shuffled order.
/// Throws ConfigError when a needed pool is too small.
pipeline::RunExemplars select(const PromptSet& set, Scheme scheme, int shots,
                              std::optional<std::uint64_t> sample_seed);

}  // namespace recite::promptset
