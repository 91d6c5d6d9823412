#pragma once

#include "recite/core_model.hpp"

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace recite::datasets {

/// Adapter names accepted by load(): "jsonl" (QuestionRecord lines), "nq"
/// (open-domain NQ lines), "triviaqa" (the unfiltered JSON release) and
/// "hotpotqa" (the distractor/fullwiki JSON array).
const std::vector<std::string>& adapter_names();

/// Reads and validates a dataset. Ids must be unique; every record must pass
/// validate(). Throws DataError naming the file and record.
std::vector<QuestionRecord> load(const std::string& path, std::string_view adapter);

/// {"question": "...", "answer": ["..."], optional "id", optional "long_answer"}
std::vector<QuestionRecord> read_nq_open(std::istream& in);

/// {"Data": [{"QuestionId", "Question", "Answer": {"Value", "Aliases"}}]}
std::vector<QuestionRecord> read_triviaqa(std::istream& in);

/// [{"_id", "question", "answer", "supporting_facts", "context"}]; the gold
/// evidence is the supporting sentences joined in order.
std::vector<QuestionRecord> read_hotpotqa(std::istream& in);

}  // namespace recite::datasets
