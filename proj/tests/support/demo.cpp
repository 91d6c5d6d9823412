#include "demo.hpp"

#include "fixtures.hpp"
#include "recite/jsonl.hpp"
#include "recite/promptset.hpp"

#include "json.hpp"

namespace recite::testing {

namespace {

struct DemoItem {
    const char* id;
    const char* question;
    const char* answer;
    const char* evidence;
    const char* wrong;
};

// Every path recites the evidence or a distractor; most answer correctly.
const std::vector<DemoItem>& items() {
    static const std::vector<DemoItem> v = {
        {"demo-1", "Who wrote Pride and Prejudice?", "Jane Austen",
         "Pride and Prejudice is an 1813 novel by Jane Austen.", "Charlotte Bronte"},
        {"demo-2", "What is the capital of Canada?", "Ottawa",
         "Ottawa is the capital city of Canada, located on the Ottawa River.", "Toronto"},
        {"demo-3", "Which planet is known as the Red Planet?", "Mars",
         "Mars is often called the Red Planet because of its reddish appearance.", "Jupiter"},
        {"demo-4", "Who developed the theory of general relativity?", "Albert Einstein",
         "General relativity was published by Albert Einstein in 1915.", "Isaac Newton"},
        {"demo-5", "What is the largest ocean on Earth?", "the Pacific Ocean",
         "The Pacific Ocean is the largest and deepest of the world's oceans.", "the Atlantic Ocean"},
        {"demo-6", "In which city is the Colosseum?", "Rome",
         "The Colosseum is an ancient amphitheatre in the centre of Rome, Italy.", "Athens"},
        {"demo-7", "What is the hardest natural substance?", "diamond",
         "Diamond is the hardest naturally occurring material known.", "quartz"},
        {"demo-8", "Who composed The Magic Flute?", "Mozart",
         "The Magic Flute is an opera in two acts by Wolfgang Amadeus Mozart.", "Beethoven"},
    };
    return v;
}

}  // namespace

std::vector<QuestionRecord> demo_questions() {
    std::vector<QuestionRecord> out;
    for (const auto& it : items()) {
        QuestionRecord q;
        q.id = it.id;
        q.dataset = Dataset::TriviaQA;
        q.question = it.question;
        q.gold_answers = {it.answer};
        q.gold_evidence = it.evidence;
        out.push_back(std::move(q));
    }
    return out;
}

void write_demo(const std::string& dir, const std::string& prompts_dir, const std::string& prompts_ref, int paths,
                int shots, const std::vector<std::uint64_t>& exemplar_seeds) {
    std::filesystem::create_directories(dir);
    const auto questions = demo_questions();
    write_jsonl(dir + "/questions.jsonl", questions);

    auto set = promptset::load(prompts_dir);
    std::vector<std::vector<Exemplar>> pools;
    pools.push_back(promptset::select(set, Scheme::ReciteAnswer, shots, std::nullopt).qa);
    for (auto s : exemplar_seeds) pools.push_back(promptset::select(set, Scheme::ReciteAnswer, shots, s).qa);

    auto cfg = recite_config(paths);
    ScriptWriter w;
    for (const auto& qa : pools) {
        for (std::size_t i = 0; i < questions.size(); ++i) {
            const auto& it = items()[i];
            std::vector<std::string> recs, answers;
            for (int p = 0; p < paths; ++p) {
                // Question i gets i % 3 wrong paths, never a majority.
                const bool wrong = p < static_cast<int>(i % 3) && p < (paths - 1) / 2;
                recs.push_back(wrong ? std::string("Some sources mention ") + it.wrong + "."
                                     : std::string(it.evidence) + (p > 0 ? " (" + std::to_string(p) + ")" : ""));
                answers.push_back(wrong ? it.wrong : it.answer);
            }
            script_recite_answer(w, cfg, qa, questions[i], recs, answers);
        }
    }
    w.save(dir + "/script.jsonl");

    nlohmann::json run = {
        {"dataset", {{"path", "questions.jsonl"}}},
        {"scheme", "recite_answer"},
        {"n_paths", paths},
        {"shots", shots},
        {"recitation", {{"strategy", "top_k"}, {"k", 40}, {"temperature", 0.7}, {"seed", 0}}},
        {"backend", {{"type", "scripted"}, {"script", "script.jsonl"}}},
        {"prompts", prompts_ref},
        {"run_dir", "run"},
    };
    write_text(dir + "/run.json", run.dump(2) + "\n");
}

}  // namespace recite::testing
