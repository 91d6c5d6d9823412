#include "golden_prompts.hpp"

#include "fixtures.hpp"

#include <cstdlib>
#include <filesystem>

namespace recite::testing {

std::vector<std::pair<std::string, std::string>> golden_prompts(const prompting::PromptDialect& dialect) {
    using namespace prompting;
    std::vector<std::pair<std::string, std::string>> out;

    PromptSpec base;
    base.dialect = dialect;
    base.target_question = "Who was the first person to walk on the Moon?";

    auto recite = base;
    recite.scheme = Scheme::ReciteAnswer;
    recite.exemplars = qa_exemplars(3);
    out.emplace_back("recitation", build_recitation_prompt(recite));

    auto qa = recite;
    qa.target_recitations = {"Neil Armstrong was the first person to walk on the Moon, on July 21, 1969."};
    out.emplace_back("qa", build_qa_prompt(qa));

    auto direct = base;
    direct.scheme = Scheme::Direct;
    for (auto e : qa_exemplars(3)) {
        e.recitations.clear();
        direct.exemplars.push_back(e);
    }
    out.emplace_back("direct", build_qa_prompt(direct));

    auto hop = base;
    hop.scheme = Scheme::MultiHopRecite;
    hop.exemplars = multihop_exemplars(2);
    hop.target_question = "Which country is the birthplace of the author of Don Quixote?";
    out.emplace_back("multihop", build_multihop_prompt(hop));

    auto hop_qa = hop;
    hop_qa.target_recitations = {"Don Quixote is a novel by Miguel de Cervantes.",
                                 "Miguel de Cervantes was born in Alcala de Henares, Spain."};
    out.emplace_back("multihop_qa", build_qa_prompt(hop_qa));

    auto diversified = qa;
    diversified.scheme = Scheme::DiversifiedRecite;
    diversified.target_recitations = {"Neil Armstrong stepped onto the lunar surface first.",
                                      "Buzz Aldrin followed Armstrong onto the Moon."};
    out.emplace_back("diversified_qa", build_qa_prompt(diversified));

    auto hints = build_hint_prompts(base.target_question, hint_exemplars(3), dialect);
    out.emplace_back("hint", hints.hint_prompt);
    out.emplace_back("hint_passage", hints.passage_prompt.render("Apollo 11 --- Lunar surface operations --- Paragraph #1"));

    out.emplace_back("question_gen",
                     build_question_generation_prompt("The Rosetta Stone was found in 1799 near Rashid.",
                                                      qgen_exemplars(5), dialect));

    auto cot = base;
    cot.scheme = Scheme::ChainOfThought;
    cot.exemplars = cot_exemplars(3);
    out.emplace_back("cot", build_cot_prompt(cot));
    return out;
}

std::vector<std::pair<std::string, std::string>> all_golden_prompts() {
    auto out = golden_prompts(prompting::PromptDialect::default_dialect());
    for (auto& [name, text] : golden_prompts(prompting::PromptDialect::ul2())) out.emplace_back(name + ".ul2", text);
    return out;
}

std::vector<std::string> check_goldens(const std::string& golden_dir) {
    const bool update = std::getenv("RECITE_UPDATE_GOLDEN") != nullptr;
    std::vector<std::string> mismatched;
    for (const auto& [name, text] : all_golden_prompts()) {
        const auto path = golden_dir + "/" + name + ".txt";
        if (update) {
            write_text(path, text);
            continue;
        }
        if (!std::filesystem::exists(path) || read_text(path) != text) mismatched.push_back(name);
    }
    return mismatched;
}

}  // namespace recite::testing
