#include "fixtures.hpp"

#include "recite/hashing.hpp"

#include "json.hpp"

#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>

namespace recite::testing {

namespace fs = std::filesystem;

std::vector<Exemplar> qa_exemplars(std::size_t n) {
    static const std::vector<Exemplar> pool = {
        {"When did the first moon landing happen?",
         {"Apollo 11 was the American spaceflight that first landed humans on the Moon, on July 20, 1969."},
         "July 20, 1969", std::nullopt},
        {"Who wrote the novel Middlemarch?",
         {"Middlemarch is a novel by the English author Mary Ann Evans, who wrote as George Eliot."},
         "George Eliot", std::nullopt},
        {"What is the chemical symbol for tungsten?",
         {"Tungsten is a chemical element with the symbol W and atomic number 74."}, "W", std::nullopt},
        {"Which river flows through Budapest?",
         {"Budapest is the capital of Hungary. The city straddles the Danube river."}, "the Danube", std::nullopt},
        {"How many strings does a standard violin have?",
         {"The violin typically has four strings tuned in perfect fifths."}, "four", std::nullopt},
        {"Who painted The Night Watch?",
         {"The Night Watch is a 1642 painting by Rembrandt van Rijn."}, "Rembrandt", std::nullopt},
        {"What is the largest moon of Saturn?",
         {"Titan is the largest moon of Saturn and the second-largest in the Solar System."}, "Titan",
         std::nullopt},
    };
    if (n > pool.size()) throw std::out_of_range("qa exemplar pool");
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<Exemplar> multihop_exemplars(std::size_t n) {
    static const std::vector<Exemplar> pool = {
        {"Which country is the birthplace of the director of Parasite?",
         {"Parasite is a 2019 film directed by Bong Joon-ho.",
          "Bong Joon-ho is a film director born in Daegu, South Korea."},
         "South Korea", std::nullopt},
        {"In what year was the author of Dune born?",
         {"Dune is a 1965 science fiction novel by Frank Herbert.", "Frank Herbert was born on October 8, 1920."},
         "1920", std::nullopt},
        {"What instrument did the composer of The Four Seasons play?",
         {"The Four Seasons is a group of violin concertos by Antonio Vivaldi.",
          "Antonio Vivaldi was a virtuoso violinist."},
         "violin", std::nullopt},
        {"Which city hosts the university where Alan Turing earned his PhD?",
         {"Alan Turing earned his PhD at Princeton University.", "Princeton University is in Princeton, New Jersey."},
         "Princeton", std::nullopt},
    };
    if (n > pool.size()) throw std::out_of_range("multihop exemplar pool");
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<Exemplar> cot_exemplars(std::size_t n) {
    static const std::vector<Exemplar> pool = {
        {"Roger has 5 tennis balls. He buys 2 more cans of 3 balls each. How many does he have now?",
         {}, "11", "Roger started with 5 balls. 2 cans of 3 balls each is 6 balls. 5 + 6 = 11."},
        {"Who was president of the United States when the Eiffel Tower opened?",
         {}, "Benjamin Harrison",
         "The Eiffel Tower opened in 1889. Benjamin Harrison was president from 1889 to 1893."},
        {"Is the Danube longer than the Thames?",
         {}, "yes", "The Danube is about 2,850 km long. The Thames is about 346 km long."},
        {"What is the capital of the country where the Taj Mahal is?",
         {}, "New Delhi", "The Taj Mahal is in India. The capital of India is New Delhi."},
        {"How many legs do three spiders have in total?",
         {}, "24", "A spider has 8 legs. Three spiders have 3 * 8 = 24 legs."},
    };
    if (n > pool.size()) throw std::out_of_range("cot exemplar pool");
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<prompting::HintExemplar> hint_exemplars(std::size_t n) {
    static const std::vector<prompting::HintExemplar> pool = {
        {"What is the order of the net in the network?",
         "Network topology --- Topology --- Paragraph #2",
         "The order of a network is the number of nodes it contains."},
        {"Who designed the Sydney Opera House?", "Sydney Opera House --- Paragraph #1",
         "The Sydney Opera House was designed by Danish architect Jørn Utzon."},
        {"When was the Magna Carta sealed?", "Magna Carta --- History --- Paragraph #1",
         "King John sealed Magna Carta at Runnymede on 15 June 1215."},
        {"What gas do plants absorb for photosynthesis?", "Photosynthesis --- Process --- Paragraph #3",
         "Plants take in carbon dioxide and release oxygen during photosynthesis."},
        {"Who discovered penicillin?", "Penicillin --- Discovery --- Paragraph #1",
         "Alexander Fleming discovered penicillin in 1928."},
    };
    if (n > pool.size()) throw std::out_of_range("hint exemplar pool");
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<prompting::QuestionGenExemplar> qgen_exemplars(std::size_t n) {
    static const std::vector<prompting::QuestionGenExemplar> pool = {
        {"Mount Kilimanjaro is the highest mountain in Africa.", "What is the highest mountain in Africa?"},
        {"The Great Fire of London began on 2 September 1666.", "When did the Great Fire of London begin?"},
        {"Marie Curie was the first woman to win a Nobel Prize.", "Who was the first woman to win a Nobel Prize?"},
        {"The Amazon river discharges more water than any other river.",
         "Which river discharges the most water?"},
        {"Canberra was selected as the capital of Australia in 1908.", "What is the capital of Australia?"},
    };
    if (n > pool.size()) throw std::out_of_range("question generation exemplar pool");
    return {pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::vector<QuestionRecord> capital_questions(std::size_t n) {
    std::vector<QuestionRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        QuestionRecord q;
        q.id = "cap-" + std::to_string(i);
        q.dataset = Dataset::NQ;
        q.question = "Which city is the capital of Country " + std::to_string(i) + "?";
        q.gold_answers = {"City " + std::to_string(i)};
        q.gold_evidence = "Country " + std::to_string(i) + " is a small state. Its capital and largest city is City " +
                          std::to_string(i) + ".";
        out.push_back(std::move(q));
    }
    return out;
}

TempDir::TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = fs::temp_directory_path() / ("recite-test-" + std::to_string(rng()));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void ScriptWriter::add(const std::string& prompt, std::vector<std::string> responses) {
    entries_.emplace_back(prompt, std::move(responses));
}

void ScriptWriter::apply(backend::ScriptedBackend& b) const {
    for (const auto& [prompt, responses] : entries_) b.add(prompt, responses);
}

void ScriptWriter::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& [prompt, responses] : entries_) {
        nlohmann::json j{{"prompt_hash", sha256_hex(prompt)}, {"responses", responses}};
        out << j.dump() << '\n';
    }
}

void script_recite_answer(ScriptWriter& w, const pipeline::SchemeConfig& cfg, const std::vector<Exemplar>& qa,
                          const QuestionRecord& q, const std::vector<std::string>& recitations,
                          const std::vector<std::string>& answers) {
    prompting::PromptSpec spec;
    spec.scheme = Scheme::ReciteAnswer;
    spec.exemplars = qa;
    spec.target_question = q.question;
    spec.dialect = cfg.dialect;
    std::vector<std::string> queue;
    for (const auto& r : recitations) queue.push_back(" " + r + "\n\nQuestion: unrelated follow-up");
    w.add(prompting::build_recitation_prompt(spec), queue);
    for (std::size_t i = 0; i < recitations.size(); ++i) {
        auto qa_spec = spec;
        qa_spec.target_recitations = {recitations[i]};
        w.add(prompting::build_qa_prompt(qa_spec), {" " + answers[i] + "\n\n\nQuestion: next"});
    }
}

pipeline::SchemeConfig recite_config(int n_paths) {
    pipeline::SchemeConfig cfg;
    cfg.scheme = Scheme::ReciteAnswer;
    cfg.n_paths = n_paths;
    cfg.max_in_flight = 4;
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace recite::testing
