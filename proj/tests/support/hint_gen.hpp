#pragma once

#include "recite/hintcorpus.hpp"

#include <random>
#include <string>

namespace recite::testing {

/// Random valid hint components: dashes, '#', digits, unicode and inner
/// spaces, but never the delimiter, a newline, edge spaces, or a
/// "--- " prefix / " ---" suffix that would merge with the delimiter.
inline hintcorpus::HintParts random_hint_parts(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {"a", "Z", "7", "-", "--", "#", " ", "é", "Paragraph", "(", ")",
                                                    ":", "'", "日本", ",", "."};
    auto component = [&] {
        std::string s;
        auto len = 1 + rng() % 12;
        for (std::size_t i = 0; i < len; ++i) s += pieces[rng() % pieces.size()];
        while (s.find(" --- ") != std::string::npos) s.replace(s.find(" --- "), 5, " -x- ");
        while (!s.empty() && s.front() == ' ') s.erase(0, 1);
        while (!s.empty() && s.back() == ' ') s.pop_back();
        if (s.starts_with("--- ")) s[0] = 'x';
        if (s.ends_with(" ---")) s.back() = 'x';
        return s.empty() ? std::string("x") : s;
    };
    hintcorpus::HintParts p;
    p.page_title = component();
    auto depth = rng() % 4;
    for (std::size_t i = 0; i < depth; ++i) p.section_path.push_back(component());
    p.para_index = 1 + static_cast<int>(rng() % 500);
    return p;
}

}  // namespace recite::testing
