#pragma once

#include "recite/core_model.hpp"
#include "recite/errors.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace recite {

/// Reads every non-blank line of a line-delimited file through
/// `deserialize<T>`. Parse failures are rethrown as DataError with the
/// 1-based line number prepended.
template <class T>
std::vector<T> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            out.push_back(deserialize<T>(line));
        } catch (const ParseError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

template <class T>
void write_jsonl(const std::string& path, const std::vector<T>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& r : records) out << serialize(r) << '\n';
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace recite
