#pragma once

// Strict field access for the line-delimited record formats. Every failure is
// a ParseError naming the field and an approximate byte offset in the line.

#include "recite/errors.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace recite::detail {

using json = nlohmann::json;

/// Single-line, key-sorted dump. Invalid UTF-8 is replaced rather than
/// thrown so a bad model output cannot abort a run.
inline std::string dump_line(const json& j) {
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

inline std::size_t field_offset(std::string_view line, std::string_view field) {
    std::string needle = "\"" + std::string(field) + "\"";
    auto pos = line.find(needle);
    return pos == std::string_view::npos ? line.size() : pos;
}

class Fields {
public:
    explicit Fields(std::string_view line) : line_(line) {
        if (line.find('\n') != std::string_view::npos) {
            throw ParseError("", line.find('\n'), "record spans more than one line");
        }
        try {
            obj_ = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("", e.byte, std::string("malformed JSON: ") + e.what());
        }
        if (!obj_.is_object()) throw ParseError("", 0, "record is not a JSON object");
    }

    const json& raw() const { return obj_; }

    bool has(std::string_view field) const { return obj_.contains(std::string(field)); }

    template <class T>
    T get(std::string_view field) const {
        auto it = obj_.find(std::string(field));
        if (it == obj_.end()) {
            throw ParseError(std::string(field), line_.size(),
                             "missing required field '" + std::string(field) + "'");
        }
        return convert<T>(field, *it);
    }

    template <class T>
    std::optional<T> get_optional(std::string_view field) const {
        auto it = obj_.find(std::string(field));
        if (it == obj_.end() || it->is_null()) return std::nullopt;
        return convert<T>(field, *it);
    }

    [[noreturn]] void fail(std::string_view field, const std::string& what) const {
        throw ParseError(std::string(field), field_offset(line_, field),
                         "field '" + std::string(field) + "': " + what);
    }

private:
    template <class T>
    T convert(std::string_view field, const json& v) const {
        try {
            if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) fail(field, "expected string");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) fail(field, "expected integer");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) fail(field, "expected number");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            fail(field, e.what());
        }
    }

    std::string_view line_;
    json obj_;
};

}  // namespace recite::detail
