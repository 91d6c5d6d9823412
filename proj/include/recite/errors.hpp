#pragma once

#include <stdexcept>
#include <string>

namespace recite {

/// Root of every exception the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration: missing file, bad field, invalid combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (datasets, dumps, run records).
class DataError : public Error {
public:
    using Error::Error;
};

/// A line that could not be decoded into a record. Carries the offending field
/// (empty when the line is not valid JSON at all) and the byte offset.
class ParseError : public DataError {
public:
    ParseError(std::string field, std::size_t offset, const std::string& what)
        : DataError(what), field_(std::move(field)), offset_(offset) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string field_;
    std::size_t offset_;
};

/// Input rejected by a prompt builder (missing recitations, separator
/// injection, wrong exemplar count).
class PromptError : public Error {
public:
    using Error::Error;
};

}  // namespace recite
