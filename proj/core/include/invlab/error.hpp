#pragma once

#include <stdexcept>
#include <string>

namespace invlab {

// Base class for all toolkit failures.  What() always carries enough context
// (file path, row index, config id, ...) to locate the offending input.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (manifest, embedding file, label file).
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error(msg) {}
};

// A statistic that is undefined for the given data, e.g. the Pearson
// correlation of a constant vector.  Callers that can skip the offending
// observation catch this and log the reason.
class DegenerateStatError : public Error {
public:
    explicit DegenerateStatError(const std::string& msg) : Error(msg) {}
};

}  // namespace invlab
