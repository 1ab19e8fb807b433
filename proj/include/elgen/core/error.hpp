#pragma once

#include <stdexcept>
#include <string>

namespace elgen {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: validation/parameter -> 2, dependency -> 3, io -> 4.
struct ParameterError : std::runtime_error {
    explicit ParameterError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DependencyError : std::runtime_error {
    explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct VocabularyError : ParameterError {
    explicit VocabularyError(const std::string& msg) : ParameterError(msg) {}
};

}  // namespace elgen
