#pragma once

#include <stdexcept>
#include <string>

namespace evomd {

// Bad inputs: malformed files, invalid configs, violated preconditions.
// The CLI maps these to exit code 2, everything else to 3.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(stage) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

}  // namespace evomd
