#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "evomd/errors.hpp"

namespace evomd {

// Newline-delimited JSON reader. Blank lines are skipped; parse errors carry
// the file name and 1-based line number.
class JsonlReader {
public:
    explicit JsonlReader(const std::filesystem::path& path)
        : path_(path.string()), in_(path) {
        if (!in_) throw ValidationError("cannot open " + path_);
    }

    bool next(nlohmann::json& out) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (line.empty()) continue;
            try {
                out = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ValidationError(location() + ": malformed record: " + e.what());
            }
            return true;
        }
        return false;
    }

    std::string location() const { return path_ + ":" + std::to_string(line_); }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_ = 0;
};

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    return out;
}

}  // namespace evomd
