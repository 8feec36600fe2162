#pragma once

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace mwspill::cli {

inline constexpr const char* kToolVersion = "0.3.0";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Everything that determines a run's outputs, plus the output hashes.
struct RunManifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
    std::vector<std::pair<std::string, std::string>> outputs;  // file name, sha256
    nlohmann::json config = nlohmann::json::object();
    unsigned long long seed = 0;

    void add_input(const std::string& path);
    nlohmann::json to_json() const;
};

// Entry point of the command-line tool. Errors are reported as one JSON
// object on stderr and a nonzero exit code.
int run(int argc, char** argv);

}  // namespace mwspill::cli
