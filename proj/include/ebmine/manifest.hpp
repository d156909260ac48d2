#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ebmine {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a 64 over the raw bytes of a file, rendered as 16 hex digits.
std::string file_digest(const std::string& path);

// Every CLI run records what it read and wrote so reruns can be checked and
// pipeline steps can be linked output-digest to input-digest.
struct Manifest {
    std::string subcommand;
    std::string config_json; // echo of the effective configuration, as JSON text
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

// Writes <primary_output>.manifest.json with tool version, subcommand, the
// parsed config echo, and path+digest for every declared input and output.
void write_manifest(const Manifest& m, const std::string& primary_output);

} // namespace ebmine
