#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "uqrank/config.hpp"

namespace uqrank {

// Entry point of the `uqrank` tool. Returns the process exit status.
int cli_dispatch(int argc, char** argv);
int cli_dispatch(const std::vector<std::string>& args);

// Writes the synthetic corpora named by the config (train, test, shifted
// train, shifted test). Returns the written paths.
std::vector<std::filesystem::path> generate_corpora(const ExperimentConfig& cfg);

// gen -> train -> predict -> calibrate -> sweep-b -> nota under the output
// directory, finishing with manifest.txt (size and FNV-1a digest of every
// artifact). Returns artifact paths relative to the output directory.
std::vector<std::filesystem::path> run_pipeline(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace uqrank
