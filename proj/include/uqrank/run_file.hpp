#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "uqrank/core_data.hpp"

namespace uqrank {

// Tab-separated interchange format between scoring and analysis:
//
//   #uqrank-run v1<TAB>source=<src><TAB>seeds=<s0,s1,...><TAB>config=<hash>
//   <instance_id><TAB><candidate_id><TAB><sample_index><TAB><score>
//
// Scores use 9 significant digits. Lines are grouped by instance, then
// candidate, then sample index.
struct RunFile {
  DistributionSource source = DistributionSource::deterministic;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  std::vector<PredictiveDistribution> distributions;
};

std::string format_run_file(const RunFile& run);
RunFile parse_run_file(std::string_view content);

void write_run_file(const std::filesystem::path& path, const RunFile& run);
RunFile read_run_file(const std::filesystem::path& path);

}  // namespace uqrank
