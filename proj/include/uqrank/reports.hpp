#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "uqrank/calibration.hpp"
#include "uqrank/core_data.hpp"
#include "uqrank/grid.hpp"
#include "uqrank/nota.hpp"
#include "uqrank/risk.hpp"

namespace uqrank {

// Every report starts with a "# config=<hash>" line. Numbers use 9
// significant digits so reruns are byte-identical.
std::string format_number(double v);

struct ReliabilityCurve {
  std::string label;  // e.g. "deterministic/1"
  ReliabilityReport report;
};

// Columns: curve, bucket_low, bucket_high, size, mean_confidence,
// relevance_fraction. A Vega-Lite sidecar (<path>.vl.json) plots relevance
// fraction against confidence with the diagonal for reference.
void write_reliability_csv(const std::filesystem::path& path, const std::vector<ReliabilityCurve>& curves,
                           const std::string& config_hash);

// Columns: curve, n, buckets, ece.
void write_ece_summary_csv(const std::filesystem::path& path, const std::vector<ReliabilityCurve>& curves,
                           const std::string& config_hash);

// Columns: b, metric, gain_percent, plus a line-plot sidecar.
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                     const std::string& config_hash);

struct NotaRow {
  std::string features;
  NotaEvaluation result;
};

// Columns: features, mean_f1, std_f1, cell ("mean (std)").
void write_nota_csv(const std::filesystem::path& path, const std::vector<NotaRow>& rows,
                    const std::string& config_hash);

// One row per cell. Significance against the deterministic baseline is a
// separate boolean column per method.
void write_grid_csv(const std::filesystem::path& path, const ExperimentGrid& grid, const std::string& config_hash);

// instance_id, rank, candidate_id, score (tab separated).
void write_ranked_lists(const std::filesystem::path& path, const std::vector<RankedList>& lists,
                        const std::vector<std::vector<std::string>>& candidate_ids, const std::string& config_hash);

struct RankedListFile {
  std::string config_hash;
  // instance id -> candidate ids in rank order
  std::vector<std::pair<std::string, std::vector<std::string>>> lists;
};

RankedListFile read_ranked_lists(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace uqrank
