#include "uqrank/reports.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace uqrank {

namespace {

std::string header(const std::string& hash) { return "# config=" + hash + "\n"; }

std::string bool_text(bool v) { return v ? "true" : "false"; }

void write_plot(const std::filesystem::path& csv_path, nlohmann::ordered_json spec) {
  write_text(csv_path.string() + ".vl.json", spec.dump(2) + "\n");
}

nlohmann::ordered_json plot_base(const std::string& title, const std::string& hash) {
  nlohmann::ordered_json spec;
  spec["$schema"] = "https://vega.github.io/schema/vega-lite/v5.json";
  spec["title"] = title;
  spec["description"] = "config=" + hash;
  return spec;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

void write_reliability_csv(const std::filesystem::path& path, const std::vector<ReliabilityCurve>& curves,
                           const std::string& config_hash) {
  std::ostringstream os;
  os << header(config_hash) << "curve,bucket_low,bucket_high,size,mean_confidence,relevance_fraction\n";
  auto values = nlohmann::ordered_json::array();
  for (const auto& curve : curves) {
    for (const auto& b : curve.report.buckets) {
      os << curve.label << ',' << format_number(b.low) << ',' << format_number(b.high) << ',' << b.size << ','
         << format_number(b.mean_confidence) << ',' << format_number(b.relevance_fraction) << '\n';
      if (b.size == 0) continue;
      nlohmann::ordered_json row;
      row["curve"] = curve.label;
      row["mean_confidence"] = b.mean_confidence;
      row["relevance_fraction"] = b.relevance_fraction;
      values.push_back(std::move(row));
    }
  }
  write_text(path, os.str());

  auto spec = plot_base("Reliability", config_hash);
  spec["data"]["values"] = values;
  nlohmann::ordered_json curve_layer;
  curve_layer["mark"] = {{"type", "line"}, {"point", true}};
  curve_layer["encoding"]["x"] = {{"field", "mean_confidence"},
                                  {"type", "quantitative"},
                                  {"title", "confidence"},
                                  {"scale", {{"domain", {0, 1}}}}};
  curve_layer["encoding"]["y"] = {{"field", "relevance_fraction"},
                                  {"type", "quantitative"},
                                  {"title", "% of relevant documents"},
                                  {"axis", {{"format", "%"}}},
                                  {"scale", {{"domain", {0, 1}}}}};
  curve_layer["encoding"]["color"] = {{"field", "curve"}, {"type", "nominal"}};
  nlohmann::ordered_json diagonal;
  diagonal["data"]["values"] = nlohmann::ordered_json::array({{{"x", 0}, {"y", 0}}, {{"x", 1}, {"y", 1}}});
  diagonal["mark"] = {{"type", "line"}, {"strokeDash", {4, 4}}, {"color", "gray"}};
  diagonal["encoding"]["x"] = {{"field", "x"}, {"type", "quantitative"}};
  diagonal["encoding"]["y"] = {{"field", "y"}, {"type", "quantitative"}};
  spec["layer"] = nlohmann::ordered_json::array({curve_layer, diagonal});
  write_plot(path, spec);
}

void write_ece_summary_csv(const std::filesystem::path& path, const std::vector<ReliabilityCurve>& curves,
                           const std::string& config_hash) {
  std::ostringstream os;
  os << header(config_hash) << "curve,n,buckets,ece\n";
  for (const auto& c : curves) {
    os << c.label << ',' << c.report.n << ',' << c.report.bucket_count << ',' << format_number(c.report.ece) << '\n';
  }
  write_text(path, os.str());
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                     const std::string& config_hash) {
  std::ostringstream os;
  os << header(config_hash) << "b,metric,gain_percent\n";
  auto values = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    os << format_number(r.b) << ',' << format_number(r.metric) << ',' << format_number(r.gain_percent) << '\n';
    values.push_back({{"b", r.b}, {"gain_percent", r.gain_percent}});
  }
  write_text(path, os.str());

  auto spec = plot_base("Risk-aware gain over b", config_hash);
  spec["data"]["values"] = values;
  spec["mark"] = {{"type", "line"}, {"point", true}};
  spec["encoding"]["x"] = {{"field", "b"}, {"type", "quantitative"}, {"title", "b"}};
  spec["encoding"]["y"] = {{"field", "gain_percent"}, {"type", "quantitative"}, {"title", "% gain in R@1"}};
  write_plot(path, spec);
}

void write_nota_csv(const std::filesystem::path& path, const std::vector<NotaRow>& rows,
                    const std::string& config_hash) {
  std::ostringstream os;
  os << header(config_hash) << "features,mean_f1,std_f1,cell\n";
  for (const auto& r : rows) {
    char cell[64];
    std::snprintf(cell, sizeof cell, "%.4f (%.4f)", r.result.mean_f1, r.result.std_f1);
    os << '"' << r.features << "\"," << format_number(r.result.mean_f1) << ',' << format_number(r.result.std_f1)
       << ",\"" << cell << "\"\n";
  }
  write_text(path, os.str());
}

void write_grid_csv(const std::filesystem::path& path, const ExperimentGrid& grid, const std::string& config_hash) {
  std::ostringstream os;
  os << header(config_hash)
     << "source,target,train_ns,test_ns,no_shift,test_queries,"
        "r1_deterministic,r1_ensemble,r1_dropout,r1_ensemble_risk,r1_dropout_risk,b_ensemble,b_dropout,"
        "ece_deterministic,ece_ensemble,ece_dropout,"
        "p_ensemble,p_dropout,p_ensemble_risk,p_dropout_risk,"
        "sig_ensemble,sig_dropout,sig_ensemble_risk,sig_dropout_risk\n";
  for (const auto& c : grid.cells) {
    os << c.source << ',' << c.target << ',' << c.train_ns << ',' << c.test_ns << ',' << bool_text(c.no_shift) << ','
       << c.test_queries << ',' << format_number(c.recall_deterministic) << ',' << format_number(c.recall_ensemble)
       << ',' << format_number(c.recall_dropout) << ',' << format_number(c.recall_ensemble_risk) << ','
       << format_number(c.recall_dropout_risk) << ',' << format_number(c.b_ensemble) << ','
       << format_number(c.b_dropout) << ',' << format_number(c.ece_deterministic) << ','
       << format_number(c.ece_ensemble) << ',' << format_number(c.ece_dropout) << ','
       << format_number(c.test_ensemble.p_value) << ',' << format_number(c.test_dropout.p_value) << ','
       << format_number(c.test_ensemble_risk.p_value) << ',' << format_number(c.test_dropout_risk.p_value) << ','
       << bool_text(significant(c.test_ensemble)) << ',' << bool_text(significant(c.test_dropout)) << ','
       << bool_text(significant(c.test_ensemble_risk)) << ',' << bool_text(significant(c.test_dropout_risk))
       << '\n';
  }
  write_text(path, os.str());
}

void write_ranked_lists(const std::filesystem::path& path, const std::vector<RankedList>& lists,
                        const std::vector<std::vector<std::string>>& candidate_ids, const std::string& config_hash) {
  if (lists.size() != candidate_ids.size()) throw Error("write_ranked_lists: lists and candidate ids differ in length");
  std::ostringstream os;
  os << header(config_hash);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto& l = lists[i];
    for (std::size_t r = 0; r < l.ordering.size(); ++r) {
      const std::size_t j = l.ordering[r];
      os << l.instance_id << '\t' << r + 1 << '\t' << candidate_ids[i].at(j) << '\t'
         << format_number(l.final_scores.at(j)) << '\n';
    }
  }
  write_text(path, os.str());
}

RankedListFile read_ranked_lists(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open ranked list file " + path.string());
  RankedListFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# config=", 0) == 0) out.config_hash = line.substr(9);
      continue;
    }
    std::istringstream ls(line);
    std::string inst, rank_text, cand, score;
    if (!std::getline(ls, inst, '\t') || !std::getline(ls, rank_text, '\t') || !std::getline(ls, cand, '\t') ||
        !std::getline(ls, score)) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    if (out.lists.empty() || out.lists.back().first != inst) {
      out.lists.push_back({inst, {}});
    }
    auto& ranked = out.lists.back().second;
    if (rank_text != std::to_string(ranked.size() + 1)) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": ranks must run 1, 2, ... per instance");
    }
    ranked.push_back(cand);
  }
  return out;
}

}  // namespace uqrank
