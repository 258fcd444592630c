#include "uqrank/run_file.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace uqrank {

namespace {

constexpr std::string_view kRunMagic = "#uqrank-run v1";

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string score_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void check_id(const std::string& id) {
  if (id.find_first_of("\t\n\r") != std::string::npos) {
    throw Error("id '" + id + "' contains a tab or newline and cannot be written to a run file");
  }
}

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw Error("run file line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string format_run_file(const RunFile& run) {
  std::ostringstream os;
  os << kRunMagic << "\tsource=" << to_string(run.source) << "\tseeds=";
  for (std::size_t i = 0; i < run.seeds.size(); ++i) os << (i ? "," : "") << run.seeds[i];
  os << "\tconfig=" << (run.config_hash.empty() ? "none" : run.config_hash) << '\n';
  for (const auto& d : run.distributions) {
    d.validate();
    check_id(d.instance_id);
    for (Eigen::Index j = 0; j < d.scores.cols(); ++j) {
      const auto& cid = d.candidate_ids[static_cast<std::size_t>(j)];
      check_id(cid);
      for (Eigen::Index s = 0; s < d.scores.rows(); ++s) {
        os << d.instance_id << '\t' << cid << '\t' << s << '\t' << score_text(d.scores(s, j)) << '\n';
      }
    }
  }
  return os.str();
}

RunFile parse_run_file(std::string_view content) {
  RunFile run;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;

  struct Pending {
    std::vector<std::string> candidates;
    std::unordered_map<std::string, std::map<long, double>> samples;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Pending> pending;

  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    if (!header_seen) {
      auto fields = split(line, '\t');
      if (fields[0] != kRunMagic) line_error(line_no, "missing '#uqrank-run v1' header");
      for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string_view::npos) line_error(line_no, "malformed header field");
        const auto key = fields[i].substr(0, eq);
        const auto value = fields[i].substr(eq + 1);
        if (key == "source") {
          run.source = distribution_source_from_string(value);
        } else if (key == "seeds") {
          if (!value.empty()) {
            for (auto s : split(value, ',')) {
              std::uint64_t seed = 0;
              auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
              if (ec != std::errc() || p != s.data() + s.size()) line_error(line_no, "bad seed");
              run.seeds.push_back(seed);
            }
          }
        } else if (key == "config") {
          run.config_hash = std::string(value);
        }
      }
      header_seen = true;
      continue;
    }
    if (line.front() == '#') continue;

    auto fields = split(line, '\t');
    if (fields.size() != 4) line_error(line_no, "expected 4 tab-separated fields");
    std::string inst(fields[0]);
    std::string cand(fields[1]);
    long sample = -1;
    {
      auto [p, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), sample);
      if (ec != std::errc() || p != fields[2].data() + fields[2].size() || sample < 0) {
        line_error(line_no, "bad sample index");
      }
    }
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(std::string(fields[3]), &used);
      if (used != fields[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      line_error(line_no, "bad score");
    }
    if (!(score >= 0.0 && score <= 1.0)) line_error(line_no, "score outside [0, 1]");

    auto [it, inserted] = pending.try_emplace(inst);
    if (inserted) order.push_back(inst);
    auto& entry = it->second;
    auto [cit, cnew] = entry.samples.try_emplace(cand);
    if (cnew) entry.candidates.push_back(cand);
    if (!cit->second.emplace(sample, score).second) line_error(line_no, "duplicate sample");
  }
  if (!header_seen && !content.empty()) throw Error("run file: missing header");

  for (const auto& inst : order) {
    const auto& entry = pending.at(inst);
    const std::size_t s = entry.samples.at(entry.candidates.front()).size();
    PredictiveDistribution d{inst, entry.candidates,
                             Eigen::MatrixXd(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(entry.candidates.size())),
                             run.source, {}};
    for (std::size_t j = 0; j < entry.candidates.size(); ++j) {
      const auto& samples = entry.samples.at(entry.candidates[j]);
      if (samples.size() != s) throw Error("run file: instance '" + inst + "' has ragged sample counts");
      long expected = 0;
      for (const auto& [idx, v] : samples) {
        if (idx != expected++) throw Error("run file: instance '" + inst + "' has non-contiguous sample indices");
        d.scores(idx, static_cast<Eigen::Index>(j)) = v;
      }
    }
    if (run.seeds.size() == s) d.sample_seeds = run.seeds;
    d.validate();
    run.distributions.push_back(std::move(d));
  }
  return run;
}

void write_run_file(const std::filesystem::path& path, const RunFile& run) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write run file " + path.string());
  out << format_run_file(run);
}

RunFile read_run_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open run file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_file(ss.str());
}

}  // namespace uqrank
