#include <cmath>
#include <cstdio>

#include "peatsim/harness.hpp"

namespace peatsim::harness {

namespace fs = std::filesystem;

RunSummary summarize_run(const fs::path& run_dir) {
  RunSummary s;
  s.dir = run_dir;
  s.name = run_dir.filename().string();
  if (s.name.empty()) s.name = run_dir.parent_path().filename().string();
  s.config = load_config(run_dir / "config.txt");
  const auto rows = read_metrics(run_dir / "metrics.csv");
  if (rows.empty()) throw ConfigError(run_dir.string() + " has no metrics rows yet");
  s.final = rows.back();
  return s;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool counts_exchanges(const RunSummary& r) {
  return r.config.env.mode != federation::FederationMode::kFedFT;
}

// Equal values compare as 1 even when both are zero.
std::string ratio(double a, double b) {
  if (a == b) return "1";
  if (b == 0.0) return "n/a";
  return num(a / b);
}

std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s + ' ' : s + std::string(w - s.size(), ' ');
}

std::string align(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size() + 2);
  }
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += pad(r[i], width[i]);
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  return out;
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
  return out + '\n';
}

}  // namespace

Comparison compare_runs(const std::vector<fs::path>& run_dirs) {
  if (run_dirs.size() < 2) throw ConfigError("compare needs at least two runs");
  Comparison c;
  for (const auto& d : run_dirs) c.runs.push_back(summarize_run(d));
  const auto& ref = c.runs.front().config.env;
  for (const auto& r : c.runs) {
    if (r.config.env.num_devices != ref.num_devices || r.config.env.rounds != ref.rounds) {
      throw ConfigError("cannot compare " + r.name + " (N=" +
                        std::to_string(r.config.env.num_devices) +
                        ", T=" + std::to_string(r.config.env.rounds) + ") with " +
                        c.runs.front().name + " (N=" + std::to_string(ref.num_devices) +
                        ", T=" + std::to_string(ref.rounds) + ")");
    }
  }

  std::vector<std::vector<std::string>> runs{
      {"run", "mode", "agent", "step", "reward", "perplexity", "log_delay", "delay_s",
       "exchanges_per_10"}};
  for (const auto& r : c.runs) {
    const auto& e = r.final.eval;
    runs.push_back({r.name, federation::to_string(r.config.env.mode), to_string(r.config.agent),
                    std::to_string(r.final.step), num(e.reward), num(e.perplexity),
                    num(e.log_delay), num(e.delay),
                    counts_exchanges(r) ? num(e.exchanges) : "n/a"});
  }
  std::vector<std::vector<std::string>> pairs{
      {"run_a", "run_b", "delay_ratio", "exchange_ratio", "perplexity_delta", "reward_delta"}};
  for (std::size_t i = 0; i < c.runs.size(); ++i) {
    for (std::size_t j = i + 1; j < c.runs.size(); ++j) {
      const auto& a = c.runs[i];
      const auto& b = c.runs[j];
      const bool both = counts_exchanges(a) && counts_exchanges(b);
      pairs.push_back({a.name, b.name, ratio(a.final.eval.delay, b.final.eval.delay),
                       both ? ratio(a.final.eval.exchanges, b.final.eval.exchanges) : "n/a",
                       num(a.final.eval.perplexity - b.final.eval.perplexity),
                       num(a.final.eval.reward - b.final.eval.reward)});
    }
  }
  for (const auto& r : runs) c.runs_csv += join(r);
  for (const auto& r : pairs) c.pairs_csv += join(r);
  c.table = align(runs) + '\n' + align(pairs);
  return c;
}

}  // namespace peatsim::harness
