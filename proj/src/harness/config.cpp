#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "peatsim/harness.hpp"

namespace peatsim::harness {

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kSabppo: return "sabppo";
    case AgentKind::kIterRl: return "iterrl";
    case AgentKind::kHappo: return "happo";
    case AgentKind::kRandom: return "random";
    case AgentKind::kFixed: return "fixed";
  }
  return "?";
}

AgentKind parse_agent(std::string_view text) {
  for (auto k : {AgentKind::kSabppo, AgentKind::kIterRl, AgentKind::kHappo, AgentKind::kRandom,
                 AgentKind::kFixed}) {
    if (text == to_string(k)) return k;
  }
  throw ConfigError("unknown agent '" + std::string(text) +
                    "' (expected sabppo, iterrl, happo, random or fixed)");
}

void ExperimentConfig::validate() const {
  env.validate();
  ppo.validate();
  if (total_steps < 0) throw ConfigError("total_steps must be non-negative");
  if (eval_interval < 1) throw ConfigError("eval_interval must be positive");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// %.17g round-trips every finite double and prints infinities as inf.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::int64_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(federation::FederationMode m) { return federation::to_string(m); }
std::string fmt(AgentKind k) { return to_string(k); }
template <class T>
std::string fmt(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

void parse(const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || std::isnan(out)) throw ConfigError("not a number: '" + s + "'");
}
template <class I>
void parse_integer(const std::string& s, I& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("not an integer: '" + s + "'");
  }
}
void parse(const std::string& s, int& out) { parse_integer(s, out); }
void parse(const std::string& s, std::int64_t& out) { parse_integer(s, out); }
void parse(const std::string& s, std::uint64_t& out) { parse_integer(s, out); }
void parse(const std::string& s, bool& out) {
  if (s == "true" || s == "1") out = true;
  else if (s == "false" || s == "0") out = false;
  else throw ConfigError("not a boolean: '" + s + "'");
}
void parse(const std::string& s, federation::FederationMode& out) { out = federation::parse_mode(s); }
void parse(const std::string& s, AgentKind& out) { out = parse_agent(s); }
template <class T>
void parse(const std::string& s, std::vector<T>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v{};
    parse(trim(item), v);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty list");
}

struct Field {
  std::string key;
  std::string note;  // unit or allowed values, shown in the serialized file
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class Access>
Field field(std::string key, std::string note, Access access) {
  return Field{std::move(key), std::move(note),
               [access](const ExperimentConfig& c) {
                 return fmt(access(const_cast<ExperimentConfig&>(c)));
               },
               [access](ExperimentConfig& c, const std::string& v) { parse(v, access(c)); }};
}

#define PEATSIM_FIELD(key, member, note) \
  field(key, note, [](ExperimentConfig& c) -> auto& { return c.member; })

struct Section {
  std::string title;
  std::vector<Field> fields;
};

const std::vector<Section>& schema() {
  static const std::vector<Section> sections{
      {"run",
       {PEATSIM_FIELD("mode", env.mode, "fedpeat | fedpeft | fedft"),
        PEATSIM_FIELD("agent", agent, "sabppo | iterrl | happo | random | fixed"),
        PEATSIM_FIELD("seed", seed, ""),
        PEATSIM_FIELD("total_steps", total_steps, "environment steps"),
        PEATSIM_FIELD("eval_interval", eval_interval, "environment steps"),
        PEATSIM_FIELD("eval_episodes", eval_episodes, "")}},
      {"environment",
       {PEATSIM_FIELD("num_devices", env.num_devices, "N"),
        PEATSIM_FIELD("select_k", env.select_k, "devices selected per round"),
        PEATSIM_FIELD("rounds", env.rounds, "T, rounds per episode"),
        PEATSIM_FIELD("retention_grid", env.retention_grid, "comma list in (0,1]"),
        PEATSIM_FIELD("levels", env.levels, "bandwidth/power levels"),
        PEATSIM_FIELD("xi_p", env.xi_p, ""),
        PEATSIM_FIELD("xi_f", env.xi_f, ""),
        PEATSIM_FIELD("xi_s", env.xi_s, ""),
        PEATSIM_FIELD("kappa", env.kappa, "penalty per violation"),
        PEATSIM_FIELD("q", env.q, "memory headroom divisor"),
        PEATSIM_FIELD("c", env.c, "exchange cap divisor, cap = T/c"),
        PEATSIM_FIELD("delay_floor", env.delay_floor, "s"),
        PEATSIM_FIELD("adapter_dim", env.adapter_dim, "adapter weight vector length"),
        PEATSIM_FIELD("memory_min", env.memory_min, "bytes"),
        PEATSIM_FIELD("memory_max", env.memory_max, "bytes"),
        PEATSIM_FIELD("compute_speed_min", env.compute_speed_min, "parameter-samples/s"),
        PEATSIM_FIELD("compute_speed_max", env.compute_speed_max, "parameter-samples/s"),
        PEATSIM_FIELD("server_speed_factor", env.server_speed_factor, "times compute_speed_max"),
        PEATSIM_FIELD("data_min", env.data_min, "samples"),
        PEATSIM_FIELD("data_max", env.data_max, "samples"),
        PEATSIM_FIELD("server_data_fraction", env.server_data_fraction, "share of all data")}},
      {"model",
       {PEATSIM_FIELD("model.total_params", env.model.total_params, ""),
        PEATSIM_FIELD("model.total_bytes", env.model.total_bytes, "bytes"),
        PEATSIM_FIELD("model.layer_count", env.model.layer_count, ""),
        PEATSIM_FIELD("model.adapter_top_layers", env.model.adapter_top_layers, ""),
        PEATSIM_FIELD("model.adapter_bottom_layers", env.model.adapter_bottom_layers, ""),
        PEATSIM_FIELD("surrogate.a", env.surrogate.a, ""),
        PEATSIM_FIELD("surrogate.b", env.surrogate.b, ""),
        PEATSIM_FIELD("surrogate.c", env.surrogate.c, ""),
        PEATSIM_FIELD("surrogate.lora_delta", env.surrogate.lora_delta, ""),
        PEATSIM_FIELD("surrogate.p_init", env.surrogate.p_init, ""),
        PEATSIM_FIELD("surrogate.convergence_rate", env.surrogate.convergence_rate, "per round"),
        PEATSIM_FIELD("tuning.epochs", env.tuning.epochs, "local epochs per round"),
        PEATSIM_FIELD("tuning.adapter_step", env.tuning.adapter_step, ""),
        PEATSIM_FIELD("tuning.adapter_noise", env.tuning.adapter_noise, "")}},
      {"channel",
       {PEATSIM_FIELD("channel.noise_psd", env.channel.noise_psd, "W/Hz"),
        PEATSIM_FIELD("channel.power_budget", env.channel.power_budget, "W"),
        PEATSIM_FIELD("channel.pathloss_exponent", env.channel.pathloss_exponent, ""),
        PEATSIM_FIELD("channel.reference_distance", env.channel.reference_distance, "m"),
        PEATSIM_FIELD("channel.reference_loss_db", env.channel.reference_loss_db, "dB"),
        PEATSIM_FIELD("channel.rician_k", env.channel.rician_k, "inf disables fading"),
        PEATSIM_FIELD("bandwidth_min", env.bandwidth_min, "Hz, per-episode budget draw"),
        PEATSIM_FIELD("bandwidth_max", env.bandwidth_max, "Hz"),
        PEATSIM_FIELD("mobility.area_radius", env.mobility.area_radius, "m"),
        PEATSIM_FIELD("mobility.speed_min", env.mobility.speed_min, "m/s"),
        PEATSIM_FIELD("mobility.speed_max", env.mobility.speed_max, "m/s"),
        PEATSIM_FIELD("mobility.round_duration", env.mobility.round_duration, "s"),
        PEATSIM_FIELD("mobility.waypoint_pause", env.mobility.waypoint_pause, "rounds")}},
      {"ppo",
       {PEATSIM_FIELD("ppo.clip_epsilon", ppo.clip_epsilon, ""),
        PEATSIM_FIELD("ppo.gamma", ppo.gamma, ""),
        PEATSIM_FIELD("ppo.lambda", ppo.lambda, ""),
        PEATSIM_FIELD("ppo.epochs", ppo.epochs, "passes per segment"),
        PEATSIM_FIELD("ppo.minibatch_size", ppo.minibatch_size, ""),
        PEATSIM_FIELD("ppo.segment_length", ppo.segment_length, "steps per update"),
        PEATSIM_FIELD("ppo.target_sync_interval", ppo.target_sync_interval, "gradient steps"),
        PEATSIM_FIELD("ppo.entropy_coef", ppo.entropy_coef, ""),
        PEATSIM_FIELD("ppo.normalize_advantages", ppo.normalize_advantages, ""),
        PEATSIM_FIELD("ppo.actor_lr", ppo.actor_lr, ""),
        PEATSIM_FIELD("ppo.critic_lr", ppo.critic_lr, ""),
        PEATSIM_FIELD("ppo.hidden", ppo.hidden, "comma list of widths")}},
  };
  return sections;
}

#undef PEATSIM_FIELD

const Field& find_field(const std::string& key) {
  for (const auto& s : schema()) {
    for (const auto& f : s.fields) {
      if (f.key == key) return f;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void assign(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const Field& f = find_field(key);
  try {
    f.set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& s : schema()) {
    for (const auto& f : s.fields) keys.push_back(f.key);
  }
  return keys;
}

std::string serialize(const ExperimentConfig& config) {
  std::string out;
  for (const auto& s : schema()) {
    if (!out.empty()) out += '\n';
    out += "# " + s.title + "\n";
    for (const auto& f : s.fields) {
      out += f.key + " = " + f.get(config);
      if (!f.note.empty()) out += "  # " + f.note;
      out += '\n';
    }
  }
  return out;
}

ExperimentConfig parse_config(std::string_view text, const ExperimentConfig& base) {
  ExperimentConfig config = base;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      assign(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), base);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  assign(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::filesystem::path output_root() {
  if (const char* env = std::getenv("PEATSIM_OUTPUT_ROOT"); env != nullptr && *env != '\0') {
    return env;
  }
  return "runs";
}

}  // namespace peatsim::harness
