#include "spamfriction/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "spamfriction/net.hpp"
#include "spamfriction/pow.hpp"

namespace spamfriction::config {

using nlohmann::ordered_json;

namespace {

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

// One JSON object. Reads typed fields by name and remembers which keys were
// used so finish() can reject the rest.
class Section {
 public:
  Section(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "top level" : path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

  const ordered_json* find(std::string_view key) {
    used_.insert(std::string(key));
    auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(std::string_view key) const { return join(path_, key); }

  void get(std::string_view key, std::string& out) {
    if (auto v = find(key)) {
      if (!v->is_string()) fail(where(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void get(std::string_view key, bool& out) {
    if (auto v = find(key)) {
      if (!v->is_boolean()) fail(where(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void get(std::string_view key, double& out) {
    if (auto v = find(key)) out = number(*v, key);
  }

  template <class U>
    requires std::is_unsigned_v<U>
  void get(std::string_view key, U& out) {
    if (auto v = find(key)) out = unsigned_int<U>(*v, where(key));
  }

  template <class U>
  void get_optional(std::string_view key, std::optional<U>& out) {
    if (auto v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        U tmp{};
        used_.erase(std::string(key));
        get(key, tmp);
        out = tmp;
      }
    }
  }

  void seconds(std::string_view key, Duration& out) {
    if (auto v = find(key)) {
      const double s = number(*v, key);
      if (s < 0.0) fail(where(key), "must not be negative");
      out = from_seconds(s);
    }
  }

  double number(const ordered_json& v, std::string_view key) const {
    if (!v.is_number()) fail(where(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(where(key), "expected a finite number");
    return d;
  }

  template <class U>
  static U unsigned_int(const ordered_json& v, const std::string& where) {
    if (!v.is_number_unsigned()) fail(where, "expected a non-negative integer");
    const auto raw = v.get<std::uint64_t>();
    if (raw > std::numeric_limits<U>::max()) fail(where, "out of range");
    return static_cast<U>(raw);
  }

  Section child(std::string_view key) {
    static const ordered_json kEmpty = ordered_json::object();
    auto v = find(key);
    return Section(v ? *v : kEmpty, where(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(where(it.key()), "unknown key");
    }
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> used_;
};

ordered_json parse_json(std::string_view text) {
  try {
    return ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T>
ordered_json optional_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

// Wraps a module validate() so the message names its section.
template <class F>
void validated(const char* section, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(section) + ": " + e.what());
  }
}

void read_policy(Section s, policy::PolicyConfig& p) {
  s.get("resist_threshold", p.resist_threshold);
  std::string mode = p.mode == policy::ResistanceMode::Graduated ? "graduated" : "single";
  s.get("mode", mode);
  if (mode == "single")
    p.mode = policy::ResistanceMode::SingleLevel;
  else if (mode == "graduated")
    p.mode = policy::ResistanceMode::Graduated;
  else
    Section::fail(s.where("mode"), "expected \"single\" or \"graduated\"");
  s.get_optional("base_difficulty", p.base_difficulty);
  if (auto v = s.find("graduated_buckets")) {
    if (!v->is_array()) Section::fail(s.where("graduated_buckets"), "expected an array");
    p.graduated_buckets.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      Section b((*v)[i], s.where("graduated_buckets[" + std::to_string(i) + "]"));
      policy::Bucket bucket;
      b.get("upper_bound", bucket.upper_bound);
      b.get("difficulty", bucket.difficulty);
      b.finish();
      p.graduated_buckets.push_back(bucket);
    }
  }
  s.get("jitter_bits", p.jitter_bits);
  if (auto v = s.find("whitelist")) {
    if (!v->is_array()) Section::fail(s.where("whitelist"), "expected an array of strings");
    p.whitelist.clear();
    for (const auto& item : *v) {
      if (!item.is_string()) Section::fail(s.where("whitelist"), "expected an array of strings");
      p.whitelist.push_back(item.get<std::string>());
    }
  }
  Section sb = s.child("sinbin");
  sb.get("max_refusals", p.sinbin.max_refusals);
  sb.seconds("window_seconds", p.sinbin.window);
  sb.seconds("block_seconds", p.sinbin.block);
  sb.finish();
  s.finish();
}

void read_scorer(Section s, classifier::ScorerConfig& c) {
  std::string mode = c.mode == classifier::ScorerMode::External ? "external" : "builtin";
  s.get("mode", mode);
  if (mode == "builtin")
    c.mode = classifier::ScorerMode::Builtin;
  else if (mode == "external")
    c.mode = classifier::ScorerMode::External;
  else
    Section::fail(s.where("mode"), "expected \"builtin\" or \"external\"");
  if (auto v = s.find("weights")) {
    if (!v->is_object()) Section::fail(s.where("weights"), "expected an object of token weights");
    c.weights.clear();
    for (auto it = v->begin(); it != v->end(); ++it) {
      if (!it->is_number()) Section::fail(s.where("weights." + it.key()), "expected a number");
      c.weights[it.key()] = it->get<double>();
    }
  }
  s.get("bias", c.bias);
  s.get("endpoint", c.endpoint);
  s.seconds("timeout_seconds", c.timeout);
  s.get("fallback_score", c.fallback_score);
  s.get("max_body_bytes", c.max_body_bytes);
  s.finish();
}

void read_pow(Section s, AppConfig& c) {
  if (auto v = s.find("algorithms")) {
    if (!v->is_array()) Section::fail(s.where("algorithms"), "expected an array of algorithm ids");
    c.server.algorithms.clear();
    for (const auto& item : *v) c.server.algorithms.push_back(Section::unsigned_int<unsigned>(item, s.where("algorithms")));
  }
  if (auto v = s.find("default_ttl_seconds")) {
    if (v->is_null()) {
      c.server.puzzle_ttl.reset();
    } else {
      if (!v->is_number() || v->get<double>() <= 0.0)
        Section::fail(s.where("default_ttl_seconds"), "expected a positive number or null");
      c.server.puzzle_ttl = from_seconds(v->get<double>());
    }
  }
  s.get("store_capacity", c.store_capacity);
  s.get("burden_seconds", c.burden_seconds);
  s.get("reference_hash_rate", c.server.reference_hash_rate);
  s.get_optional("seed", c.seed);
  s.finish();
}

void read_legacy(Section s, protocol::LegacyPolicy& l) {
  s.seconds("pre_accept_delay_seconds", l.pre_accept_delay);
  s.get("max_pending_per_host", l.max_pending_per_host);
  std::string mode = protocol::to_string(l.overload_mode);
  s.get("overload_mode", mode);
  try {
    l.overload_mode = protocol::parse_overload_mode(mode);
  } catch (const std::invalid_argument& e) {
    Section::fail(s.where("overload_mode"), e.what());
  }
  s.finish();
}

}  // namespace

void AppConfig::validate() const {
  try {
    net::parse_endpoint(listen);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("listen: ") + e.what());
  }
  if (sink_dir.empty()) throw ConfigError("sink_dir: must not be empty");
  validated("policy", [&] { policy.validate(); });
  validated("scorer", [&] { scorer.validate(); });
  for (unsigned a : server.algorithms) {
    if (!pow::is_supported(a)) throw ConfigError("pow.algorithms: unsupported algorithm " + std::to_string(a));
  }
  if (store_capacity == 0) throw ConfigError("pow.store_capacity: must be positive");
  if (!(burden_seconds > 0.0)) throw ConfigError("pow.burden_seconds: must be positive");
  if (!(server.reference_hash_rate > 0.0)) throw ConfigError("pow.reference_hash_rate: must be positive");
  validated("legacy", [&] { server.legacy.validate(); });
  validated("server", [&] { server.validate(); });
}

AppConfig parse_app_config(std::string_view text) {
  const ordered_json j = parse_json(text);
  AppConfig c;
  Section top(j, "");
  top.get("listen", c.listen);
  top.get("hostname", c.server.hostname);
  top.get("greeting", c.server.greeting);
  top.get("sink_dir", c.sink_dir);
  top.get("max_message_size", c.server.max_message_size);
  top.get("advertise_auth_starttls", c.server.advertise_auth_starttls);
  top.get("spamfriction", c.server.spamfriction);
  read_policy(top.child("policy"), c.policy);
  read_scorer(top.child("scorer"), c.scorer);
  read_pow(top.child("pow"), c);
  read_legacy(top.child("legacy"), c.server.legacy);
  top.finish();
  c.validate();
  return c;
}

AppConfig load_app_config(const std::filesystem::path& path) { return parse_app_config(read_file(path)); }

std::string dump_app_config(const AppConfig& c) {
  ordered_json j;
  j["listen"] = c.listen;
  j["hostname"] = c.server.hostname;
  j["greeting"] = c.server.greeting;
  j["sink_dir"] = c.sink_dir;
  j["max_message_size"] = c.server.max_message_size;
  j["advertise_auth_starttls"] = c.server.advertise_auth_starttls;
  j["spamfriction"] = c.server.spamfriction;

  const auto& p = c.policy;
  ordered_json policy;
  policy["resist_threshold"] = p.resist_threshold;
  policy["mode"] = p.mode == policy::ResistanceMode::Graduated ? "graduated" : "single";
  policy["base_difficulty"] = optional_json(p.base_difficulty);
  policy["graduated_buckets"] = ordered_json::array();
  for (const auto& b : p.graduated_buckets)
    policy["graduated_buckets"].push_back({{"upper_bound", b.upper_bound}, {"difficulty", b.difficulty}});
  policy["jitter_bits"] = p.jitter_bits;
  policy["whitelist"] = p.whitelist;
  policy["sinbin"] = {{"max_refusals", p.sinbin.max_refusals},
                      {"window_seconds", to_seconds(p.sinbin.window)},
                      {"block_seconds", to_seconds(p.sinbin.block)}};
  j["policy"] = policy;

  const auto& s = c.scorer;
  ordered_json scorer;
  scorer["mode"] = s.mode == classifier::ScorerMode::External ? "external" : "builtin";
  scorer["weights"] = ordered_json::object();
  for (const auto& [token, w] : s.weights) scorer["weights"][token] = w;
  scorer["bias"] = s.bias;
  scorer["endpoint"] = s.endpoint;
  scorer["timeout_seconds"] = to_seconds(s.timeout);
  scorer["fallback_score"] = s.fallback_score;
  scorer["max_body_bytes"] = s.max_body_bytes;
  j["scorer"] = scorer;

  ordered_json pw;
  pw["algorithms"] = c.server.algorithms;
  pw["default_ttl_seconds"] =
      c.server.puzzle_ttl ? ordered_json(to_seconds(*c.server.puzzle_ttl)) : ordered_json(nullptr);
  pw["store_capacity"] = c.store_capacity;
  pw["burden_seconds"] = c.burden_seconds;
  pw["reference_hash_rate"] = c.server.reference_hash_rate;
  pw["seed"] = optional_json(c.seed);
  j["pow"] = pw;

  const auto& l = c.server.legacy;
  j["legacy"] = {{"pre_accept_delay_seconds", to_seconds(l.pre_accept_delay)},
                 {"max_pending_per_host", l.max_pending_per_host},
                 {"overload_mode", protocol::to_string(l.overload_mode)}};
  return j.dump(2) + "\n";
}

SimulationFile parse_simulation(std::string_view text) {
  const ordered_json j = parse_json(text);
  SimulationFile out;
  sim::SimConfig& c = out.config;
  Section top(j, "");
  top.get("label", c.label);
  top.get("seed", c.seed);
  top.get("horizon_days", c.horizon_days);
  top.get("burden_seconds", c.burden_seconds);
  top.get("false_positive_rate", c.false_positive_rate);
  top.get("false_negative_rate", c.false_negative_rate);
  top.get("scale_factor", c.scale_factor);
  Section speed = top.child("speed");
  speed.get("min", c.speed_min);
  speed.get("max", c.speed_max);
  speed.finish();

  const ordered_json* cohorts = top.find("cohorts");
  if (!cohorts || !cohorts->is_array()) Section::fail("cohorts", "expected an array of cohorts");
  for (std::size_t i = 0; i < cohorts->size(); ++i) {
    Section s((*cohorts)[i], "cohorts[" + std::to_string(i) + "]");
    sim::Cohort cohort;
    s.get("name", cohort.name);
    s.get("population", cohort.population);
    std::string intent = "ham";
    s.get("intent", intent);
    try {
      cohort.intent = sim::parse_intent(intent);
    } catch (const std::invalid_argument& e) {
      Section::fail(s.where("intent"), e.what());
    }
    if (auto v = s.find("attempts_per_day")) {
      if (v->is_string() && v->get<std::string>() == "unbounded")
        cohort.attempts_per_day.reset();
      else
        cohort.attempts_per_day = Section::unsigned_int<std::uint64_t>(*v, s.where("attempts_per_day"));
    }
    s.finish();
    c.cohorts.push_back(std::move(cohort));
  }

  if (const ordered_json* g = top.find("grid")) {
    Section gs(*g, "grid");
    sim::SweepGrid grid;
    for (auto [key, target] : {std::pair{"accuracies", &grid.accuracies}, std::pair{"burdens", &grid.burdens}}) {
      if (auto v = gs.find(key)) {
        if (!v->is_array()) Section::fail(gs.where(key), "expected an array of numbers");
        for (const auto& item : *v) target->push_back(gs.number(item, key));
      }
    }
    gs.finish();
    if (grid.accuracies.empty() && grid.burdens.empty()) throw EmptyGridError("grid: no parameter points");
    out.grid = std::move(grid);
  }
  top.finish();

  validated("simulation", [&] { c.validate(); });
  if (out.grid) {
    out.grid->base = c;
    validated("grid", [&] {
      for (const auto& point : out.grid->expand()) point.validate();
    });
  }
  return out;
}

SimulationFile load_simulation(const std::filesystem::path& path) { return parse_simulation(read_file(path)); }

}  // namespace spamfriction::config
