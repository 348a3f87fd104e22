#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "qdlab/errors.hpp"

using nlohmann::json;

namespace qdcli {

namespace {

const std::set<std::string> kCommonKeys{"schema", "command", "seed", "out", "svg", "threads"};
// Objects whose keys are data, validated by the command itself.
const std::set<std::string> kFreeObjects{"modes"};

json sweep_defaults() {
  return {{"ells", {0.05, 0.1, 0.2, 0.4, 0.8}},
          {"trials", 200},
          {"n_modes", 16},
          {"degree", 12},
          {"s_nodes", 256},
          {"refine", true},
          {"tolerances", {{"min_slope", -0.1}, {"refinement", 0.05}}}};
}

const std::map<std::string, json>& defaults_table() {
  static const std::map<std::string, json> table = [] {
    std::map<std::string, json> t;
    t["geom"] = {{"ells", {0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 1.7627471740390861}},
                 {"deltas", {0.1, 0.3, 0.6}},
                 {"s_nodes", 256},
                 {"samples", 2001},
                 {"tolerances", {{"identity", 1e-12}, {"l1", 1e-10}, {"l2", 1e-10}, {"l2_limit", 1e-3}}}};
    t["cauchy-check"] = {{"ell", 0.3},
                         {"fields", 10},
                         {"points", 20},
                         {"n_modes", 4},
                         {"s_modes", 2},
                         {"omega", 0.5},
                         {"s_nodes", 128},
                         {"b_quad_points", 16},
                         {"panel_width", 0.5},
                         {"order", 4},
                         {"delta0", 0.1},
                         {"rectangle_ells", {0.05, 0.1, 0.15, 0.19, 0.3, 0.5}},
                         {"tolerances", {{"reconstruction", 1e-4}, {"refinement_factor", 4.0}}}};
    t["torus-sweep"] = {{"bs", {5.0, 10.0, 20.0, 50.0, 100.0}},
                        {"a", 0.0},
                        {"mesh", 256},
                        {"tolerances", {{"ratio", 0.01}, {"slope", 0.02}}}};
    t["sphere-check"] = {{"r_max", 1000.0},
                         {"panels", 64},
                         {"order", 12},
                         {"angles", 128},
                         {"tolerances", {{"ratio", 1e-8}}}};
    t["decay-fit"] = {{"ell", 0.05},
                      {"deltas", {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5}},
                      {"modes", {{"1", {1.0, 0.0}}}},
                      {"s_nodes", 64},
                      {"tolerances", {{"slope", 0.1}}}};
    t["collar-alpha"] = sweep_defaults();
    t["thin-mass"] = sweep_defaults();
    t["thin-mass"]["deltas"] = {0.45, 0.6, 0.8};
    t["maximize"] = {{"objective", "alpha"},
                     {"ell", 0.2},
                     {"delta", 0.6},
                     {"n_modes", 16},
                     {"degree", 12},
                     {"s_nodes", 256},
                     {"eps", 0.01},
                     {"restarts", 4},
                     {"screen", 200},
                     {"max_iters", 1000},
                     {"tolerances", {{"orthogonality", 1e-10}}}};
    t["verify-all"] = json::object();
    return t;
  }();
  return table;
}

std::string kind(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

bool matches(const json& want, const json& got) {
  if (want.is_boolean()) return got.is_boolean();
  if (want.is_number_integer()) return got.is_number_integer();
  if (want.is_number()) return got.is_number();
  if (want.is_string()) return got.is_string();
  if (want.is_array()) {
    if (!got.is_array()) return false;
    if (want.empty()) return true;
    return std::all_of(got.begin(), got.end(), [&](const json& x) { return matches(want.front(), x); });
  }
  return false;
}

void overlay(json& target, const json& file, const std::string& where) {
  for (auto it = file.begin(); it != file.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!target.contains(it.key())) throw qdlab::ConfigError("unknown config key '" + path + "'");
    json& slot = target[it.key()];
    if (kFreeObjects.count(it.key())) {
      if (!it->is_object()) throw qdlab::ConfigError("config key '" + path + "' must be an object");
      slot = *it;
    } else if (slot.is_object()) {
      if (!it->is_object()) throw qdlab::ConfigError("config key '" + path + "' must be an object");
      overlay(slot, *it, path);
    } else {
      if (!matches(slot, *it))
        throw qdlab::ConfigError("config key '" + path + "' must be of type " + kind(slot) +
                                 (slot.is_array() && !slot.empty() ? " of " + kind(slot.front()) : ""));
      slot = *it;
    }
  }
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"geom",         "cauchy-check", "torus-sweep",
                                              "sphere-check", "decay-fit",    "collar-alpha",
                                              "thin-mass",    "maximize",     "verify-all"};
  return names;
}

std::string command_description(const std::string& command) {
  static const std::map<std::string, std::string> d{
      {"geom", "collar geometry identities"},
      {"cauchy-check", "Cauchy-Pompeiu reconstruction on collar rectangles and their geometric properties"},
      {"torus-sweep", "Poincare ratio of sin(2 pi x / b) on flat tori"},
      {"sphere-check", "Poincare ratio on the round sphere for closed-form fields"},
      {"decay-fit", "decay rate of collar-decay modes on the thin part"},
      {"collar-alpha", "random sweep of the circle-mean estimate constant"},
      {"thin-mass", "random sweep of the thin-part mass estimate constant"},
      {"maximize", "ascent search for large ratios over a truncated field space"},
      {"verify-all", "every suite with reduced sizes; exit 0 when all pass"}};
  return d.at(command);
}

json command_defaults(const std::string& command) {
  const auto& t = defaults_table();
  const auto it = t.find(command);
  if (it == t.end()) throw qdlab::ConfigError("unknown command '" + command + "'");
  return it->second;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const {
  const json canon = {{"schema", kSchema}, {"command", command}, {"params", params}, {"seed", seed}};
  return fnv1a_hex(canon.dump());
}

RunConfig make_config(const std::string& command, const json& file, const Overrides& o) {
  RunConfig c;
  c.command = command;
  c.params = command_defaults(command);
  if (!file.is_null()) {
    if (!file.is_object()) throw qdlab::ConfigError("config must be a JSON object");
    if (!file.contains("schema")) throw qdlab::ConfigError("config lacks \"schema\": \"v1\"");
    if (file["schema"] != kSchema)
      throw qdlab::ConfigError("unsupported config schema " + file["schema"].dump() + " (expected \"v1\")");
    if (file.contains("command") && file["command"] != command)
      throw qdlab::ConfigError("config is for command " + file["command"].dump() + ", not '" + command + "'");
    json rest = json::object();
    for (auto it = file.begin(); it != file.end(); ++it)
      if (!kCommonKeys.count(it.key())) rest[it.key()] = *it;
    overlay(c.params, rest, "");
    if (file.contains("seed")) {
      const json& s = file["seed"];
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0))
        throw qdlab::ConfigError("config key 'seed' must be an unsigned integer");
      c.seed = file["seed"].get<std::uint64_t>();
    }
    if (file.contains("out")) {
      if (!file["out"].is_string()) throw qdlab::ConfigError("config key 'out' must be a string");
      c.out = file["out"].get<std::string>();
    }
    if (file.contains("svg")) {
      if (!file["svg"].is_boolean()) throw qdlab::ConfigError("config key 'svg' must be a boolean");
      c.svg = file["svg"].get<bool>();
    }
    if (file.contains("threads")) {
      if (!file["threads"].is_number_integer()) throw qdlab::ConfigError("config key 'threads' must be an integer");
      c.threads = file["threads"].get<int>();
    }
  }
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.svg) c.svg = *o.svg;
  if (o.threads) c.threads = *o.threads;
  if (c.threads < 1) throw qdlab::ConfigError("threads must be >= 1");
  return c;
}

RunConfig load_config(const std::string& command, const std::optional<std::string>& path, const Overrides& o) {
  json file;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw qdlab::ConfigError("cannot read config file '" + *path + "'");
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw qdlab::ConfigError("config file '" + *path + "' is not valid JSON: " + e.what());
    }
  }
  return make_config(command, file, o);
}

}  // namespace qdcli
