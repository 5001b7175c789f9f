#include "musg/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace musg {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

std::string fmt_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MUSG_INT_KEY(name, field, type)                                                       \
  Key {                                                                                       \
    name, [](RunConfig& c, std::string_view v) { c.field = parse_int<type>(name, v); },      \
        [](const RunConfig& c) { return std::to_string(c.field); }                           \
  }
#define MUSG_DOUBLE_KEY(name, field)                                                          \
  Key {                                                                                       \
    name, [](RunConfig& c, std::string_view v) { c.field = parse_double(name, v); },         \
        [](const RunConfig& c) { return fmt_double(c.field); }                               \
  }
#define MUSG_BOOL_KEY(name, field)                                                            \
  Key {                                                                                       \
    name, [](RunConfig& c, std::string_view v) { c.field = parse_bool(name, v); },           \
        [](const RunConfig& c) { return fmt_bool(c.field); }                                 \
  }
#define MUSG_STRING_KEY(name, field)                                                          \
  Key {                                                                                       \
    name, [](RunConfig& c, std::string_view v) { c.field = std::string(v); },                \
        [](const RunConfig& c) { return c.field; }                                           \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"task",
          [](RunConfig& c, std::string_view v) {
            if (v == "voicesep") c.task = TaskKind::VoiceSeparation;
            else if (v == "composer") c.task = TaskKind::Composer;
            else throw ConfigError("task: expected voicesep or composer, got '" + std::string(v) + "'");
          },
          [](const RunConfig& c) { return std::string(c.task == TaskKind::Composer ? "composer" : "voicesep"); }},
      MUSG_STRING_KEY("data_dir", data_dir),
      MUSG_STRING_KEY("output_dir", output_dir),
      MUSG_STRING_KEY("checkpoint", checkpoint),
      MUSG_INT_KEY("n_classes", n_classes, int),
      MUSG_INT_KEY("hidden_dim", model.hidden_dim, std::size_t),
      MUSG_INT_KEY("n_layers", model.n_layers, int),
      Key{"variant",
          [](RunConfig& c, std::string_view v) {
            if (v == "plain") c.model.variant = Variant::Plain;
            else if (v == "edge_forwarding") c.model.variant = Variant::EdgeForwarding;
            else throw ConfigError("variant: expected plain or edge_forwarding, got '" + std::string(v) + "'");
          },
          [](const RunConfig& c) {
            return std::string(c.model.variant == Variant::Plain ? "plain" : "edge_forwarding");
          }},
      Key{"edge_op",
          [](RunConfig& c, std::string_view v) {
            if (v == "concat") c.model.edge_op = EdgeOp::Concat;
            else if (v == "multiply") c.model.edge_op = EdgeOp::Multiply;
            else throw ConfigError("edge_op: expected concat or multiply, got '" + std::string(v) + "'");
          },
          [](const RunConfig& c) { return std::string(c.model.edge_op == EdgeOp::Concat ? "concat" : "multiply"); }},
      MUSG_BOOL_KEY("use_pcint", model.use_pcint),
      MUSG_BOOL_KEY("use_manual_edge_input", model.use_manual_edge_input),
      MUSG_BOOL_KEY("signed_distances", model.signed_distances),
      MUSG_INT_KEY("pc_embed_dim", model.pc_embed_dim, std::size_t),
      MUSG_DOUBLE_KEY("lr", train.lr),
      MUSG_DOUBLE_KEY("weight_decay", train.weight_decay),
      MUSG_INT_KEY("epochs", train.epochs, int),
      MUSG_INT_KEY("patience", train.patience, int),
      MUSG_INT_KEY("negative_ratio", train.negative_ratio, int),
      Key{"candidate_gap",
          [](RunConfig& c, std::string_view v) {
            if (v == "bar") c.train.candidate_gap.reset();
            else c.train.candidate_gap = parse_int<Tick>("candidate_gap", v);
          },
          [](const RunConfig& c) {
            return c.train.candidate_gap ? std::to_string(*c.train.candidate_gap) : std::string("bar");
          }},
      MUSG_DOUBLE_KEY("threshold", train.threshold),
      MUSG_INT_KEY("seed", train.seed, std::uint64_t),
      MUSG_INT_KEY("k_nodes", train.k_nodes, int),
      MUSG_INT_KEY("batch_subgraphs", train.batch_subgraphs, int),
      MUSG_INT_KEY("eval_max_nodes", eval_max_nodes, int),
  };
  return table;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : keys()) out.push_back(k.name);
    return out;
  }();
  return names;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& k : keys()) {
    if (k.name == key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    try {
      apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string format_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + "=" + k.get(cfg) + "\n";
  return out;
}

}  // namespace musg
