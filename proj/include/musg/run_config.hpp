#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "musg/musgconv.hpp"
#include "musg/tasks.hpp"

namespace musg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskKind { VoiceSeparation, Composer };

struct RunConfig {
  TaskKind task = TaskKind::VoiceSeparation;
  MusGConvConfig model;
  TrainConfig train;
  std::string data_dir;
  std::string output_dir;
  std::string checkpoint;
  int n_classes = 0;       // composer task; 0 = infer from the training labels
  int eval_max_nodes = 0;  // 0 = whole pieces
};

// Every key accepted by apply_setting, in echo order.
const std::vector<std::string>& run_config_keys();

// Throws ConfigError on an unknown key or an unparsable value.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

// `key = value` lines; blank lines and `#` comments are skipped.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});

// One `key=value` line per key, in run_config_keys() order. Parsing the
// result reproduces `cfg`.
std::string format_run_config(const RunConfig& cfg);

}  // namespace musg
