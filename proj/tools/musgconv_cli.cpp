// musgconv: ingest, build-graph, synth, train, evaluate, gradcheck.
// Exit codes: 0 ok, 1 usage or configuration, 2 data, 3 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "musg/gradcheck_suite.hpp"
#include "musg/note_model.hpp"
#include "musg/optim.hpp"
#include "musg/run_config.hpp"
#include "musg/score_graph.hpp"
#include "musg/tasks.hpp"

namespace fs = std::filesystem;
using namespace musg;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool f64 = false;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

void make_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("an output directory is required (-o or output_dir)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
}

// Moves `--key value` / `--key=value` arguments naming a run-config key out
// of argv. `seed` stays a global flag.
std::vector<std::pair<std::string, std::string>> extract_overrides(std::vector<std::string>& args) {
  const auto& keys = run_config_keys();
  std::vector<std::pair<std::string, std::string>> found;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& arg = args[i];
    if (arg.rfind("--", 0) == 0) {
      std::string key = arg.substr(2), value;
      const auto eq = key.find('=');
      if (eq != std::string::npos) key.resize(eq);
      std::replace(key.begin(), key.end(), '-', '_');
      if (key != "seed" && std::find(keys.begin(), keys.end(), key) != keys.end()) {
        if (eq != std::string::npos) {
          value = arg.substr(3 + eq);
        } else if (i + 1 < args.size()) {
          value = args[++i];
        } else {
          throw ConfigError("missing value for --" + key);
        }
        found.emplace_back(key, value);
        continue;
      }
    }
    rest.push_back(arg);
  }
  args = std::move(rest);
  return found;
}

RunConfig resolve_config(const Globals& g, const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (!g.config_path.empty()) cfg = load_run_config(g.config_path);
  for (const auto& [key, value] : overrides) apply_setting(cfg, key, value);
  if (g.seed) cfg.train.seed = *g.seed;
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

bool is_score_file(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".notes" || ext == ".mid" || ext == ".midi";
}

std::vector<ScoreGraph> load_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_score_file(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<ScoreGraph> graphs;
  for (const auto& f : files) {
    try {
      graphs.push_back(build_graph(load_score_file(f.string())));
    } catch (const std::exception& e) {
      throw DataError(f.string() + ": " + e.what());
    }
  }
  return graphs;
}

// `data_dir` holding train/ (and optionally valid/, test/) subdirectories is
// used as is; a flat directory is split by piece with the run seed.
DatasetSplits load_splits(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw ConfigError("data_dir is required");
  const fs::path root(cfg.data_dir);
  if (!fs::exists(root)) throw DataError("missing data directory " + root.string());
  if (fs::is_directory(root / "train")) {
    DatasetSplits s;
    s.train = load_dir(root / "train");
    if (fs::is_directory(root / "valid")) s.valid = load_dir(root / "valid");
    if (fs::is_directory(root / "test")) s.test = load_dir(root / "test");
    return s;
  }
  return split_dataset(load_dir(root), cfg.train.seed);
}

void require_labels(const std::vector<ScoreGraph>& pieces) {
  for (const auto& g : pieces)
    if (!g.class_label) throw DataError(g.source_name + ": composer task needs a class label");
}

int infer_classes(const RunConfig& cfg, const DatasetSplits& data) {
  if (cfg.n_classes > 0) return cfg.n_classes;
  int top = -1;
  for (const auto* split : {&data.train, &data.valid, &data.test})
    for (const auto& g : *split) top = std::max(top, *g.class_label);
  return std::max(2, top + 1);
}

std::string metrics_header() { return "epoch,split,loss,metric\n"; }

std::string metrics_row(const EpochRecord& r) {
  return std::to_string(r.epoch) + "," + r.split + "," + fmt(r.loss) + "," + fmt(r.metric) + "\n";
}

LinkEvalOptions eval_options(const RunConfig& cfg) {
  return {cfg.train.candidate_gap, cfg.train.threshold, cfg.eval_max_nodes};
}

std::size_t uncovered_links(const std::vector<ScoreGraph>& pieces, std::optional<Tick> gap) {
  std::size_t missing = 0;
  for (const auto& g : pieces) {
    auto cand = candidate_pairs(g, gap);
    std::sort(cand.begin(), cand.end());
    for (const auto& l : ground_truth_links(g))
      if (!std::binary_search(cand.begin(), cand.end(), l)) ++missing;
  }
  return missing;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::vector<std::string>& paths, const std::string& out) {
  make_dir(out);
  int failures = 0;
  for (const auto& p : paths) {
    try {
      Score s = load_score_file(p);
      write_text(fs::path(out) / (fs::path(p).stem().string() + ".notes"), write_note_table(s));
      std::cout << p << ": " << s.notes.size() << " notes\n";
    } catch (const std::exception& e) {
      std::cerr << p << ": " << e.what() << "\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : kExitData;
}

int cmd_build_graph(const std::string& path, const std::string& out) {
  ScoreGraph g;
  try {
    g = build_graph(load_score_file(path));
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  const std::string dump = dump_graph(g);
  if (out.empty()) {
    std::cout << dump;
  } else {
    if (auto parent = fs::path(out).parent_path(); !parent.empty()) make_dir(parent.string());
    write_text(out, dump);
  }
  return 0;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

int cmd_synth(const std::string& preset, const Globals& g, int pieces, int notes_per_voice,
              const std::vector<int>& split, const std::string& out) {
  SynthSpec spec = synth_preset(preset);
  spec.seed = g.seed.value_or(0);
  if (pieces >= 0) spec.pieces = pieces;
  if (notes_per_voice >= 0) spec.notes_per_voice = notes_per_voice;
  if (!split.empty()) {
    if (split.size() != 3) throw ConfigError("--split takes train,valid,test counts");
    spec.pieces = split[0] + split[1] + split[2];
  }
  const std::vector<Score> scores = synth_dataset(spec);
  make_dir(out);

  std::ostringstream manifest;
  manifest << "preset=" << preset << "\nseed=" << spec.seed << "\npieces=" << spec.pieces
           << "\nvoices=" << spec.voices << "\nnotes_per_voice=" << spec.notes_per_voice
           << "\nregister_centers=" << join(spec.register_centers) << "\nregister_range=" << spec.register_range
           << "\ndivisions=" << spec.divisions_per_quarter << "\ntimesig=" << spec.time_numerator << "/"
           << spec.time_denominator << "\n";
  for (std::size_t c = 0; c < spec.styles.size(); ++c) {
    const StyleClass& s = spec.styles[c];
    std::vector<int> durs(s.durations.begin(), s.durations.end());
    manifest << "style" << c << ".steps=" << join(s.steps) << "\nstyle" << c << ".step_weights=" << join(s.step_weights)
             << "\nstyle" << c << ".durations=" << join(durs) << "\nstyle" << c
             << ".duration_weights=" << join(s.duration_weights) << "\nstyle" << c
             << ".rest_probability=" << fmt(s.rest_probability) << "\n";
  }
  if (!split.empty()) manifest << "split=" << join(split) << "\n";
  manifest << "# file,class\n";

  const char* names[] = {"train", "valid", "test"};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    fs::path dir(out);
    if (!split.empty()) {
      std::size_t part = i < static_cast<std::size_t>(split[0]) ? 0
                         : i < static_cast<std::size_t>(split[0] + split[1]) ? 1
                                                                              : 2;
      dir /= names[part];
    }
    make_dir(dir.string());
    char file[32];
    std::snprintf(file, sizeof file, "piece_%04zu.notes", i);
    write_text(dir / file, write_note_table(scores[i]));
    manifest << fs::relative(dir / file, out).string() << "," << scores[i].class_label.value_or(0) << "\n";
  }
  write_text(fs::path(out) / "manifest.txt", manifest.str());
  std::cout << "wrote " << scores.size() << " pieces to " << out << "\n";
  return 0;
}

template <typename T>
int train_run(RunConfig cfg) {
  DatasetSplits data = load_splits(cfg);
  if (data.train.empty()) throw DataError("no training pieces under " + cfg.data_dir);
  make_dir(cfg.output_dir);
  const fs::path out(cfg.output_dir);

  std::ofstream log(out / "metrics.csv", std::ios::binary);
  if (!log) throw DataError("cannot write " + (out / "metrics.csv").string());
  log << metrics_header() << std::flush;
  auto on_epoch = [&](const EpochRecord& r) {
    log << metrics_row(r) << std::flush;
    std::cerr << "epoch " << r.epoch << " " << r.split << " loss=" << fmt(r.loss) << " metric=" << fmt(r.metric)
              << "\n";
  };

  TrainResult result;
  if (cfg.task == TaskKind::VoiceSeparation) {
    if (auto missing = uncovered_links(data.train, cfg.train.candidate_gap))
      std::cerr << "warning: " << missing << " training links fall outside the candidate set\n";
    write_text(out / "config.txt", format_run_config(cfg));
    VoiceSeparationModel<T> model(cfg.model, cfg.train.seed);
    result = train_voice_separation(model, data, cfg.train, on_epoch);
    save_checkpoint(out / "model.ckpt", model.store);
  } else {
    require_labels(data.train);
    require_labels(data.valid);
    require_labels(data.test);
    cfg.n_classes = infer_classes(cfg, data);
    write_text(out / "config.txt", format_run_config(cfg));
    ComposerModel<T> model(cfg.model, static_cast<std::size_t>(cfg.n_classes), cfg.train.seed);
    result = train_composer(model, data, cfg.train, on_epoch);
    save_checkpoint(out / "model.ckpt", model.store);
  }
  std::cout << "epochs_run=" << result.epochs_run << "\nbest_epoch=" << result.best_epoch
            << "\nbest_valid_metric=" << fmt(result.best_valid_metric) << "\n";
  return 0;
}

std::vector<ScoreGraph> evaluation_pieces(const RunConfig& cfg, const std::string& data_override) {
  if (!data_override.empty()) return load_dir(data_override);
  DatasetSplits s = load_splits(cfg);
  return s.test;
}

template <typename T>
int evaluate_run(RunConfig cfg, const std::string& checkpoint, const std::string& data_override) {
  const std::string ckpt = checkpoint.empty() ? cfg.checkpoint : checkpoint;
  if (ckpt.empty()) throw ConfigError("a checkpoint is required (--checkpoint)");
  if (!fs::exists(ckpt)) throw DataError("missing checkpoint " + ckpt);
  std::vector<ScoreGraph> pieces = evaluation_pieces(cfg, data_override);
  if (pieces.empty()) throw DataError("no evaluation pieces");
  make_dir(cfg.output_dir);
  const fs::path out(cfg.output_dir);

  std::ostringstream report, preds;
  if (cfg.task == TaskKind::VoiceSeparation) {
    VoiceSeparationModel<T> model(cfg.model, cfg.train.seed);
    load_checkpoint(ckpt, model.store);
    std::vector<LinkPrediction> predictions;
    const LinkMetrics m = evaluate_links(model, pieces, eval_options(cfg), &predictions);
    report << "task=voicesep\ncandidate_gap="
           << (cfg.train.candidate_gap ? std::to_string(*cfg.train.candidate_gap) : std::string("bar"))
           << "\nthreshold=" << fmt(cfg.train.threshold) << "\neval_max_nodes=" << cfg.eval_max_nodes
           << "\npieces=" << pieces.size() << "\ncandidates=" << m.candidates
           << "\nuncovered_links=" << m.uncovered_links << "\ntp=" << m.counts.tp << "\nfp=" << m.counts.fp
           << "\nfn=" << m.counts.fn << "\ntn=" << m.counts.tn << "\nprecision=" << fmt(m.precision())
           << "\nrecall=" << fmt(m.recall()) << "\nf1=" << fmt(m.f1()) << "\nloss=" << fmt(m.loss) << "\n";
    std::string current;
    bool first = true;
    for (const auto& p : predictions) {
      if (first || p.piece != current) {
        preds << "# piece " << p.piece << "\nsrc,dst,prob,label\n";
        current = p.piece;
        first = false;
      }
      preds << p.src << "," << p.dst << "," << fmt(p.prob) << "," << (p.label ? 1 : 0) << "\n";
    }
  } else {
    require_labels(pieces);
    if (cfg.n_classes < 2) throw ConfigError("n_classes must be set to the trained value (see the run's config.txt)");
    ComposerModel<T> model(cfg.model, static_cast<std::size_t>(cfg.n_classes), cfg.train.seed);
    load_checkpoint(ckpt, model.store);
    std::vector<int> predicted;
    const ClassificationMetrics m = evaluate_classification(model, pieces, &predicted);
    report << "task=composer\nn_classes=" << cfg.n_classes << "\npieces=" << m.total << "\ncorrect=" << m.correct
           << "\naccuracy=" << fmt(m.accuracy()) << "\nmajority_baseline=" << fmt(m.majority_baseline)
           << "\nloss=" << fmt(m.loss) << "\n";
    preds << "piece,label,predicted\n";
    for (std::size_t i = 0; i < pieces.size(); ++i)
      preds << pieces[i].source_name << "," << *pieces[i].class_label << "," << predicted[i] << "\n";
  }
  write_text(out / "report.txt", report.str());
  write_text(out / "predictions.csv", preds.str());
  std::cout << report.str();
  return 0;
}

int cmd_gradcheck(const Globals& g, double tolerance) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto items = run_gradcheck_suite(g.seed.value_or(0));
  bool ok = true;
  for (const auto& it : items) {
    const bool pass = it.result.max_rel_error < tolerance;
    ok = ok && pass;
    std::printf("%-4s %-34s max_rel=%.3e coords=%zu worst=%s[%zu]\n", pass ? "ok" : "FAIL", it.name.c_str(),
                it.result.max_rel_error, it.result.coords_checked, it.result.worst_param.c_str(),
                it.result.worst_index);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s: %zu checks in %.1f s, tolerance %.0e\n", ok ? "PASS" : "FAIL", items.size(), secs, tolerance);
  return ok ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Score graphs and MusGConv models: ingestion, synthesis, training, evaluation", "musgconv"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key=value run configuration");
  app.add_option("--seed", g.seed, "seed for synthesis, initialization and sampling");
  app.add_flag("--f64", g.f64, "train and evaluate in 64-bit floating point");
  app.fallthrough();

  std::vector<std::string> ingest_paths;
  std::string out;
  auto* ingest = app.add_subcommand("ingest", "parse MIDI or note-table files into canonical note tables");
  ingest->add_option("paths", ingest_paths, "input files")->required();
  ingest->add_option("-o,--out", out, "output directory")->required();

  std::string graph_input, graph_out;
  auto* build = app.add_subcommand("build-graph", "print the graph dump of one piece");
  build->add_option("path", graph_input, "note table or MIDI file")->required();
  build->add_option("-o,--out", graph_out, "output file (default: stdout)");

  std::string preset;
  int pieces = -1, notes_per_voice = -1;
  std::vector<int> split;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset and its manifest");
  synth->add_option("--preset", preset, "dataset recipe")
      ->required()
      ->check(CLI::IsMember(synth_preset_names()));
  synth->add_option("--pieces", pieces, "number of pieces");
  synth->add_option("--notes-per-voice", notes_per_voice, "notes per voice");
  synth->add_option("--split", split, "train,valid,test counts; writes one subdirectory each")->delimiter(',');
  synth->add_option("-o,--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a model; writes model.ckpt, metrics.csv and config.txt");
  train->add_option("-o,--out", out, "output directory (overrides output_dir)");

  std::string checkpoint, data_override;
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint; writes report.txt and predictions.csv");
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint (overrides checkpoint)");
  evaluate->add_option("--data", data_override, "evaluate every piece in this directory");
  evaluate->add_option("-o,--out", out, "output directory (overrides output_dir)");

  double tolerance = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every layer and the encoder");
  gradcheck->add_option("--tolerance", tolerance, "maximum relative error");

  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::pair<std::string, std::string>> overrides;
  try {
    overrides = extract_overrides(args);
    std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (!overrides.empty() && !*train && !*evaluate) {
    std::cerr << "--" << overrides.front().first << " only applies to train and evaluate\n";
    return kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_paths, out);
    if (*build) return cmd_build_graph(graph_input, graph_out);
    if (*synth) return cmd_synth(preset, g, pieces, notes_per_voice, split, out);
    if (*gradcheck) return cmd_gradcheck(g, tolerance);
    if (*train) {
      RunConfig cfg = resolve_config(g, overrides);
      if (!out.empty()) cfg.output_dir = out;
      return g.f64 ? train_run<double>(cfg) : train_run<float>(cfg);
    }
    if (*evaluate) {
      RunConfig cfg = resolve_config(g, overrides);
      if (!out.empty()) cfg.output_dir = out;
      return g.f64 ? evaluate_run<double>(cfg, checkpoint, data_override)
                   : evaluate_run<float>(cfg, checkpoint, data_override);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
