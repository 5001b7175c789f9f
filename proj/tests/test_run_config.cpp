#include <catch_amalgamated.hpp>

#include "musg/run_config.hpp"

using namespace musg;

TEST_CASE("run config: parse, comments, overrides", "[run_config]") {
  RunConfig cfg = parse_run_config(
      "# voice separation\n"
      "task = composer\n"
      "hidden_dim=16\n"
      "variant=edge_forwarding\n"
      "edge_op=multiply\n"
      "use_pcint=off\n"
      "lr=0.003\n"
      "candidate_gap=8\n"
      "seed=42\n");
  CHECK(cfg.task == TaskKind::Composer);
  CHECK(cfg.model.hidden_dim == 16);
  CHECK(cfg.model.variant == Variant::EdgeForwarding);
  CHECK(cfg.model.edge_op == EdgeOp::Multiply);
  CHECK_FALSE(cfg.model.use_pcint);
  CHECK(cfg.train.lr == 0.003);
  CHECK(cfg.train.candidate_gap == Tick{8});
  CHECK(cfg.train.seed == 42);

  apply_setting(cfg, "candidate_gap", "bar");
  CHECK_FALSE(cfg.train.candidate_gap.has_value());
  apply_setting(cfg, "epochs", "3");
  CHECK(cfg.train.epochs == 3);
}

TEST_CASE("run config: defaults match the library defaults", "[run_config]") {
  RunConfig cfg;
  CHECK(cfg.train.k_nodes == 512);
  CHECK(cfg.train.batch_subgraphs == 8);
  CHECK(cfg.train.negative_ratio == 5);
  CHECK(cfg.train.lr == 1e-3);
  CHECK(cfg.train.weight_decay == 5e-4);
  CHECK(cfg.model.n_layers == 2);
  CHECK(cfg.model.pc_embed_dim == 16);
}

TEST_CASE("run config: errors", "[run_config]") {
  CHECK_THROWS_AS(parse_run_config("hiden_dim=3\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("hidden_dim=three\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("use_pcint=maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("variant=fancy\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("just a line\n"), ConfigError);
  try {
    parse_run_config("seed=1\n\nlr=fast\n");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("line 3:", 0) == 0);
  }
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.txt"), ConfigError);
}

TEST_CASE("run config: echo round-trips", "[run_config]") {
  RunConfig cfg;
  apply_setting(cfg, "lr", "0.1");
  apply_setting(cfg, "weight_decay", "0.0001");
  apply_setting(cfg, "signed_distances", "true");
  apply_setting(cfg, "data_dir", "/tmp/some data");
  const std::string text = format_run_config(cfg);
  CHECK(text.find("lr=0.1\n") != std::string::npos);
  RunConfig back = parse_run_config(text);
  CHECK(format_run_config(back) == text);
  CHECK(back.data_dir == "/tmp/some data");
  CHECK(back.train.lr == 0.1);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == run_config_keys().size());
}
