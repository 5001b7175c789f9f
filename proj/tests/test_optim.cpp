#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "musg/nn.hpp"
#include "musg/optim.hpp"

using namespace musg;
using ad::Var;
using Catch::Approx;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("musg_test_" + name)).string();
}

}  // namespace

TEST_CASE("adam: zero gradient and no decay leaves parameters unchanged", "[adam]") {
  nn::ParameterStore<double> store;
  auto w = store.add("w", Tensor<double>{{0.5, -1.25}});
  AdamState<double> state;
  for (int i = 0; i < 3; ++i) adam_step(store.params(), state, {});
  CHECK(w.value() == Tensor<double>{{0.5, -1.25}});
  CHECK(state.step == 3);
}

TEST_CASE("adam: one step with unit gradient moves by about lr", "[adam]") {
  nn::ParameterStore<double> store;
  auto w = store.add("w", Tensor<double>{{2.0}});
  w.grad()(0, 0) = 1.0;
  AdamState<double> state;
  AdamOptions opt;
  opt.lr = 0.1;
  adam_step(store.params(), state, opt);
  // m_hat = 1, v_hat = 1 after bias correction
  CHECK(w.value()(0, 0) == Approx(2.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("adam: decoupled weight decay", "[adam]") {
  nn::ParameterStore<double> store;
  auto w = store.add("w", Tensor<double>{{2.0}});
  AdamState<double> state;
  AdamOptions opt;
  opt.lr = 0.1;
  opt.weight_decay = 0.5;
  adam_step(store.params(), state, opt);
  CHECK(w.value()(0, 0) == Approx(2.0 * (1.0 - 0.05)));
}

TEST_CASE("adam: two steps by hand", "[adam]") {
  nn::ParameterStore<double> store;
  auto w = store.add("w", Tensor<double>{{0.0}});
  AdamState<double> state;
  AdamOptions opt;
  opt.lr = 0.01;
  w.grad()(0, 0) = 2.0;
  adam_step(store.params(), state, opt);
  w.grad()(0, 0) = -1.0;
  adam_step(store.params(), state, opt);
  double m = 0, v = 0, x = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? 2.0 : -1.0;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    x -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  CHECK(w.value()(0, 0) == Approx(x).epsilon(1e-12));
}

TEST_CASE("adam: identical runs give identical trajectories", "[adam]") {
  auto run = [] {
    std::mt19937_64 rng(3);
    nn::ParameterStore<double> store;
    nn::Linear<double> lin(store, "lin", 3, 2, true, rng);
    AdamState<double> state;
    Var<double> x = Var<double>::constant({{1, 2, 3}, {-1, 0, 1}});
    for (int i = 0; i < 20; ++i) {
      store.zero_grad();
      ad::sum(ad::mul(lin(x), lin(x))).backward();
      adam_step(store.params(), state, {});
    }
    return store.snapshot();
  };
  CHECK(run() == run());
}

TEST_CASE("parameter store", "[nn]") {
  std::mt19937_64 rng(1);
  nn::ParameterStore<double> store;
  nn::Linear<double> lin(store, "lin", 4, 3, true, rng);
  CHECK(store.params().size() == 2);
  CHECK(store.scalar_count() == 15);
  REQUIRE(store.find("lin.weight") != nullptr);
  CHECK(store.find("lin.weight")->var.value().shape_string() == "[3,4]");
  CHECK(store.find("missing") == nullptr);
  CHECK_THROWS_AS(store.add("lin.bias", Tensor<double>(1, 1)), std::invalid_argument);
  for (double w : lin.weight().value().data()) CHECK(std::abs(w) <= 0.5);

  auto snap = store.snapshot();
  lin.weight().node()->value.fill(9.0);
  store.restore(snap);
  CHECK(store.find("lin.weight")->var.value() == snap[0]);
}

TEST_CASE("embedding table init is standard normal", "[nn]") {
  std::mt19937_64 rng(2);
  nn::ParameterStore<double> store;
  auto t = nn::make_embedding_table(store, "emb", 200, 50, rng);
  double mean = 0, sq = 0;
  for (double x : t.value().data()) {
    mean += x;
    sq += x * x;
  }
  mean /= 10000.0;
  sq /= 10000.0;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(sq - 1.0) < 0.05);
}

TEST_CASE("checkpoint round-trip", "[checkpoint]") {
  std::mt19937_64 rng(5);
  nn::ParameterStore<float> a;
  nn::Mlp2<float> mlp_a(a, "mlp", 3, 4, 2, rng);
  const std::string path = temp_path("roundtrip.ckpt");
  save_checkpoint(path, a);

  nn::ParameterStore<float> b;
  std::mt19937_64 other(99);
  nn::Mlp2<float> mlp_b(b, "mlp", 3, 4, 2, other);
  CHECK_FALSE(a.snapshot() == b.snapshot());
  load_checkpoint(path, b);
  CHECK(a.snapshot() == b.snapshot());

  // Layout: magic, version, count, then the first record header.
  std::FILE* f = std::fopen(path.c_str(), "rb");
  REQUIRE(f);
  unsigned char head[9];
  REQUIRE(std::fread(head, 1, 9, f) == 9);
  std::fclose(f);
  CHECK(std::string(reinterpret_cast<char*>(head), 4) == "MGCV");
  CHECK(head[4] == 1);
  CHECK(head[5] == 4);  // four records, little-endian
  CHECK(head[6] == 0);

  nn::ParameterStore<float> c;
  nn::Mlp2<float> mlp_c(c, "mlp", 3, 5, 2, other);
  CHECK_THROWS(load_checkpoint(path, c));
  nn::ParameterStore<float> d;
  nn::Mlp2<float> mlp_d(d, "other", 3, 4, 2, other);
  CHECK_THROWS(load_checkpoint(path, d));
  CHECK_THROWS(load_checkpoint(temp_path("does_not_exist.ckpt"), d));
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint stores 32-bit values for 64-bit models", "[checkpoint]") {
  nn::ParameterStore<double> a;
  a.add("w", Tensor<double>{{0.1, 1.0 / 3.0}});
  const std::string path = temp_path("f64.ckpt");
  save_checkpoint(path, a);
  nn::ParameterStore<double> b;
  b.add("w", Tensor<double>(1, 2));
  load_checkpoint(path, b);
  CHECK(b.find("w")->var.value()(0, 0) == static_cast<double>(0.1f));
  CHECK(b.find("w")->var.value()(0, 1) == static_cast<double>(1.0f / 3.0f));
  std::filesystem::remove(path);
}
