// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#include "doctest.h"
#include "pdo/checkpoint.hpp"
#include "pdo/dataset_io.hpp"
#include "pdo/error.hpp"
#include "pdo/trainer.hpp"
#include "pdo/unet.hpp"
#include "temp_dir.hpp"

using namespace pdo;
namespace fs = std::filesystem;

namespace {

NetConfig small_config(int depth = 2) {
  NetConfig c;
  c.channels = 2;
  c.input_blocks = 3;
  c.base_width = 4;
  c.depth = depth;
  c.embedding_dim = 8;
  return c;
}

template <typename T>
BasicTensor<T> random_input(const NetConfig& c, int n, int h, int w, std::uint64_t seed) {
  BasicTensor<T> x(n, c.channels_in(), h, w);
  Rng rng(seed);
  for (auto& v : x.data()) v = static_cast<T>(rng.normal());
  return x;
}

template <typename T>
void randomize(UNet<T>& net, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& p : net.params())
    for (auto& v : p.value) v = static_cast<T>(scale * rng.normal());
}

Checkpoint trained_checkpoint(long iterations) {
  Rng rng(3);
  Tensor data(8, 2, 8, 8);
  for (auto& v : data.data()) v = static_cast<float>(rng.normal());
  TrainSetup setup;
  setup.net = small_config();
  setup.train.batch_size = 2;
  setup.train.iterations = iterations;
  setup.train.learning_rate = 1e-2;
  setup.stats = NormStats{{"h", "u"}, {0.0, 0.0}, {1.0, 1.0}};
  setup.seed = 5;
  return train(data, setup);
}

}  // namespace

TEST_CASE("zero-initialized output layer gives zero output") {
  const NetConfig c = small_config();
  UNet<float> net(c, 1);
  const Tensor x = random_input<float>(c, 2, 8, 8, 2);
  const std::vector<float> nc{0.3f, -1.0f};
  const Tensor y = net.forward(x, nc);
  CHECK(y.c() == 2);
  for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("forward is deterministic and reentrant") {
  const NetConfig c = small_config();
  UNet<float> net(c, 1);
  randomize(net, 4, 0.2);
  const Tensor x = random_input<float>(c, 2, 8, 8, 2);
  const std::vector<float> nc{0.3f, -1.0f};
  const Tensor a = net.forward(x, nc);
  const Tensor b = net.forward(x, nc);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  Tensor t1, t2;
  std::thread th1([&] { t1 = net.forward(x, nc); });
  std::thread th2([&] { t2 = net.forward(x, nc); });
  th1.join();
  th2.join();
  CHECK(std::equal(a.data().begin(), a.data().end(), t1.data().begin()));
  CHECK(std::equal(a.data().begin(), a.data().end(), t2.data().begin()));
  bool nonzero = false;
  for (float v : a.data()) nonzero |= v != 0.0f;
  CHECK(nonzero);
}

TEST_CASE("backpropagation matches central finite differences in double precision") {
  const NetConfig c = small_config();
  UNet<double> net(c, 7);
  randomize(net, 8, 0.3);
  const auto x = random_input<double>(c, 2, 8, 8, 9);
  const std::vector<double> nc{0.4, -0.7};
  BasicTensor<double> w(2, 2, 8, 8);
  Rng rng(10);
  for (auto& v : w.data()) v = rng.normal();
  auto loss = [&](const UNet<double>& m) {
    const auto y = m.forward(x, nc);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += y.data()[k] * w.data()[k];
    return s;
  };
  UNetCache<double> cache;
  net.forward(x, nc, cache);
  net.zero_grad();
  net.backward(cache, w);

  std::set<std::string> touched;
  int checked = 0;
  for (int k = 0; k < 60; ++k) {
    auto& p = net.params()[rng.uniform_index(net.params().size())];
    const std::size_t idx = rng.uniform_index(p.value.size());
    const double orig = p.value[idx];
    const double h = 1e-5;
    p.value[idx] = orig + h;
    const double up = loss(net);
    p.value[idx] = orig - h;
    const double down = loss(net);
    p.value[idx] = orig;
    const double fd = (up - down) / (2 * h);
    const double bp = p.grad[idx];
    const double rel = std::abs(fd - bp) / std::max({std::abs(fd), std::abs(bp), 1e-6});
    INFO(p.name << "[" << idx << "] fd " << fd << " bp " << bp);
    CHECK(rel <= 1e-3);
    touched.insert(p.name);
    ++checked;
  }
  CHECK(checked >= 20);
  CHECK(touched.size() >= 10);
}

TEST_CASE("skip connections are consistent for depths 2 to 4") {
  for (int depth : {2, 3, 4}) {
    NetConfig c = small_config(depth);
    UNet<float> net(c, 1);
    randomize(net, 2, 0.1);
    const Tensor x = random_input<float>(c, 1, 32, 16, 3);
    const std::vector<float> nc{0.0f};
    const Tensor y = net.forward(x, nc);
    CHECK(y.c() == 2);
    CHECK(y.h() == 32);
    CHECK(y.w() == 16);
    for (float v : y.data()) CHECK(std::isfinite(v));
  }
  NetConfig c = small_config(3);
  UNet<float> net(c, 1);
  const Tensor bad = random_input<float>(c, 1, 12, 16, 3);
  const std::vector<float> nc{0.0f};
  CHECK_THROWS_AS(net.forward(bad, nc), ConfigError);
  CHECK_THROWS_AS(c.check_spatial(20, 16), ConfigError);
}

TEST_CASE("default network size") {
  NetConfig c;
  UNet<float> net(c, 1);
  MESSAGE("default parameter count " << net.parameter_count());
  CHECK(net.parameter_count() > 300000);
  CHECK(net.parameter_count() < 2500000);
}

TEST_CASE("checkpoint round trip reproduces forward outputs") {
  TempDir dir("ckpt_roundtrip");
  const Checkpoint ck = trained_checkpoint(3);
  save_checkpoint(ck, dir.path());
  CHECK(fs::exists(dir.path() / "checkpoint.json"));
  CHECK(fs::exists(dir.path() / "params" / "out_conv.weight.f32"));
  CHECK(fs::exists(dir.path() / "ema" / "out_conv.weight.f32"));
  const Checkpoint back = load_checkpoint(dir.path());
  CHECK(back.iteration == 3);
  CHECK(back.net_config == ck.net_config);
  CHECK(back.stats.channels == ck.stats.channels);
  const Tensor x = random_input<float>(ck.net_config, 2, 8, 8, 4);
  const std::vector<float> nc{0.1f, 0.2f};
  for (bool ema : {true, false}) {
    const Tensor a = load_network(ck, ema).forward(x, nc);
    const Tensor b = load_network(back, ema).forward(x, nc);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  }
}

TEST_CASE("EMA weights are used by default and differ from raw weights after training") {
  const Checkpoint ck = trained_checkpoint(2);
  const Tensor x = random_input<float>(ck.net_config, 1, 8, 8, 4);
  const std::vector<float> nc{0.1f};
  const Tensor def = load_network(ck).forward(x, nc);
  const Tensor ema = load_network(ck, true).forward(x, nc);
  const Tensor raw = load_network(ck, false).forward(x, nc);
  CHECK(std::equal(def.data().begin(), def.data().end(), ema.data().begin()));
  CHECK_FALSE(std::equal(raw.data().begin(), raw.data().end(), ema.data().begin()));
}

TEST_CASE("corrupt tensor file names the tensor") {
  TempDir dir("ckpt_corrupt");
  save_checkpoint(trained_checkpoint(1), dir.path());
  fs::resize_file(dir.path() / "params" / "enc0.conv1.weight.f32", 12);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.path()), doctest::Contains("enc0.conv1.weight"), CorruptionError);
}

TEST_CASE("checkpoint version mismatch is rejected") {
  TempDir dir("ckpt_version");
  save_checkpoint(trained_checkpoint(1), dir.path());
  const fs::path manifest = dir.path() / "checkpoint.json";
  std::string text = read_text_file(manifest);
  const auto pos = text.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("\"format_version\": 1").size(), "\"format_version\": 99");
  write_text_file(manifest, text);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.path()), doctest::Contains("format version 99"), ValidationError);
}

TEST_CASE("float and double networks agree") {
  const NetConfig c = small_config();
  UNet<float> net(c, 11);
  randomize(net, 12, 0.2);
  const UNet<double> dnet = net.cast<double>();
  const Tensor x = random_input<float>(c, 1, 8, 8, 13);
  BasicTensor<double> xd(1, c.channels_in(), 8, 8);
  std::copy(x.data().begin(), x.data().end(), xd.data().begin());
  const std::vector<float> nc{0.5f};
  const std::vector<double> ncd{0.5};
  const Tensor y = net.forward(x, nc);
  const auto yd = dnet.forward(xd, ncd);
  for (std::size_t k = 0; k < y.size(); ++k) CHECK(y.data()[k] == doctest::Approx(yd.data()[k]).epsilon(1e-4));
}
