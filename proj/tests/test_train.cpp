#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "segtrus/errors.hpp"
#include "segtrus/phantom.hpp"
#include "segtrus/train.hpp"

using namespace segtrus;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("segtrus_train_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

Dataset phantom_dataset(std::size_t count, std::size_t size,
                        std::uint64_t seed) {
  Dataset ds;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed + i);
    Sample s = gen_phantom(size, rng);
    s.id = std::to_string(i);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

NetworkConfig tiny_network(std::size_t size = 16) {
  NetworkConfig cfg;
  cfg.input_size = {size, size};
  cfg.widths = {4, 8};
  cfg.conv_counts = {2, 2};
  return cfg;
}

// one conv layer, known-size store for optimizer arithmetic
ParamStore single_param_store() {
  NetworkConfig cfg;
  cfg.input_size = {2, 2};
  cfg.widths = {1};
  cfg.conv_counts = {1};
  cfg.nrc_enabled = false;
  return init_params(build_network(cfg), 1);
}

}  // namespace

TEST_CASE("sgd_step: hand-computed momentum recurrence") {
  ParamStore store = single_param_store();
  const double theta0 = store.params[0].value.data[0];

  std::fill(store.params[0].grad.data.begin(),
            store.params[0].grad.data.end(), 0.0);
  store.params[0].grad.data[0] = 1.0;
  store.grads_populated = true;
  sgd_step(store, 0.1, 0.9);
  CHECK(store.params[0].momentum.data[0] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(store.params[0].value.data[0] ==
        doctest::Approx(theta0 - 0.1).epsilon(1e-12));
  // gradients zeroed afterwards
  CHECK(store.params[0].grad.data[0] == 0.0);
  CHECK_FALSE(store.grads_populated);

  store.params[0].grad.data[0] = 1.0;
  store.grads_populated = true;
  sgd_step(store, 0.1, 0.9);
  CHECK(store.params[0].momentum.data[0] ==
        doctest::Approx(-0.19).epsilon(1e-12));
  CHECK(store.params[0].value.data[0] ==
        doctest::Approx(theta0 - 0.29).epsilon(1e-12));
}

TEST_CASE("sgd_step: mu = 0 reduces to plain SGD") {
  ParamStore store = single_param_store();
  const double theta0 = store.params[0].value.data[0];
  store.params[0].grad.data[0] = 2.0;
  store.grads_populated = true;
  sgd_step(store, 0.05, 0.0);
  CHECK(store.params[0].value.data[0] ==
        doctest::Approx(theta0 - 0.1).epsilon(1e-12));
}

TEST_CASE("sgd_step: unpopulated gradients are a usage error") {
  ParamStore store = single_param_store();
  CHECK_THROWS_AS(sgd_step(store, 0.1, 0.9), UsageError);
}

TEST_CASE("sgd_step: velocity matches the closed-form geometric sum") {
  ParamStore store = single_param_store();
  const double lr = 0.01, mu = 0.9;
  Rng rng(42);
  std::vector<double> gs;
  for (int t = 0; t < 12; ++t) {
    const double g = rng.uniform(-1.0, 1.0);
    gs.push_back(g);
    for (double& v : store.params[0].grad.data) v = g;
    store.grads_populated = true;
    sgd_step(store, lr, mu);

    double closed = 0.0;  // v_t = -lr sum_j mu^(t-j) g_j
    for (std::size_t j = 0; j < gs.size(); ++j) {
      closed += std::pow(mu, double(gs.size() - 1 - j)) * gs[j];
    }
    closed *= -lr;
    CHECK(std::abs(store.params[0].momentum.data[0] - closed) <= 1e-12);
  }
}

TEST_CASE("run_training: step counting and log shape") {
  Dataset ds = phantom_dataset(12, 16, 100);
  ds.split.assign(12, Split::test);
  for (std::size_t i = 0; i < 4; ++i) ds.split[i] = Split::train;

  TrainConfig cfg;
  cfg.network = tiny_network();
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.seed = 9;
  const TrainResult res = run_training(ds, cfg);
  CHECK(res.total_steps == 1);  // ceil(4/4)
  CHECK(res.log.size() == 1);
  CHECK(res.log[0].epoch == 1);
  CHECK(res.checkpoint.epoch == 1);
}

TEST_CASE("run_training: validation errors") {
  Dataset ds = phantom_dataset(12, 16, 100);
  TrainConfig cfg;
  cfg.network = tiny_network();
  CHECK_THROWS_AS(run_training(ds, cfg), UsageError);  // no split

  ds.split.assign(12, Split::train);
  cfg.network = tiny_network(32);  // 32x32 network vs 16x16 images
  CHECK_THROWS_AS(run_training(ds, cfg), ShapeError);

  cfg.network = tiny_network();
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(run_training(ds, cfg), UsageError);
}

TEST_CASE("run_training: bit-identical checkpoints for identical inputs") {
  TempDir dir("determinism");
  Dataset ds = phantom_dataset(12, 16, 200);
  Rng rng(7);
  split_dataset(ds, rng);

  TrainConfig cfg;
  cfg.network = tiny_network();
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 11;
  cfg.learning_rate = 0.05;

  const TrainResult a = run_training(ds, cfg);
  const TrainResult b = run_training(ds, cfg);
  save_checkpoint(dir.path / "a.ckpt", a.checkpoint);
  save_checkpoint(dir.path / "b.ckpt", b.checkpoint);
  CHECK(file_bytes(dir.path / "a.ckpt") == file_bytes(dir.path / "b.ckpt"));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mean_loss == b.log[i].mean_loss);
  }
}

TEST_CASE("run_training: loss descends on the phantom fixture") {
  Dataset ds = phantom_dataset(64, 32, 500);
  Rng rng(13);
  split_dataset(ds, rng);

  TrainConfig cfg;
  cfg.network = tiny_network(32);
  cfg.epochs = 4;
  cfg.batch_size = 4;
  cfg.seed = 13;
  cfg.learning_rate = 0.5;  // Eq. 2 normalizes by n and by class counts,
                            // so desk-scale gradients need a larger step
  const TrainResult res = run_training(ds, cfg);
  REQUIRE(res.log.size() == 4);
  INFO("first ", res.log.front().mean_loss, " last ", res.log.back().mean_loss);
  CHECK(res.log.back().mean_loss < res.log.front().mean_loss);
}

TEST_CASE("evaluate: deterministic, split handling, empty split error") {
  Dataset ds = phantom_dataset(12, 16, 300);
  Rng rng(7);
  split_dataset(ds, rng);

  TrainConfig cfg;
  cfg.network = tiny_network();
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.seed = 3;
  const TrainResult res = run_training(ds, cfg);

  const DscReport r1 = evaluate(res.checkpoint, ds, Split::test);
  const DscReport r2 = evaluate(res.checkpoint, ds, Split::test);
  CHECK(r1.per_image == r2.per_image);
  CHECK(r1.average == r2.average);

  Dataset all_train = ds;
  all_train.split.assign(all_train.samples.size(), Split::train);
  CHECK_THROWS_AS(evaluate(res.checkpoint, all_train, Split::test),
                  UsageError);
}

TEST_CASE("evaluate: does not mutate the checkpoint") {
  Dataset ds = phantom_dataset(12, 16, 300);
  Rng rng(7);
  split_dataset(ds, rng);
  TrainConfig cfg;
  cfg.network = tiny_network();
  cfg.epochs = 1;
  cfg.seed = 3;
  const TrainResult res = run_training(ds, cfg);

  Checkpoint copy = res.checkpoint;
  (void)evaluate(copy, ds, Split::test);
  for (std::size_t i = 0; i < copy.params.params.size(); ++i) {
    CHECK(copy.params.params[i].value ==
          res.checkpoint.params.params[i].value);
  }
  for (std::size_t i = 0; i < copy.params.buffers.size(); ++i) {
    CHECK(copy.params.buffers[i].value ==
          res.checkpoint.params.buffers[i].value);
  }
}

TEST_CASE("checkpoint: save/load/save is byte-identical, stats included") {
  TempDir dir("ckpt");
  Dataset ds = phantom_dataset(12, 16, 400);
  Rng rng(5);
  split_dataset(ds, rng);
  TrainConfig cfg;
  cfg.network = tiny_network();
  cfg.epochs = 1;
  cfg.seed = 5;
  const TrainResult res = run_training(ds, cfg);

  const fs::path p1 = dir.path / "one.ckpt";
  const fs::path p2 = dir.path / "two.ckpt";
  save_checkpoint(p1, res.checkpoint);
  const Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(p2, loaded);
  CHECK(file_bytes(p1) == file_bytes(p2));

  CHECK(loaded.config == res.checkpoint.config);
  CHECK(loaded.epoch == res.checkpoint.epoch);
  REQUIRE(loaded.params.buffers.size() == res.checkpoint.params.buffers.size());
  for (std::size_t i = 0; i < loaded.params.buffers.size(); ++i) {
    CHECK(loaded.params.buffers[i].value ==
          res.checkpoint.params.buffers[i].value);  // BN running stats
  }
}

TEST_CASE("checkpoint: corruption and version guards") {
  TempDir dir("ckpt_bad");
  Dataset ds = phantom_dataset(12, 16, 400);
  Rng rng(5);
  split_dataset(ds, rng);
  TrainConfig cfg;
  cfg.network = tiny_network();
  cfg.epochs = 1;
  cfg.seed = 5;
  const TrainResult res = run_training(ds, cfg);
  const fs::path p = dir.path / "x.ckpt";
  save_checkpoint(p, res.checkpoint);

  // flip one payload byte
  std::string bytes = file_bytes(p);
  bytes[bytes.size() / 2] ^= 0x01;
  {
    std::ofstream out(dir.path / "flip.ckpt", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    load_checkpoint(dir.path / "flip.ckpt");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("CRC") != std::string::npos);
  }

  // bump the version field (bytes 4..7, little-endian)
  std::string vbytes = file_bytes(p);
  vbytes[4] = static_cast<char>(vbytes[4] + 1);
  {
    std::ofstream out(dir.path / "ver.ckpt", std::ios::binary);
    out.write(vbytes.data(), static_cast<std::streamsize>(vbytes.size()));
  }
  try {
    load_checkpoint(dir.path / "ver.ckpt");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  // wrong magic
  std::string mbytes = file_bytes(p);
  mbytes[0] = 'X';
  {
    std::ofstream out(dir.path / "magic.ckpt", std::ios::binary);
    out.write(mbytes.data(), static_cast<std::streamsize>(mbytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(dir.path / "magic.ckpt"), FormatError);
}

TEST_CASE("run_ablation: table layout and per-run manifests") {
  TempDir dir("ablate");
  Dataset ds = phantom_dataset(12, 16, 600);

  TrainConfig base;
  base.network = tiny_network();
  base.epochs = 1;
  base.batch_size = 4;
  base.seed = 40;
  base.learning_rate = 0.05;

  const AblationResult res = run_ablation(ds, base, 2, dir.path);
  REQUIRE(res.nrc_on.size() == 2);
  REQUIRE(res.nrc_off.size() == 2);
  for (const auto& rep : res.nrc_on) {
    CHECK(rep.average >= 0.0);
    CHECK(rep.average <= 1.0);
  }

  const std::string on_csv = file_bytes(dir.path / "nrc_on.csv");
  CHECK(on_csv.starts_with(",Test run 1,Test run 2\nAverage,"));
  CHECK(on_csv.find("\nMaximum,") != std::string::npos);
  CHECK(on_csv.find("\nMinimum,") != std::string::npos);
  CHECK(fs::exists(dir.path / "manifest_run1.csv"));
  CHECK(fs::exists(dir.path / "manifest_run2.csv"));
  CHECK(file_bytes(dir.path / "manifest_run1.csv") !=
        file_bytes(dir.path / "manifest_run2.csv"));
}
