#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "segtrus/cli.hpp"
#include "segtrus/netpbm.hpp"

using namespace segtrus;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"segtrus"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("segtrus_cli_" + name);
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

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kMicroConfig =
    R"({"in_channels":1,"input_size":[16,16],"widths":[4,8],)"
    R"("conv_counts":[2,2],"nrc_enabled":true,"rrc_mode":"indices",)"
    R"("num_classes":2})";

}  // namespace

TEST_CASE("cli: usage errors exit 1") {
  CHECK(run_cli({}) == 1);
  CHECK(run_cli({"bogus"}) == 1);
  CHECK(run_cli({"gen-data"}) == 1);                      // missing --out
  CHECK(run_cli({"gen-data", "--out", "x", "--nope"}) == 1);  // unknown flag
  CHECK(run_cli({"--help"}) == 0);
}

TEST_CASE("cli: gen-data is deterministic and complete") {
  TempDir dir("gen");
  const std::string out = (dir.path / "d").string();
  CHECK(run_cli({"gen-data", "--out", out, "--count", "4", "--size", "16",
                 "--seed", "5"}) == 0);
  for (int i = 0; i < 4; ++i) {
    const std::string id = "000" + std::to_string(i);
    CHECK(fs::exists(dir.path / "d" / ("img_" + id + ".pgm")));
    CHECK(fs::exists(dir.path / "d" / ("msk_" + id + ".pgm")));
  }
  const std::string before = file_bytes(dir.path / "d" / "img_0002.pgm");
  const std::string out2 = (dir.path / "d2").string();
  CHECK(run_cli({"gen-data", "--out", out2, "--count", "4", "--size", "16",
                 "--seed", "5"}) == 0);
  CHECK(file_bytes(dir.path / "d2" / "img_0002.pgm") == before);
}

TEST_CASE("cli: train, eval, infer round trip with golden overlay") {
  TempDir dir("pipeline");
  const fs::path data = dir.path / "data";
  const fs::path cfg = dir.path / "net.json";
  const fs::path ckpt = dir.path / "model.ckpt";
  write_text(cfg, kMicroConfig);

  REQUIRE(run_cli({"gen-data", "--out", data.string(), "--count", "10",
                   "--size", "16", "--seed", "42"}) == 0);
  REQUIRE(run_cli({"train", "--data", data.string(), "--out", ckpt.string(),
                   "--config", cfg.string(), "--epochs", "2", "--batch", "4",
                   "--lr", "0.05", "--seed", "7", "--log",
                   (dir.path / "log.csv").string()}) == 0);
  CHECK(fs::exists(data / "manifest.csv"));

  const std::string log = file_bytes(dir.path / "log.csv");
  CHECK(log.starts_with("epoch,mean_loss,train_dsc\n1,"));

  const fs::path report = dir.path / "report.csv";
  CHECK(run_cli({"eval", "--model", ckpt.string(), "--data", data.string(),
                 "--split", "test", "--report", report.string()}) == 0);
  CHECK(file_bytes(report).starts_with("run,avg,max,min\n1,"));

  const fs::path seg = dir.path / "seg.pgm";
  const fs::path overlay = dir.path / "overlay.ppm";
  CHECK(run_cli({"infer", "--model", ckpt.string(), "--image",
                 (data / "img_0009.pgm").string(), "--out", seg.string(),
                 "--truth", (data / "msk_0009.pgm").string(), "--overlay",
                 overlay.string()}) == 0);
  CHECK(fs::exists(seg));

  // segmentation PGM holds only 0/255 bytes
  const Image2D seg_img = read_pgm(seg);
  for (double v : seg_img.pix) CHECK((v == 0.0 || v == 1.0));

  // pinned golden overlay, generated once from this exact deterministic
  // pipeline (see fixtures/README)
  const fs::path golden = fs::path(SEGTRUS_FIXTURES_DIR) / "overlay_golden.ppm";
  REQUIRE(fs::exists(golden));
  CHECK(file_bytes(overlay) == file_bytes(golden));
}

TEST_CASE("cli: I/O failures exit 2") {
  TempDir dir("io");
  const fs::path data = dir.path / "data";
  REQUIRE(run_cli({"gen-data", "--out", data.string(), "--count", "10",
                   "--size", "16", "--seed", "1"}) == 0);

  CHECK(run_cli({"eval", "--model", (dir.path / "missing.ckpt").string(),
                 "--data", data.string(), "--report",
                 (dir.path / "r.csv").string()}) == 2);

  // eval without a manifest in the data dir
  const fs::path cfg = dir.path / "net.json";
  write_text(cfg, kMicroConfig);
  const fs::path ckpt = dir.path / "m.ckpt";
  REQUIRE(run_cli({"train", "--data", data.string(), "--out", ckpt.string(),
                   "--config", cfg.string(), "--epochs", "1", "--seed",
                   "3"}) == 0);
  fs::remove(data / "manifest.csv");
  CHECK(run_cli({"eval", "--model", ckpt.string(), "--data", data.string(),
                 "--report", (dir.path / "r.csv").string()}) == 2);

  // image size mismatch on infer
  TempDir dir2("io2");
  const fs::path big = dir2.path / "big";
  REQUIRE(run_cli({"gen-data", "--out", big.string(), "--count", "1",
                   "--size", "32", "--seed", "1"}) == 0);
  CHECK(run_cli({"infer", "--model", ckpt.string(), "--image",
                 (big / "img_0000.pgm").string(), "--out",
                 (dir2.path / "s.pgm").string()}) == 2);
}

TEST_CASE("cli: gradcheck passes on a correct build") {
  CHECK(run_cli({"gradcheck", "--seed", "3"}) == 0);
  CHECK(run_cli({"gradcheck", "--tolerance", "0"}) == 1);
}

TEST_CASE("boundary: 4-neighbor rule with the image border as background") {
  Image2D mask(4, 4, 0.0);
  // 2x2 block in the middle: every pixel touches background
  mask.at(1, 1) = mask.at(1, 2) = mask.at(2, 1) = mask.at(2, 2) = 1.0;
  const Image2D b = boundary(mask);
  CHECK(b.at(1, 1) == 1.0);
  CHECK(b.at(2, 2) == 1.0);

  Image2D full(3, 3, 1.0);  // everything borders the image edge except center
  const Image2D fb = boundary(full);
  CHECK(fb.at(0, 0) == 1.0);
  CHECK(fb.at(1, 1) == 0.0);
}

TEST_CASE("overlay: perfect prediction is all yellow; misses split red/green") {
  Image2D base(8, 8, 0.5);
  Image2D truth(8, 8, 0.0);
  for (std::size_t r = 2; r < 6; ++r) {
    for (std::size_t c = 2; c < 6; ++c) truth.at(r, c) = 1.0;
  }

  const ImageRgb same = make_overlay(base, truth, truth);
  const Image2D tb = boundary(truth);
  for (std::size_t i = 0; i < tb.pix.size(); ++i) {
    if (tb.pix[i] == 1.0) {
      CHECK(same.pix[i] == Rgb{255, 255, 0});
    } else {
      CHECK(same.pix[i].r == same.pix[i].g);  // gray or green, never red-only
    }
  }

  const Image2D none(8, 8, 0.0);  // all-background prediction
  const ImageRgb miss = make_overlay(base, none, truth);
  bool any_red = false, any_green = false;
  for (const Rgb& px : miss.pix) {
    if (px == Rgb{255, 0, 0}) any_red = true;
    if (px == Rgb{0, 255, 0}) any_green = true;
  }
  CHECK_FALSE(any_red);
  CHECK(any_green);
}
