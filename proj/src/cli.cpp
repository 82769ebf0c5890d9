#include "segtrus/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "segtrus/checkpoint.hpp"
#include "segtrus/dataset.hpp"
#include "segtrus/errors.hpp"
#include "segtrus/metrics.hpp"
#include "segtrus/model.hpp"
#include "segtrus/phantom.hpp"
#include "segtrus/train.hpp"
#include "segtrus/verify.hpp"

namespace segtrus {

Image2D boundary(const Image2D& mask) {
  Image2D b(mask.h, mask.w, 0.0);
  for (std::size_t r = 0; r < mask.h; ++r) {
    for (std::size_t c = 0; c < mask.w; ++c) {
      if (mask.at(r, c) != 1.0) continue;
      const bool edge = r == 0 || mask.at(r - 1, c) == 0.0 ||
                        r + 1 == mask.h || mask.at(r + 1, c) == 0.0 ||
                        c == 0 || mask.at(r, c - 1) == 0.0 ||
                        c + 1 == mask.w || mask.at(r, c + 1) == 0.0;
      if (edge) b.at(r, c) = 1.0;
    }
  }
  return b;
}

ImageRgb make_overlay(const Image2D& base, const Image2D& pred,
                      const Image2D& truth) {
  if (pred.h != base.h || pred.w != base.w || truth.h != base.h ||
      truth.w != base.w) {
    throw ShapeError("make_overlay: image/mask dimensions differ");
  }
  ImageRgb out(base.h, base.w);
  for (std::size_t i = 0; i < base.pix.size(); ++i) {
    const std::uint8_t g = quantize255(base.pix[i]);
    out.pix[i] = {g, g, g};
  }
  const Image2D pb = boundary(pred);
  const Image2D tb = boundary(truth);
  for (std::size_t i = 0; i < base.pix.size(); ++i) {
    if (pb.pix[i] == 1.0 && tb.pix[i] == 1.0) {
      out.pix[i] = {255, 255, 0};
    } else if (pb.pix[i] == 1.0) {
      out.pix[i] = {255, 0, 0};
    } else if (tb.pix[i] == 1.0) {
      out.pix[i] = {0, 255, 0};
    }
  }
  return out;
}

namespace {

std::string slurp_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("cannot open '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string pad4(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu", i);
  return buf;
}

Image2D mask_to_image(const Tensor4& mask) {
  Image2D img(mask.h(), mask.w());
  std::copy(mask.data.begin(), mask.data.end(), img.pix.begin());
  return img;
}

Tensor4 image_to_tensor(const Image2D& img) {
  Tensor4 t(1, 1, img.h, img.w);
  std::copy(img.pix.begin(), img.pix.end(), t.data.begin());
  return t;
}

Image2D read_mask(const std::filesystem::path& path) {
  Image2D raw = read_pgm(path);
  for (double& v : raw.pix) {
    if (v != 0.0 && v != 1.0) {
      throw DataError("mask '" + path.string() + "' is not binary 0/255");
    }
  }
  return raw;
}

struct TrainFlags {
  std::filesystem::path config_path;
  double lr = 0.0005;
  double momentum = 0.9;
  std::size_t batch = 4;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  bool no_nrc = false;
  std::string rrc_mode;

  void add_to(CLI::App* cmd, bool with_nrc_flag) {
    cmd->add_option("--config", config_path,
                    "Network config JSON (defaults to the canonical "
                    "VGG19RSeg for 224x224 inputs)");
    cmd->add_option("--lr", lr, "Initial learning rate");
    cmd->add_option("--momentum", momentum, "Momentum coefficient");
    cmd->add_option("--batch", batch, "Mini-batch size");
    cmd->add_option("--epochs", epochs, "Number of epochs");
    cmd->add_option("--seed", seed, "RNG seed (split, init, shuffling)");
    if (with_nrc_flag) {
      cmd->add_flag("--no-nrc", no_nrc,
                    "Disable the neighbouring residual connections");
    }
    cmd->add_option("--rrc-mode", rrc_mode,
                    "Remote residual connection mode")
        ->check(CLI::IsMember({"indices", "indices-add"}));
  }

  TrainConfig build() const {
    TrainConfig cfg;
    if (!config_path.empty()) {
      cfg.network = config_from_json(slurp_text(config_path));
    }
    cfg.learning_rate = lr;
    cfg.momentum = momentum;
    cfg.batch_size = batch;
    cfg.epochs = epochs;
    cfg.seed = seed;
    if (no_nrc) cfg.network.nrc_enabled = false;
    if (!rrc_mode.empty()) cfg.network.rrc_mode = rrc_mode_from_string(rrc_mode);
    return cfg;
  }
};

void cmd_gen_data(const std::filesystem::path& out_dir, std::size_t count,
                  std::size_t size, std::uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed + i);  // one stream per sample
    const Sample s = gen_phantom(size, rng);
    const std::string id = pad4(i);
    write_pgm(s.image, out_dir / ("img_" + id + ".pgm"));
    write_pgm(s.mask, out_dir / ("msk_" + id + ".pgm"));
  }
  std::cout << "wrote " << count << " phantom pairs of size " << size << "x"
            << size << " to " << out_dir.string() << "\n";
}

void cmd_train(const std::filesystem::path& data_dir,
               const std::filesystem::path& out_ckpt,
               const std::filesystem::path& log_path, const TrainFlags& flags) {
  const TrainConfig cfg = flags.build();
  Dataset ds = load_dataset(data_dir);
  Rng split_rng(cfg.seed);
  split_dataset(ds, split_rng);
  save_manifest(ds, data_dir / "manifest.csv");
  std::cout << "training on " << ds.indices_of(Split::train).size()
            << " samples, testing on " << ds.indices_of(Split::test).size()
            << " (manifest.csv written)\n";

  const TrainResult result = run_training(ds, cfg, [](const EpochLog& row) {
    std::printf("epoch %3zu  loss %.6f  train_dsc %.4f\n", row.epoch,
                row.mean_loss, row.train_dsc);
  });
  save_checkpoint(out_ckpt, result.checkpoint);
  std::cout << "checkpoint written to " << out_ckpt.string() << "\n";

  if (!log_path.empty()) {
    std::ofstream log(log_path);
    if (!log) throw FormatError("cannot open log '" + log_path.string() + "'");
    log << "epoch,mean_loss,train_dsc\n";
    for (const auto& row : result.log) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.6f\n", row.epoch,
                    row.mean_loss, row.train_dsc);
      log << buf;
    }
  }
}

void cmd_eval(const std::filesystem::path& model,
              const std::filesystem::path& data_dir, const std::string& split,
              const std::filesystem::path& report_path) {
  const Checkpoint ck = load_checkpoint(model);
  Dataset ds = load_dataset(data_dir);
  apply_manifest(ds, data_dir / "manifest.csv");
  const Split s = split == "train" ? Split::train : Split::test;
  const DscReport rep = evaluate(ck, ds, s);
  std::ofstream out(report_path);
  if (!out) {
    throw FormatError("cannot open report '" + report_path.string() + "'");
  }
  out << "run,avg,max,min\n" << rep.to_csv_row(1) << "\n";
  std::printf("%s split: %zu images, DSC avg %.4f max %.4f min %.4f\n",
              split.c_str(), rep.per_image.size(), rep.average, rep.maximum,
              rep.minimum);
}

void cmd_infer(const std::filesystem::path& model,
               const std::filesystem::path& image_path,
               const std::filesystem::path& out_path,
               const std::filesystem::path& truth_path,
               const std::filesystem::path& overlay_path) {
  const Checkpoint ck = load_checkpoint(model);
  const Image2D image = read_pgm(image_path);
  if (image.h != ck.config.input_size[0] ||
      image.w != ck.config.input_size[1]) {
    throw ShapeError("image is " + std::to_string(image.h) + "x" +
                     std::to_string(image.w) + " but the model expects " +
                     std::to_string(ck.config.input_size[0]) + "x" +
                     std::to_string(ck.config.input_size[1]));
  }
  const NetworkPlan plan = build_network(ck.config);
  ParamStore store = ck.params;
  const ForwardResult fwd = forward(plan, store, image_to_tensor(image), false);
  const Image2D pred = mask_to_image(binarize(fwd.probs));
  write_pgm(pred, out_path);
  std::cout << "segmentation written to " << out_path.string() << "\n";

  if (!truth_path.empty()) {
    const Image2D truth = read_mask(truth_path);
    if (truth.h != image.h || truth.w != image.w) {
      throw ShapeError("truth mask dimensions do not match the image");
    }
    Tensor4 pt = image_to_tensor(pred), tt = image_to_tensor(truth);
    std::printf("DSC vs truth: %.4f\n", dsc(pt, tt));
    if (!overlay_path.empty()) {
      write_ppm(make_overlay(image, pred, truth), overlay_path);
      std::cout << "overlay written to " << overlay_path.string() << "\n";
    }
  }
}

void cmd_gradcheck(double tolerance, std::uint64_t seed) {
  if (tolerance <= 0.0) throw UsageError("tolerance must be > 0");
  const auto checks = gradient_battery(seed, tolerance);
  bool all_pass = true;
  for (const auto& c : checks) {
    std::printf("[%s] %-28s max_rel_err %.3e (tol %.1e)\n",
                c.pass ? "PASS" : "FAIL", c.name.c_str(), c.max_rel_err,
                c.tolerance);
    all_pass = all_pass && c.pass;
  }
  if (!all_pass) throw NumericError("gradient check failed");
}

void cmd_ablate(const std::filesystem::path& data_dir,
                const std::filesystem::path& out_dir, std::size_t runs,
                const TrainFlags& flags) {
  const TrainConfig base = flags.build();
  Dataset ds = load_dataset(data_dir);
  const AblationResult res =
      run_ablation(std::move(ds), base, runs, out_dir, {});
  double mean_on = 0.0, mean_off = 0.0;
  for (std::size_t k = 0; k < runs; ++k) {
    std::printf("run %zu: NRC on avg %.4f | NRC off avg %.4f\n", k + 1,
                res.nrc_on[k].average, res.nrc_off[k].average);
    mean_on += res.nrc_on[k].average;
    mean_off += res.nrc_off[k].average;
  }
  mean_on /= static_cast<double>(runs);
  mean_off /= static_cast<double>(runs);
  std::printf("mean avg DSC: NRC on %.4f, NRC off %.4f, difference %+.4f\n",
              mean_on, mean_off, mean_on - mean_off);
  std::cout << "tables written to " << (out_dir / "nrc_on.csv").string()
            << " and " << (out_dir / "nrc_off.csv").string() << "\n";
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"segtrus: VGG19RSeg segmentation on synthetic speckle "
               "phantoms"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data",
                                 "Generate phantom images with masks");
  std::filesystem::path gen_out;
  std::size_t gen_count = 64, gen_size = 32;
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of samples");
  gen->add_option("--size", gen_size, "Image size (square)");
  gen->add_option("--seed", gen_seed, "Base RNG seed");
  gen->callback([&] { cmd_gen_data(gen_out, gen_count, gen_size, gen_seed); });

  // train
  auto* train = app.add_subcommand("train", "Train a model; writes "
                                            "manifest.csv into the data dir");
  std::filesystem::path train_data, train_out, train_log;
  TrainFlags train_flags;
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Output checkpoint path")->required();
  train->add_option("--log", train_log, "Per-epoch CSV log path");
  train_flags.add_to(train, true);
  train->callback(
      [&] { cmd_train(train_data, train_out, train_log, train_flags); });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  std::filesystem::path eval_model, eval_data, eval_report;
  std::string eval_split = "test";
  eval->add_option("--model", eval_model, "Checkpoint path")->required();
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--split", eval_split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--report", eval_report, "Report CSV path")->required();
  eval->callback([&] { cmd_eval(eval_model, eval_data, eval_split,
                                eval_report); });

  // infer
  auto* infer = app.add_subcommand("infer", "Segment one image");
  std::filesystem::path inf_model, inf_image, inf_out, inf_truth, inf_overlay;
  infer->add_option("--model", inf_model, "Checkpoint path")->required();
  infer->add_option("--image", inf_image, "Input PGM")->required();
  infer->add_option("--out", inf_out, "Output segmentation PGM (prostate 255)")
      ->required();
  auto* truth_opt =
      infer->add_option("--truth", inf_truth, "Ground-truth mask PGM");
  infer
      ->add_option("--overlay", inf_overlay,
                   "Overlay PPM: red predicted boundary, green truth "
                   "boundary, yellow overlap")
      ->needs(truth_opt);
  infer->callback(
      [&] { cmd_infer(inf_model, inf_image, inf_out, inf_truth, inf_overlay); });

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck",
                                "Finite-difference gradient verification");
  double gc_tol = 1e-4;
  std::uint64_t gc_seed = 1;
  gc->add_option("--tolerance", gc_tol, "Relative error tolerance");
  gc->add_option("--seed", gc_seed, "RNG seed");
  gc->callback([&] { cmd_gradcheck(gc_tol, gc_seed); });

  // ablate
  auto* ablate = app.add_subcommand(
      "ablate", "Train NRC-on and NRC-off variants over repeated splits");
  std::filesystem::path abl_data, abl_out;
  std::size_t abl_runs = 5;
  TrainFlags abl_flags;
  ablate->add_option("--data", abl_data, "Dataset directory")->required();
  ablate->add_option("--runs", abl_runs, "Number of train/test runs");
  ablate->add_option("--out-dir", abl_out, "Output directory for CSV tables")
      ->required();
  abl_flags.add_to(ablate, false);
  ablate->callback([&] { cmd_ablate(abl_data, abl_out, abl_runs, abl_flags); });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    // shape/format/data/filesystem problems
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace segtrus
