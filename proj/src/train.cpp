#include "segtrus/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "segtrus/errors.hpp"
#include "segtrus/loss.hpp"

namespace segtrus {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw UsageError("train config: learning_rate must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw UsageError("train config: momentum must be in [0,1)");
  }
  if (batch_size < 1) throw UsageError("train config: batch_size must be >= 1");
  if (epochs < 1) throw UsageError("train config: epochs must be >= 1");
  network.validate();
}

void sgd_step(ParamStore& store, double lr, double mu) {
  if (!store.grads_populated) {
    throw UsageError("sgd_step: gradients are not populated");
  }
  for (auto& p : store.params) {
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
      p.momentum.data[i] = mu * p.momentum.data[i] - lr * p.grad.data[i];
      p.value.data[i] += p.momentum.data[i];
    }
  }
  store.zero_grads();
}

namespace {

// (B,1,H,W) tensors for the given sample indices.
void assemble_batch(const Dataset& ds, const std::vector<std::size_t>& idx,
                    std::size_t first, std::size_t count, Tensor4* x,
                    Tensor4* mask) {
  const Image2D& ref = ds.samples[idx[first]].image;
  *x = Tensor4(count, 1, ref.h, ref.w);
  *mask = Tensor4(count, 1, ref.h, ref.w);
  for (std::size_t b = 0; b < count; ++b) {
    const Sample& s = ds.samples[idx[first + b]];
    std::copy(s.image.pix.begin(), s.image.pix.end(), x->plane(b, 0));
    std::copy(s.mask.pix.begin(), s.mask.pix.end(), mask->plane(b, 0));
  }
}

Tensor4 slice_image(const Tensor4& batch, std::size_t n) {
  Tensor4 out(1, batch.c(), batch.h(), batch.w());
  std::copy(batch.plane(n, 0), batch.plane(n, 0) + out.size(),
            out.data.data());
  return out;
}

void check_sizes(const Dataset& ds, const NetworkConfig& net) {
  for (const auto& s : ds.samples) {
    if (s.image.h != net.input_size[0] || s.image.w != net.input_size[1]) {
      throw ShapeError("sample '" + s.id + "' is " + std::to_string(s.image.h) +
                       "x" + std::to_string(s.image.w) +
                       " but the network expects " +
                       std::to_string(net.input_size[0]) + "x" +
                       std::to_string(net.input_size[1]));
    }
  }
}

}  // namespace

TrainResult run_training(const Dataset& ds, const TrainConfig& cfg,
                         const ProgressSink& sink) {
  cfg.validate();
  if (!ds.has_split()) {
    throw UsageError("run_training: dataset has no train/test split");
  }
  check_sizes(ds, cfg.network);
  std::vector<std::size_t> train_idx = ds.indices_of(Split::train);
  if (train_idx.empty()) {
    throw UsageError("run_training: train split is empty");
  }

  const NetworkPlan plan = build_network(cfg.network);
  Rng rng(cfg.seed);
  ParamStore store = init_params(plan, rng.next_u64());

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(train_idx, rng);
    double loss_sum = 0.0;
    double dsc_sum = 0.0;
    std::size_t steps = 0, images = 0;
    for (std::size_t first = 0; first < train_idx.size();
         first += cfg.batch_size) {
      const std::size_t count =
          std::min(cfg.batch_size, train_idx.size() - first);
      Tensor4 x, mask;
      assemble_batch(ds, train_idx, first, count, &x, &mask);

      ForwardResult fwd = forward(plan, store, x, true);
      const ClassWeights cw = class_weights(mask);
      const double loss = weighted_ce(fwd.probs, mask, cw);
      if (!std::isfinite(loss)) {
        throw NumericError("run_training: non-finite loss at epoch " +
                           std::to_string(epoch) + ", step " +
                           std::to_string(steps + 1));
      }
      const Tensor4 gprobs = weighted_ce_grad_for_backprop(fwd.probs, mask, cw);
      backward(plan, store, fwd.trace, gprobs);
      sgd_step(store, cfg.learning_rate, cfg.momentum);

      loss_sum += loss;
      ++steps;
      const Tensor4 pred = binarize(fwd.probs);
      for (std::size_t b = 0; b < count; ++b) {
        dsc_sum += dsc(slice_image(pred, b), slice_image(mask, b));
        ++images;
      }
    }
    EpochLog row{epoch, loss_sum / static_cast<double>(steps),
                 dsc_sum / static_cast<double>(images)};
    result.log.push_back(row);
    result.total_steps += steps;
    if (sink) sink(row);
  }

  result.checkpoint.config = cfg.network;
  result.checkpoint.params = std::move(store);
  result.checkpoint.epoch = cfg.epochs;
  return result;
}

DscReport evaluate(const Checkpoint& ck, const Dataset& ds, Split split) {
  const std::vector<std::size_t> idx = ds.indices_of(split);
  if (idx.empty()) {
    throw UsageError("evaluate: requested split is empty");
  }
  check_sizes(ds, ck.config);
  const NetworkPlan plan = build_network(ck.config);
  ParamStore store = ck.params;  // forward(inference) leaves it untouched
  std::vector<double> scores;
  for (std::size_t i : idx) {
    const Sample& s = ds.samples[i];
    Tensor4 x(1, 1, s.image.h, s.image.w);
    std::copy(s.image.pix.begin(), s.image.pix.end(), x.data.begin());
    Tensor4 truth(1, 1, s.mask.h, s.mask.w);
    std::copy(s.mask.pix.begin(), s.mask.pix.end(), truth.data.begin());
    const ForwardResult fwd = forward(plan, store, x, false);
    scores.push_back(dsc(binarize(fwd.probs), truth));
  }
  return report_stats(scores);
}

std::string ablation_table_csv(const std::vector<DscReport>& reports) {
  std::string head = "";
  for (std::size_t k = 0; k < reports.size(); ++k) {
    head += ",Test run " + std::to_string(k + 1);
  }
  auto row = [&](const char* label, auto pick) {
    std::string r = label;
    for (const auto& rep : reports) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), ",%.4f", pick(rep));
      r += buf;
    }
    return r;
  };
  return head + "\n" +
         row("Average", [](const DscReport& r) { return r.average; }) + "\n" +
         row("Maximum", [](const DscReport& r) { return r.maximum; }) + "\n" +
         row("Minimum", [](const DscReport& r) { return r.minimum; }) + "\n";
}

AblationResult run_ablation(Dataset ds, const TrainConfig& base,
                            std::size_t runs,
                            const std::filesystem::path& out_dir,
                            const ProgressSink& sink) {
  if (runs < 1) throw UsageError("run_ablation: runs must be >= 1");
  std::filesystem::create_directories(out_dir);
  AblationResult result;
  for (std::size_t k = 1; k <= runs; ++k) {
    Rng split_rng(base.seed + k);
    split_dataset(ds, split_rng);
    save_manifest(ds, out_dir / ("manifest_run" + std::to_string(k) + ".csv"));

    TrainConfig cfg = base;
    cfg.seed = base.seed + k;

    cfg.network.nrc_enabled = true;
    const TrainResult on = run_training(ds, cfg, sink);
    result.nrc_on.push_back(evaluate(on.checkpoint, ds, Split::test));

    cfg.network.nrc_enabled = false;
    const TrainResult off = run_training(ds, cfg, sink);
    result.nrc_off.push_back(evaluate(off.checkpoint, ds, Split::test));
  }
  std::ofstream fon(out_dir / "nrc_on.csv");
  fon << ablation_table_csv(result.nrc_on);
  std::ofstream foff(out_dir / "nrc_off.csv");
  foff << ablation_table_csv(result.nrc_off);
  if (!fon || !foff) {
    throw FormatError("run_ablation: cannot write CSV tables to '" +
                      out_dir.string() + "'");
  }
  return result;
}

}  // namespace segtrus
