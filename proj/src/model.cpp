#include "segtrus/model.hpp"

#include <cmath>
#include <json.hpp>

#include "segtrus/errors.hpp"
#include "segtrus/rng.hpp"

namespace segtrus {

std::string to_string(RrcMode mode) {
  return mode == RrcMode::indices ? "indices" : "indices_plus_add";
}

RrcMode rrc_mode_from_string(const std::string& s) {
  if (s == "indices") return RrcMode::indices;
  if (s == "indices_plus_add" || s == "indices-add") {
    return RrcMode::indices_plus_add;
  }
  throw UsageError("unknown rrc_mode '" + s + "'");
}

void NetworkConfig::validate() const {
  if (widths.empty() || widths.size() != conv_counts.size()) {
    throw UsageError("config: widths and conv_counts must be non-empty and "
                     "of equal length");
  }
  for (std::size_t w : widths) {
    if (w < 1) throw UsageError("config: block width must be >= 1");
  }
  for (std::size_t c : conv_counts) {
    if (c < 1) throw UsageError("config: conv_count must be >= 1");
  }
  if (in_channels < 1) throw UsageError("config: in_channels must be >= 1");
  if (num_classes < 2) throw UsageError("config: num_classes must be >= 2");
  const std::size_t div = std::size_t{1} << blocks();
  for (std::size_t s : input_size) {
    if (s == 0 || s % div != 0) {
      throw UsageError("config: input size " + std::to_string(s) +
                       " must be a positive multiple of 2^" +
                       std::to_string(blocks()));
    }
  }
}

std::string to_json(const NetworkConfig& c) {
  nlohmann::json j;
  j["in_channels"] = c.in_channels;
  j["input_size"] = {c.input_size[0], c.input_size[1]};
  j["widths"] = c.widths;
  j["conv_counts"] = c.conv_counts;
  j["nrc_enabled"] = c.nrc_enabled;
  j["rrc_mode"] = to_string(c.rrc_mode);
  j["num_classes"] = c.num_classes;
  return j.dump();
}

NetworkConfig config_from_json(const std::string& text) {
  NetworkConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.in_channels = j.at("in_channels").get<std::size_t>();
    const auto sz = j.at("input_size");
    if (!sz.is_array() || sz.size() != 2) {
      throw FormatError("config: input_size must be [H, W]");
    }
    c.input_size = {sz[0].get<std::size_t>(), sz[1].get<std::size_t>()};
    c.widths = j.at("widths").get<std::vector<std::size_t>>();
    c.conv_counts = j.at("conv_counts").get<std::vector<std::size_t>>();
    c.nrc_enabled = j.at("nrc_enabled").get<bool>();
    c.rrc_mode = rrc_mode_from_string(j.at("rrc_mode").get<std::string>());
    c.num_classes = j.at("num_classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

const LayerDesc* NetworkPlan::find_layer(const std::string& name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

int NetworkPlan::layer_index(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

NetworkPlan build_network(const NetworkConfig& cfg) {
  cfg.validate();
  if (cfg.nrc_enabled) {
    for (std::size_t cc : cfg.conv_counts) {
      if (cc < 2) {
        throw UsageError(
            "config: NRC needs >= 2 conv layers per block; the anchor is the "
            "first unit's output and cannot feed its own pre-activation");
      }
    }
  }

  NetworkPlan plan;
  plan.config = cfg;
  const std::size_t B = cfg.blocks();
  const bool rrc_add = cfg.rrc_mode == RrcMode::indices_plus_add;
  int pidx = 0;  // next ParamStore param index
  int bidx = 0;  // next ParamStore buffer index

  auto emit_conv = [&](const std::string& name, std::size_t cin,
                       std::size_t cout, bool bias) {
    LayerDesc l;
    l.kind = LayerKind::conv;
    l.name = name;
    l.param = pidx;
    l.in_ch = cin;
    l.out_ch = cout;
    l.bias = bias;
    plan.layers.push_back(l);
    pidx += bias ? 2 : 1;
  };
  auto emit_bn = [&](const std::string& name, std::size_t channels) {
    LayerDesc l;
    l.kind = LayerKind::batchnorm;
    l.name = name;
    l.param = pidx;
    l.buffer = bidx;
    l.out_ch = channels;
    plan.layers.push_back(l);
    pidx += 2;  // gamma, beta
    bidx += 2;  // running_mean, running_var
  };
  auto emit = [&](LayerKind kind, const std::string& name, int slot = -1) {
    LayerDesc l;
    l.kind = kind;
    l.name = name;
    l.slot = slot;
    plan.layers.push_back(l);
  };
  auto new_anchor = [&] { return static_cast<int>(plan.anchor_slots++); };

  std::vector<int> prepool_slot(B, -1);  // rrc indices_plus_add snapshots

  // encoder
  std::size_t prev = cfg.in_channels;
  for (std::size_t i = 0; i < B; ++i) {
    const std::size_t w = cfg.widths[i];
    const std::size_t cc = cfg.conv_counts[i];
    const std::string bn = "enc.b" + std::to_string(i);
    const int anchor = cfg.nrc_enabled ? new_anchor() : -1;
    for (std::size_t j = 0; j < cc; ++j) {
      const std::string un = bn + ".c" + std::to_string(j);
      emit_conv(un, j == 0 ? prev : w, w, false);
      emit_bn(un + ".bn", w);
      if (cfg.nrc_enabled && j + 1 == cc) {
        emit(LayerKind::add_anchor, bn + ".nrc_add", anchor);
      }
      emit(LayerKind::relu, un + ".relu");
      if (cfg.nrc_enabled && j == 0) {
        emit(LayerKind::save_anchor, bn + ".nrc_anchor", anchor);
      }
    }
    if (rrc_add) {
      prepool_slot[i] = new_anchor();
      emit(LayerKind::save_anchor, bn + ".prepool", prepool_slot[i]);
    }
    emit(LayerKind::maxpool, bn + ".pool", static_cast<int>(plan.pool_slots++));
    prev = w;
  }

  // decoder, blocks mirrored in reverse
  for (std::size_t bi = B; bi-- > 0;) {
    const std::size_t w = cfg.widths[bi];
    const std::size_t cc = cfg.conv_counts[bi];
    const std::size_t out_last = bi > 0 ? cfg.widths[bi - 1] : cfg.widths[0];
    const std::string bn = "dec.b" + std::to_string(bi);
    emit(LayerKind::maxunpool, bn + ".unpool", static_cast<int>(bi));
    if (rrc_add) {
      emit(LayerKind::add_anchor, bn + ".rrc_add", prepool_slot[bi]);
    }
    int anchor = -1;
    std::size_t target = 0;
    if (cfg.nrc_enabled) {
      anchor = new_anchor();
      emit(LayerKind::save_anchor, bn + ".nrc_anchor", anchor);
      // the skip lands on the last unit that still has the block's width
      target = out_last == w ? cc - 1 : cc - 2;
    }
    for (std::size_t j = 0; j < cc; ++j) {
      const std::string un = bn + ".c" + std::to_string(j);
      const std::size_t cout = j + 1 == cc ? out_last : w;
      emit_conv(un, w, cout, false);
      emit_bn(un + ".bn", cout);
      if (cfg.nrc_enabled && j == target) {
        emit(LayerKind::add_anchor, bn + ".nrc_add", anchor);
      }
      emit(LayerKind::relu, un + ".relu");
    }
  }

  emit_conv("head", cfg.widths[0], cfg.num_classes, true);
  emit(LayerKind::softmax, "softmax");
  return plan;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params) total += p.value.size();
  return total;
}

const ParamEntry* ParamStore::find(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParamStore::zero_grads() {
  for (auto& p : params) {
    std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
  }
  grads_populated = false;
}

ParamStore init_params(const NetworkPlan& plan, std::uint64_t seed) {
  ParamStore store;
  Rng rng(seed);
  auto add_param = [&store](const std::string& name, Tensor4 value) {
    ParamEntry e;
    e.name = name;
    e.grad = Tensor4(value.dims[0], value.dims[1], value.dims[2],
                     value.dims[3]);
    e.momentum = e.grad;
    e.value = std::move(value);
    store.params.push_back(std::move(e));
  };
  for (const auto& l : plan.layers) {
    switch (l.kind) {
      case LayerKind::conv: {
        Tensor4 w(l.out_ch, l.in_ch, 3, 3);
        const double stddev =
            std::sqrt(2.0 / (9.0 * static_cast<double>(l.in_ch)));
        for (double& v : w.data) v = stddev * rng.next_gaussian();
        add_param(l.name + ".w", std::move(w));
        if (l.bias) {
          add_param(l.name + ".b", Tensor4(1, l.out_ch, 1, 1, 0.0));
        }
        break;
      }
      case LayerKind::batchnorm: {
        add_param(l.name + ".gamma", Tensor4(1, l.out_ch, 1, 1, 1.0));
        add_param(l.name + ".beta", Tensor4(1, l.out_ch, 1, 1, 0.0));
        store.buffers.push_back(
            {l.name + ".running_mean", Tensor4(1, l.out_ch, 1, 1, 0.0)});
        store.buffers.push_back(
            {l.name + ".running_var", Tensor4(1, l.out_ch, 1, 1, 1.0)});
        break;
      }
      default:
        break;
    }
  }
  return store;
}

std::size_t param_count(const NetworkConfig& config) {
  const NetworkPlan plan = build_network(config);
  std::size_t total = 0;
  for (const auto& l : plan.layers) {
    if (l.kind == LayerKind::conv) {
      total += 9 * l.in_ch * l.out_ch + (l.bias ? l.out_ch : 0);
    } else if (l.kind == LayerKind::batchnorm) {
      total += 2 * l.out_ch;  // gamma, beta; running stats are not trained
    }
  }
  return total;
}

namespace {

BnState bn_state_from(const ParamStore& store, const LayerDesc& l) {
  BnState st;
  st.gamma = store.params[l.param].value.data;
  st.beta = store.params[l.param + 1].value.data;
  st.running_mean = store.buffers[l.buffer].value.data;
  st.running_var = store.buffers[l.buffer + 1].value.data;
  return st;
}

void check_store(const NetworkPlan& plan, const ParamStore& store) {
  for (const auto& l : plan.layers) {
    if (l.kind == LayerKind::conv) {
      if (l.param < 0 ||
          static_cast<std::size_t>(l.param) >= store.params.size() ||
          store.params[l.param].name != l.name + ".w") {
        throw UsageError("store does not match plan at layer '" + l.name +
                         "'");
      }
    } else if (l.kind == LayerKind::batchnorm) {
      if (l.param < 0 ||
          static_cast<std::size_t>(l.param + 1) >= store.params.size() ||
          store.params[l.param].name != l.name + ".gamma" ||
          l.buffer < 0 ||
          static_cast<std::size_t>(l.buffer + 1) >= store.buffers.size()) {
        throw UsageError("store does not match plan at layer '" + l.name +
                         "'");
      }
    }
  }
}

std::span<const double> bias_span(const ParamStore& store,
                                  const LayerDesc& l) {
  if (!l.bias) return {};
  const auto& b = store.params[l.param + 1].value.data;
  return {b.data(), b.size()};
}

}  // namespace

ForwardResult forward(const NetworkPlan& plan, ParamStore& store,
                      const Tensor4& x, bool training) {
  const auto& cfg = plan.config;
  if (x.c() != cfg.in_channels || x.h() != cfg.input_size[0] ||
      x.w() != cfg.input_size[1] || x.n() == 0) {
    throw ShapeError("forward: input dims (" + std::to_string(x.n()) + "," +
                     std::to_string(x.c()) + "," + std::to_string(x.h()) +
                     "," + std::to_string(x.w()) +
                     ") do not match the network config");
  }
  check_store(plan, store);

  ForwardResult res;
  ForwardTrace& trace = res.trace;
  trace.training = training;
  trace.inputs.resize(plan.layers.size());
  trace.pool_indices.resize(plan.pool_slots);
  trace.pool_in_size.resize(plan.pool_slots);
  trace.anchors.resize(plan.anchor_slots);

  Tensor4 cur = x;
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const LayerDesc& l = plan.layers[i];
    switch (l.kind) {
      case LayerKind::conv: {
        if (training) trace.inputs[i] = cur;
        cur = conv2d_forward(cur, store.params[l.param].value,
                             bias_span(store, l));
        break;
      }
      case LayerKind::batchnorm: {
        if (training) trace.inputs[i] = cur;
        BnState st = bn_state_from(store, l);
        cur = batchnorm_forward(cur, st, training);
        if (training) {
          store.buffers[l.buffer].value.data = st.running_mean;
          store.buffers[l.buffer + 1].value.data = st.running_var;
        }
        break;
      }
      case LayerKind::relu: {
        if (training) trace.inputs[i] = cur;
        cur = relu(cur);
        break;
      }
      case LayerKind::maxpool: {
        trace.pool_in_size[l.slot] = {cur.h(), cur.w()};
        cur = maxpool2d(cur, &trace.pool_indices[l.slot]);
        break;
      }
      case LayerKind::maxunpool: {
        const auto [ph, pw] = trace.pool_in_size[l.slot];
        cur = maxunpool2d(cur, trace.pool_indices[l.slot], ph, pw);
        break;
      }
      case LayerKind::save_anchor: {
        trace.anchors[l.slot] = cur;
        break;
      }
      case LayerKind::add_anchor: {
        cur = residual_add(cur, trace.anchors[l.slot]);
        break;
      }
      case LayerKind::softmax: {
        cur = softmax_pixelwise(cur);
        if (training) trace.inputs[i] = cur;  // backward wants the probs
        break;
      }
    }
    if (!all_finite(cur)) {
      throw NumericError("forward: non-finite activation at layer '" +
                         l.name + "'");
    }
  }
  res.probs = std::move(cur);
  return res;
}

void backward(const NetworkPlan& plan, ParamStore& store,
              const ForwardTrace& trace, const Tensor4& grad_probs) {
  if (!trace.training || trace.inputs.size() != plan.layers.size()) {
    throw UsageError("backward: needs the trace of a training-mode forward");
  }
  check_store(plan, store);
  store.zero_grads();

  std::vector<Tensor4> anchor_grads(plan.anchor_slots);
  Tensor4 g = grad_probs;
  for (std::size_t i = plan.layers.size(); i-- > 0;) {
    const LayerDesc& l = plan.layers[i];
    switch (l.kind) {
      case LayerKind::conv: {
        ConvGrads cg =
            conv2d_backward(trace.inputs[i], store.params[l.param].value, g);
        auto& gw = store.params[l.param].grad.data;
        for (std::size_t k = 0; k < gw.size(); ++k) {
          gw[k] += cg.grad_w.data[k];
        }
        if (l.bias) {
          auto& gb = store.params[l.param + 1].grad.data;
          for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += cg.grad_b[k];
        }
        g = std::move(cg.grad_x);
        break;
      }
      case LayerKind::batchnorm: {
        const BnState st = bn_state_from(store, l);
        BnGrads bg = batchnorm_backward(trace.inputs[i], st, g);
        auto& gg = store.params[l.param].grad.data;
        auto& gb = store.params[l.param + 1].grad.data;
        for (std::size_t k = 0; k < gg.size(); ++k) {
          gg[k] += bg.grad_gamma[k];
          gb[k] += bg.grad_beta[k];
        }
        g = std::move(bg.grad_x);
        break;
      }
      case LayerKind::relu: {
        g = relu_backward(trace.inputs[i], g);
        break;
      }
      case LayerKind::maxpool: {
        const auto [ph, pw] = trace.pool_in_size[l.slot];
        g = maxunpool2d(g, trace.pool_indices[l.slot], ph, pw);
        break;
      }
      case LayerKind::maxunpool: {
        g = maxunpool2d_backward(g, trace.pool_indices[l.slot]);
        break;
      }
      case LayerKind::save_anchor: {
        if (!anchor_grads[l.slot].empty()) {
          g = residual_add(g, anchor_grads[l.slot]);
        }
        break;
      }
      case LayerKind::add_anchor: {
        if (anchor_grads[l.slot].empty()) {
          anchor_grads[l.slot] = g;
        } else {
          anchor_grads[l.slot] = residual_add(anchor_grads[l.slot], g);
        }
        break;
      }
      case LayerKind::softmax: {
        g = softmax_pixelwise_backward(trace.inputs[i], g);
        break;
      }
    }
  }
  store.grads_populated = true;
}

}  // namespace segtrus
