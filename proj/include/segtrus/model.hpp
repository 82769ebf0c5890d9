#ifndef SEGTRUS_MODEL_HPP_
#define SEGTRUS_MODEL_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segtrus/kernels.hpp"
#include "segtrus/tensor.hpp"

namespace segtrus {

enum class RrcMode { indices, indices_plus_add };

std::string to_string(RrcMode mode);
RrcMode rrc_mode_from_string(const std::string& s);

// Declarative VGG19RSeg architecture. Defaults are the canonical encoder:
// five blocks of widths 64/128/256/512/512 with 2/2/4/4/4 conv layers,
// one input channel, 224x224 images, two output classes.
struct NetworkConfig {
  std::size_t in_channels = 1;
  std::array<std::size_t, 2> input_size{224, 224};  // (H, W)
  std::vector<std::size_t> widths{64, 128, 256, 512, 512};
  std::vector<std::size_t> conv_counts{2, 2, 4, 4, 4};
  bool nrc_enabled = true;
  RrcMode rrc_mode = RrcMode::indices;
  std::size_t num_classes = 2;

  std::size_t blocks() const { return widths.size(); }
  void validate() const;  // throws UsageError

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

std::string to_json(const NetworkConfig& config);
NetworkConfig config_from_json(const std::string& text);

enum class LayerKind {
  conv,
  batchnorm,
  relu,
  maxpool,
  maxunpool,
  save_anchor,  // snapshot the running activation into an anchor slot
  add_anchor,   // residual_add the slot's snapshot onto the running activation
  softmax,
};

struct LayerDesc {
  LayerKind kind;
  std::string name;
  int param = -1;   // ParamStore index of the weight (conv) / gamma (bn)
  int buffer = -1;  // ParamStore buffer index of running_mean (bn)
  int slot = -1;    // pool slot (pool/unpool) or anchor slot (save/add)
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  bool bias = false;  // head conv only
};

// Ordered layer graph produced by build_network. forward/backward interpret
// it; tests inspect it.
struct NetworkPlan {
  NetworkConfig config;
  std::vector<LayerDesc> layers;
  std::size_t pool_slots = 0;
  std::size_t anchor_slots = 0;

  const LayerDesc* find_layer(const std::string& name) const;
  int layer_index(const std::string& name) const;  // -1 when absent
};

NetworkPlan build_network(const NetworkConfig& config);

struct ParamEntry {
  std::string name;
  Tensor4 value;
  Tensor4 grad;
  Tensor4 momentum;
};

struct BufferEntry {
  std::string name;
  Tensor4 value;
};

// Ordered trainable parameters with parallel gradient/momentum buffers, plus
// the non-trainable BN running statistics. Iteration order is fixed by the
// plan and identical across runs.
struct ParamStore {
  std::vector<ParamEntry> params;
  std::vector<BufferEntry> buffers;
  bool grads_populated = false;

  std::size_t scalar_count() const;  // trainable scalars only
  const ParamEntry* find(const std::string& name) const;
  void zero_grads();
};

// He-initialized conv weights, gamma 1, beta 0, running mean 0 / var 1.
ParamStore init_params(const NetworkPlan& plan, std::uint64_t seed);

// Trainable scalar count from the config alone.
std::size_t param_count(const NetworkConfig& config);

// Everything backward needs from a training-mode forward: per-layer input
// caches, pooling index maps, and anchor snapshots.
struct ForwardTrace {
  bool training = false;
  std::vector<Tensor4> inputs;  // one per plan layer (empty where unused)
  std::vector<IndexMap4> pool_indices;
  std::vector<std::array<std::size_t, 2>> pool_in_size;
  std::vector<Tensor4> anchors;
};

struct ForwardResult {
  Tensor4 probs;
  ForwardTrace trace;
};

// Runs the plan. Training mode fills the trace and updates BN running
// statistics; inference mode touches nothing in the store.
ForwardResult forward(const NetworkPlan& plan, ParamStore& store,
                      const Tensor4& x, bool training);

// Fills every gradient buffer from a training-mode trace. Parameter values
// are not modified.
void backward(const NetworkPlan& plan, ParamStore& store,
              const ForwardTrace& trace, const Tensor4& grad_probs);

}  // namespace segtrus

#endif  // SEGTRUS_MODEL_HPP_
