#ifndef CODELNET_NETWORK_HPP
#define CODELNET_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "codelnet/ops.hpp"
#include "codelnet/tensor.hpp"

namespace codelnet {

// One conv->relu[->maxpool] stage of a branch. Pooling stride equals the
// pool window (non-overlapping).
struct ConvStage {
    std::int64_t filters = 16;
    Window kernel{3, 3};
    Stride stride{1, 1};
    std::optional<Window> pool;
};

struct BranchSpec {
    std::vector<ConvStage> stages;
};

struct NetworkConfig {
    std::int64_t input_channels = 2; // 1 = single channel, 2 = T1C+T2
    std::int64_t canvas = 64;        // square input side
    std::vector<BranchSpec> branches;
    std::vector<std::int64_t> fc_sizes; // hidden widths before the classifier
    std::int64_t classes = 2;
    std::uint64_t init_seed = 0;
};

// Three parallel branches with first-stage kernels canvas/2, canvas/4 and
// canvas/8, one 2x2 max-pool each, and a single hidden fc layer.
NetworkConfig desk_scale_config(std::int64_t input_channels, std::int64_t canvas = 64,
                                std::int64_t filters = 16, std::vector<std::int64_t> fc_sizes = {64});

// Clinical-scale preset: 205-pixel canvas with a 128-filter 200x200 global
// branch; the mid and local branches are illustrative.
NetworkConfig full_scale_config(std::int64_t input_channels);

struct Network {
    NetworkConfig config;
    std::vector<Parameter> parameters; // deterministic order, pure function of (config, seed)

    Parameter& param(const std::string& name);
    const Parameter& param(const std::string& name) const;
    void zero_grads();
    std::int64_t parameter_count() const;
};

// Validates branch geometry (errors name the offending branch/stage) and
// initializes weights uniform on +-sqrt(6/(fan_in+fan_out)), biases zero.
Network build_network(const NetworkConfig& config);

// Spatial shape bookkeeping, exposed for tests and build validation.
struct StageShape {
    std::int64_t channels, height, width;
};
std::vector<std::vector<StageShape>> branch_shapes(const NetworkConfig& config);
std::int64_t concat_width(const NetworkConfig& config);

// Activations kept for the backward pass.
struct ForwardTrace {
    Tensor input;
    struct Stage {
        Tensor pre;    // conv output
        Tensor post;   // relu output
        Tensor pooled; // only if the stage pools
        bool has_pool = false;
    };
    std::vector<std::vector<Stage>> branches;
    std::vector<Tensor> branch_flat;
    Tensor concat;
    std::vector<Tensor> fc_pre;
    std::vector<Tensor> fc_post;
    Tensor logits;
    Tensor probs;
};

ForwardTrace forward_trace(const Network& net, const Tensor& batch);

// probabilities only; `training` is kept for interface stability and has no
// effect (no dropout / batch-norm in this architecture)
Tensor forward(const Network& net, const Tensor& batch, bool training = false);

// Accumulates parameter gradients for the mean NLL over the batch.
void backward(Network& net, ForwardTrace& trace, const std::vector<int>& labels);

struct Prediction {
    int label;
    float probability;
};

// argmax per row; ties resolve to class 0
std::vector<Prediction> predict(const Network& net, const Tensor& batch);

// Weights file: magic "CDW1", version u16, parameter count u32, then per
// parameter: name length u32, UTF-8 name, rank u32, dims u32 each, raw
// little-endian float32 data. All integers little-endian.
void save_weights(const Network& net, const std::string& path);
Network load_weights(const std::string& path, const NetworkConfig& config);

} // namespace codelnet

#endif
