#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "odam/ndcore.hpp"

namespace odam {

/// Multilayer perceptron shape. The last `adapt_layer_count` layers are the
/// ones whose activations enter the domain discrepancy term.
struct NetConfig {
    std::size_t input_dim = 2;
    std::vector<std::size_t> layer_dims{64, 64, 32};
    std::size_t adapt_layer_count = 3;

    std::size_t layer_count() const { return layer_dims.size(); }
    void validate() const;
    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct Layer {
    Mat weight;  // fan_in x fan_out
    Mat bias;    // 1 x fan_out
    friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetParams {
    NetConfig config;
    std::vector<Layer> layers;
    friend bool operator==(const NetParams&, const NetParams&) = default;
};

/// Activations of every layer for one batch; back() is the embedding.
using LayerOutputs = std::vector<Mat>;

/// Glorot-uniform weights, zero biases. Deterministic per seed.
NetParams init_params(const NetConfig& config, std::uint64_t seed);

/// Affine + rectifier for every layer but the last, which is affine only.
LayerOutputs forward_layers(const NetParams& params, const Mat& batch);

inline Mat embed(const NetParams& params, const Mat& batch) { return forward_layers(params, batch).back(); }

/// Parameter leaves of one network registered in a graph.
struct NetVars {
    std::vector<Var> weights;
    std::vector<Var> biases;
};

NetVars bind_params(Graph& g, const NetParams& params);

/// Graph counterpart of forward_layers; one Var per layer.
std::vector<Var> forward_layers(Graph& g, const NetVars& vars, Var batch);

/// Gradients of every parameter leaf after Graph::backward, in layer order
/// (weight, bias, weight, bias, ...).
std::vector<Mat> param_grads(const Graph& g, const NetVars& vars);

// -- checkpoint ------------------------------------------------------------

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
};

/// Text checkpoint:
///   odam-ckpt-v1
///   input_dim <d>
///   layers <n> <dim_1> ... <dim_n>
///   adapt <L>
///   seed <s>
///   epoch <e>
///   then per layer: `weight <rows> <cols>` + one line per row,
///                   `bias 1 <cols>` + one line.
/// Reals use shortest round-trip decimal formatting.
void write_checkpoint(const NetParams& params, const CheckpointMeta& meta, const std::filesystem::path& path);
NetParams read_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace odam
