#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "odam/embednet.hpp"
#include "odam/kernels.hpp"
#include "odam/losses.hpp"
#include "odam/synthdata.hpp"

namespace odam {

/// siamese: contrastive only. siamese_da / siamese_da_out: contrastive plus
/// unweighted MK-MMD (the two differ only in the data they are given).
/// da_outlier_detection: contrastive, weighted MK-MMD and entropy, with the
/// target weights re-estimated after every epoch.
enum class TrainMode { Siamese, SiameseDA, SiameseDAOut, DAOutlierDetection };

std::string_view mode_name(TrainMode mode);
/// Accepts both `siamese_da` and `siamese-da` spellings.
std::optional<TrainMode> parse_mode(std::string_view s);

struct TrainConfig {
    TrainMode mode = TrainMode::DAOutlierDetection;
    double margin = 1.0;
    double gamma = 0.5;
    double eta = 0.1;
    double learning_rate = 1e-2;
    std::size_t epochs = 50;
    std::size_t pairs_per_batch = 32;  // n_p matching + n_p unmatching pairs per batch
    std::size_t refs_per_class = 16;   // K
    int span_exponent = 8;
    double bandwidth_factor = 2.0;
    std::vector<std::size_t> layer_dims{64, 64, 32};
    std::size_t adapt_layers = 3;
    bool normalize_similarity = true;
    double similarity_scale = 1.0;  // multiplies inner products in the class softmax
    std::uint64_t seed = 1;
    double stop_tolerance = 1e-3;  // on mean |delta w|
    std::size_t patience = 3;

    void validate() const;
    NetConfig net_config(std::size_t input_dim) const;
};

enum class PseudoClass { Inlier, Outlier };

struct TargetState {
    std::vector<double> weights;
    Mat probs;  // n_t x 3
    std::vector<PseudoClass> classes;
    std::size_t epoch = 0;

    std::vector<std::size_t> members(PseudoClass c) const;
    friend bool operator==(const TargetState&, const TargetState&) = default;
};

/// Feature matrices plus source identities; target labels never enter training.
struct TrainData {
    Mat source;
    std::vector<int> source_ids;
    Mat target;

    static TrainData from_samples(std::span<const LabeledSample> source, std::span<const LabeledSample> target);
};

struct SourcePair {
    std::size_t left = 0;
    std::size_t right = 0;
    int label = 0;  // 1 matching, 0 unmatching
};

struct Batch {
    std::vector<SourcePair> pairs;        // interleaved matching / unmatching
    std::vector<std::size_t> targets;     // 2 * n_p target rows
    std::array<std::vector<std::size_t>, kNumClasses> refs;  // [0] source rows, [1], [2] target rows
};

struct EpochRecord {
    std::size_t epoch = 0;
    double contrastive = 0.0;
    double mmd = 0.0;
    double entropy = 0.0;
    double mean_weight_change = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    TargetState initial_state;
    TargetState final_state;
    NetParams params;
    double bandwidth = 0.0;
    bool converged = false;
};

/// Raised when a loss term turns non-finite; the message names the term.
class TrainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sorts targets by mean Euclidean distance to all source rows (stable);
/// the nearer half (ceil) becomes pseudo-inlier with w = 0.7, the rest
/// pseudo-outlier with w = 0.3.
TargetState init_target_state(const Mat& source, const Mat& target);

/// Every target weight 1 and pseudo-inlier; used by modes without reweighting.
TargetState unit_target_state(std::size_t n_targets);

/// One matching and one unmatching partner for every source row, in a
/// seed-determined order.
std::vector<SourcePair> make_source_pairs(std::span<const int> identities, std::uint64_t seed);

/// Targets are drawn without replacement, reshuffling after each full pass.
std::vector<Batch> make_batches(std::span<const SourcePair> pairs, std::size_t n_source, std::size_t n_targets,
                                const TargetState& state, const TrainConfig& config, std::uint64_t epoch_seed);

/// Reference rows for one class given the current state; K is clamped to the
/// set size, and an empty set falls back to the K most extreme weights.
std::vector<std::size_t> draw_references(const TargetState& state, PseudoClass cls, std::size_t k,
                                         std::mt19937_64& rng);

/// Loss components of one batch at the current parameters.
struct BatchLoss {
    double total = 0.0;
    double contrastive = 0.0;
    double mmd = 0.0;
    double entropy = 0.0;
};

/// Builds the batch objective for `config.mode`, evaluates it and, when
/// `grads` is given, fills it with parameter gradients (weight, bias per layer).
/// `source_emb`/`target_emb` are frozen embeddings used for references.
BatchLoss batch_objective(const NetParams& params, const TrainData& data, const Batch& batch,
                          const TargetState& state, const TrainConfig& config, const KernelBank& bank,
                          const Mat& source_emb, const Mat& target_emb, std::vector<Mat>* grads = nullptr);

/// One SGD step per batch. Weights and reference embeddings stay fixed for
/// the epoch. Throws TrainError on a non-finite term.
EpochRecord train_epoch(NetParams& params, const TrainData& data, std::span<const Batch> batches,
                        const TargetState& state, const TrainConfig& config, const KernelBank& bank);

/// Re-estimates probabilities, weights and pseudo classes for every target.
TargetState update_target_state(const NetParams& params, const TrainData& data, const TargetState& state,
                                const TrainConfig& config, std::uint64_t epoch_seed);

double mean_weight_change(const TargetState& before, const TargetState& after);

/// Called after every epoch with the record and the state that the next epoch uses.
using EpochCallback = std::function<void(const EpochRecord&, const TargetState&)>;

TrainReport run_training(const TrainData& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Deterministic sub-seed for a (seed, epoch, purpose) triple.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t purpose);

}  // namespace odam
