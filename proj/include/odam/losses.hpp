#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "odam/kernels.hpp"
#include "odam/ndcore.hpp"

namespace odam {

inline constexpr std::size_t kNumClasses = 3;

/// Reference class index: source, pseudo-inlier, pseudo-outlier.
enum class RefClass : int { Source = 0, PseudoInlier = 1, PseudoOutlier = 2 };

/// Embeddings of the three reference classes. Treated as constants.
struct ReferenceSets {
    std::array<Mat, kNumClasses> classes;
};

/// Mean over pairs of 1/2 y D^2 + 1/2 (1-y) max(0, m - D)^2 with
/// D = |left_i - right_i|.
Var contrastive_loss(Graph& g, Var left, Var right, std::span<const int> labels, double margin);

/// Paired-quadruple linear-time MK-MMD estimator over n (even) rows:
/// sum_m beta_m (2/n) sum_i w_{2i-1} w_{2i} h_m(z_i). Without weights every
/// product is 1. Weights are constants.
Var mkmmd_batch(Graph& g, Var source, Var target, const KernelBank& bank,
                std::optional<std::span<const double>> weights = std::nullopt);

inline Var weighted_mkmmd_batch(Graph& g, Var source, Var target, std::span<const double> weights,
                                const KernelBank& bank) {
    return mkmmd_batch(g, source, target, bank, weights);
}

/// Sum of the estimator over the last `adapt_layers` layers.
Var multilayer_mkmmd(Graph& g, std::span<const Var> source_layers, std::span<const Var> target_layers,
                     const KernelBank& bank, std::size_t adapt_layers,
                     std::optional<std::span<const double>> weights = std::nullopt);

/// n x 3 class probabilities of each target row against the reference sets,
/// evaluated with log-sum-exp. With `normalize`, targets and references are
/// L2-normalized before inner products. Inner products are multiplied by
/// `scale` before the softmax.
Var class_probabilities(Graph& g, Var target, const ReferenceSets& refs, bool normalize, double scale = 1.0);

/// Plain-value version of class_probabilities.
Mat class_probabilities(const Mat& target, const ReferenceSets& refs, bool normalize, double scale = 1.0);

/// -(1/n) sum_i sum_c p_ic log p_ic, with 0 log 0 = 0.
Var entropy_loss(Graph& g, Var probs);

struct TargetWeights {
    std::vector<double> weights;
    std::vector<RefClass> decisions;
};

/// Inlier weight per row: (p1 + p2) / sum when the argmax is the source
/// class, p2 / sum otherwise. Ties go to the lower class index.
TargetWeights target_weights(const Mat& probs);

/// contrastive + gamma * mmd + eta * entropy; absent terms are skipped.
Var overall_objective(Graph& g, Var contrastive, std::optional<Var> mmd, std::optional<Var> entropy,
                      double gamma, double eta);

}  // namespace odam
