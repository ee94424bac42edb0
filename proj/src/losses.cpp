#include "odam/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace odam {

Var contrastive_loss(Graph& g, Var left, Var right, std::span<const int> labels, double margin) {
    if (!(margin > 0.0)) throw std::invalid_argument("contrastive_loss: margin must be positive");
    const std::size_t n = labels.size();
    if (n == 0) throw std::invalid_argument("contrastive_loss: empty batch");
    if (g.value(left).rows() != n || g.value(right).rows() != n || !g.value(left).same_shape(g.value(right)))
        throw std::invalid_argument("contrastive_loss: left/right/labels row counts differ");

    Mat match(n, 1);
    Mat nonmatch(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw std::invalid_argument("contrastive_loss: label " + std::to_string(labels[i]) + " is not 0/1");
        match[i] = labels[i];
        nonmatch[i] = 1 - labels[i];
    }
    const Var ymask = g.input(std::move(match), "match_mask");
    const Var nmask = g.input(std::move(nonmatch), "nonmatch_mask");

    const Var d2 = g.row_sum(g.square(g.sub(left, right)));
    const Var pull = g.mul(d2, ymask);
    const Var hinge = g.relu(g.affine(g.sqrt(d2), -1.0, margin));
    const Var push = g.mul(g.square(hinge), nmask);
    return g.scale(g.mean_rows(g.add(pull, push)), 0.5);
}

Var mkmmd_batch(Graph& g, Var source, Var target, const KernelBank& bank,
                std::optional<std::span<const double>> weights) {
    const Mat& s = g.value(source);
    const Mat& t = g.value(target);
    const std::size_t n = s.rows();
    if (n == 0 || n % 2 != 0) throw std::invalid_argument("mkmmd_batch: row count must be even and positive");
    if (t.rows() != n) throw std::invalid_argument("mkmmd_batch: source and target row counts differ");
    if (s.cols() != t.cols()) throw std::invalid_argument("mkmmd_batch: embedding widths differ");
    if (bank.size() == 0 || bank.weights.size() != bank.size())
        throw std::invalid_argument("mkmmd_batch: empty or inconsistent kernel bank");

    std::vector<std::size_t> odd, even;
    for (std::size_t i = 0; i < n; i += 2) {
        odd.push_back(i);
        even.push_back(i + 1);
    }
    const Var s1 = g.gather_rows(source, odd);
    const Var s2 = g.gather_rows(source, even);
    const Var t1 = g.gather_rows(target, odd);
    const Var t2 = g.gather_rows(target, even);
    auto sqdist = [&](Var a, Var b) { return g.row_sum(g.square(g.sub(a, b))); };
    auto k = [&](Var a, Var b) { return g.kernel_mix(sqdist(a, b), bank.bandwidths, bank.weights); };

    // h(z_i) = k(s1, s2) + k(t1, t2) - k(s1, t2) - k(s2, t1), mixed over kernels
    Var h = g.sub(g.sub(g.add(k(s1, s2), k(t1, t2)), k(s1, t2)), k(s2, t1));

    if (weights) {
        const auto w = *weights;
        if (w.size() != n) throw std::invalid_argument("weighted_mkmmd_batch: need one weight per target row");
        Mat pair_w(n / 2, 1);
        for (std::size_t i = 0; i < n; ++i)
            if (!(w[i] >= 0.0 && w[i] <= 1.0))
                throw std::invalid_argument("weighted_mkmmd_batch: weight " + std::to_string(w[i]) +
                                            " outside [0, 1]");
        for (std::size_t i = 0; i < n / 2; ++i) pair_w[i] = w[2 * i] * w[2 * i + 1];
        h = g.mul(h, g.input(std::move(pair_w), "pair_weights"));
    }
    return g.mean_rows(h);
}

Var multilayer_mkmmd(Graph& g, std::span<const Var> source_layers, std::span<const Var> target_layers,
                     const KernelBank& bank, std::size_t adapt_layers,
                     std::optional<std::span<const double>> weights) {
    if (source_layers.size() != target_layers.size())
        throw std::invalid_argument("multilayer_mkmmd: source and target layer counts differ");
    if (adapt_layers == 0 || adapt_layers > source_layers.size())
        throw std::invalid_argument("multilayer_mkmmd: adapt layer count out of range");
    const std::size_t first = source_layers.size() - adapt_layers;
    Var total = mkmmd_batch(g, source_layers[first], target_layers[first], bank, weights);
    for (std::size_t l = first + 1; l < source_layers.size(); ++l)
        total = g.add(total, mkmmd_batch(g, source_layers[l], target_layers[l], bank, weights));
    return total;
}

namespace {

Mat normalized_rows(const Mat& m) {
    Mat out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (double x : m.row(r)) s += x * x;
        const double norm = std::max(std::sqrt(s), 1e-12);
        for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c) / norm;
    }
    return out;
}

}  // namespace

Var class_probabilities(Graph& g, Var target, const ReferenceSets& refs, bool normalize, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("class_probabilities: scale must be positive");
    const std::size_t dim = g.value(target).cols();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (refs.classes[c].rows() == 0)
            throw std::invalid_argument("class_probabilities: reference class " + std::to_string(c + 1) +
                                        " is empty");
        if (refs.classes[c].cols() != dim)
            throw std::invalid_argument("class_probabilities: reference width does not match embeddings");
    }
    const Var u = normalize ? g.normalize_rows(target) : target;
    std::vector<Var> per_class;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        Mat r = normalize ? normalized_rows(refs.classes[c]) : refs.classes[c];
        const Var rt = g.input(r.transposed(), "refs" + std::to_string(c + 1));
        const Var logits = scale == 1.0 ? g.matmul(u, rt) : g.scale(g.matmul(u, rt), scale);
        per_class.push_back(g.row_logsumexp(logits));
    }
    const Var scores = g.hconcat(per_class);
    return g.exp(g.sub_col(scores, g.row_logsumexp(scores)));
}

Mat class_probabilities(const Mat& target, const ReferenceSets& refs, bool normalize, double scale) {
    Graph g;
    const Var p = class_probabilities(g, g.input(target), refs, normalize, scale);
    return g.value(p);
}

Var entropy_loss(Graph& g, Var probs) {
    return g.scale(g.mean_rows(g.xlogx(probs)), -1.0);
}

TargetWeights target_weights(const Mat& probs) {
    if (probs.cols() != kNumClasses) throw std::invalid_argument("target_weights: expected 3 columns");
    TargetWeights out;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const double p1 = probs(i, 0);
        const double p2 = probs(i, 1);
        const double p3 = probs(i, 2);
        RefClass decision = RefClass::Source;
        double best = p1;
        if (p2 > best) {
            decision = RefClass::PseudoInlier;
            best = p2;
        }
        if (p3 > best) decision = RefClass::PseudoOutlier;
        const double total = p1 + p2 + p3;
        const double w = decision == RefClass::Source ? (p1 + p2) / total : p2 / total;
        out.weights.push_back(std::clamp(w, 0.0, 1.0));
        out.decisions.push_back(decision);
    }
    return out;
}

Var overall_objective(Graph& g, Var contrastive, std::optional<Var> mmd, std::optional<Var> entropy,
                      double gamma, double eta) {
    if (!(gamma >= 0.0) || !(eta >= 0.0))
        throw std::invalid_argument("overall_objective: gamma and eta must be nonnegative");
    Var total = contrastive;
    if (mmd) total = g.add(total, g.scale(*mmd, gamma));
    if (entropy) total = g.add(total, g.scale(*entropy, eta));
    return total;
}

}  // namespace odam
