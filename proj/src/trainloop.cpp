#include "odam/trainloop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace odam {

namespace {

enum Purpose : std::uint64_t { kPairs = 1, kBatches = 2, kUpdateRefs = 3 };

std::vector<double> batch_weights(const TargetState& state, std::span<const std::size_t> rows) {
    std::vector<double> w;
    w.reserve(rows.size());
    for (std::size_t r : rows) w.push_back(state.weights[r]);
    return w;
}

ReferenceSets gather_refs(const std::array<std::vector<std::size_t>, kNumClasses>& idx, const Mat& source_emb,
                          const Mat& target_emb) {
    ReferenceSets refs;
    refs.classes[0] = select_rows(source_emb, idx[0]);
    refs.classes[1] = select_rows(target_emb, idx[1]);
    refs.classes[2] = select_rows(target_emb, idx[2]);
    return refs;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(k, n));
    return all;
}

std::array<std::vector<std::size_t>, kNumClasses> draw_all_references(std::size_t n_source,
                                                                      const TargetState& state, std::size_t k,
                                                                      std::mt19937_64& rng) {
    return {sample_without_replacement(n_source, k, rng), draw_references(state, PseudoClass::Inlier, k, rng),
            draw_references(state, PseudoClass::Outlier, k, rng)};
}

}  // namespace

std::string_view mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::Siamese: return "siamese";
        case TrainMode::SiameseDA: return "siamese-da";
        case TrainMode::SiameseDAOut: return "siamese-da-out";
        case TrainMode::DAOutlierDetection: return "da-outlier-detection";
    }
    return "?";
}

std::optional<TrainMode> parse_mode(std::string_view s) {
    std::string norm(s);
    std::replace(norm.begin(), norm.end(), '_', '-');
    for (TrainMode m : {TrainMode::Siamese, TrainMode::SiameseDA, TrainMode::SiameseDAOut,
                        TrainMode::DAOutlierDetection})
        if (norm == mode_name(m)) return m;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (!(margin > 0.0)) throw std::invalid_argument("TrainConfig: margin must be positive");
    if (!(gamma >= 0.0) || !(eta >= 0.0)) throw std::invalid_argument("TrainConfig: gamma and eta must be >= 0");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
    if (pairs_per_batch < 1) throw std::invalid_argument("TrainConfig: pairs_per_batch must be >= 1");
    if (refs_per_class < 1) throw std::invalid_argument("TrainConfig: refs_per_class must be >= 1");
    if (span_exponent < 0 || !(bandwidth_factor > 1.0))
        throw std::invalid_argument("TrainConfig: invalid kernel span or factor");
    if (!(similarity_scale > 0.0)) throw std::invalid_argument("TrainConfig: similarity_scale must be positive");
    if (!(stop_tolerance >= 0.0) || patience < 1)
        throw std::invalid_argument("TrainConfig: stop tolerance must be >= 0 and patience >= 1");
    NetConfig{1, layer_dims, adapt_layers}.validate();
    if (adapt_layers < 1 && mode != TrainMode::Siamese)
        throw std::invalid_argument("TrainConfig: domain adaptation needs at least one adapted layer");
}

NetConfig TrainConfig::net_config(std::size_t input_dim) const {
    return NetConfig{input_dim, layer_dims, adapt_layers};
}

std::vector<std::size_t> TargetState::members(PseudoClass c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == c) out.push_back(i);
    return out;
}

TrainData TrainData::from_samples(std::span<const LabeledSample> source, std::span<const LabeledSample> target) {
    if (source.empty() || target.empty()) throw std::invalid_argument("TrainData: empty source or target set");
    TrainData d;
    d.source = feature_matrix(source);
    d.target = feature_matrix(target);
    if (d.source.cols() != d.target.cols())
        throw std::invalid_argument("TrainData: source and target feature dimensions differ");
    for (const LabeledSample& s : source) d.source_ids.push_back(s.identity);
    return d;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t epoch, std::uint64_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(purpose)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------

TargetState init_target_state(const Mat& source, const Mat& target) {
    if (source.rows() == 0 || target.rows() == 0)
        throw std::invalid_argument("init_target_state: empty source or target set");
    if (source.cols() != target.cols()) throw std::invalid_argument("init_target_state: dimension mismatch");
    const std::size_t n = target.rows();
    std::vector<double> mean_dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < source.rows(); ++j) s += std::sqrt(squared_distance(target.row(i), source.row(j)));
        mean_dist[i] = s / static_cast<double>(source.rows());
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean_dist[a] < mean_dist[b]; });

    TargetState st;
    st.weights.assign(n, 0.0);
    st.classes.assign(n, PseudoClass::Inlier);
    st.probs = Mat(n, kNumClasses);
    const std::size_t inliers = (n + 1) / 2;
    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t i = order[rank];
        const bool in = rank < inliers;
        st.weights[i] = in ? 0.7 : 0.3;
        st.classes[i] = in ? PseudoClass::Inlier : PseudoClass::Outlier;
        st.probs(i, 1) = in ? 0.7 : 0.3;
        st.probs(i, 2) = in ? 0.3 : 0.7;
    }
    return st;
}

TargetState unit_target_state(std::size_t n_targets) {
    TargetState st;
    st.weights.assign(n_targets, 1.0);
    st.classes.assign(n_targets, PseudoClass::Inlier);
    st.probs = Mat(n_targets, kNumClasses);
    for (std::size_t i = 0; i < n_targets; ++i) st.probs(i, 1) = 1.0;
    return st;
}

std::vector<SourcePair> make_source_pairs(std::span<const int> identities, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> by_id;
    std::vector<int> labels(identities.begin(), identities.end());
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    by_id.resize(labels.size());
    auto slot = [&](int id) {
        return static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), id) - labels.begin());
    };
    for (std::size_t i = 0; i < identities.size(); ++i) by_id[slot(identities[i])].push_back(i);

    std::vector<std::size_t> order(identities.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<SourcePair> pairs;
    const std::size_t n = identities.size();
    for (std::size_t i : order) {
        const auto& same = by_id[slot(identities[i])];
        if (same.size() >= 2) {
            std::uniform_int_distribution<std::size_t> pick(0, same.size() - 2);
            std::size_t j = same[pick(rng)];
            if (j == i) j = same.back();
            pairs.push_back({i, j, 1});
        }
        if (same.size() < n) {
            std::uniform_int_distribution<std::size_t> pick(0, n - same.size() - 1);
            // k-th source row outside identities[i]
            std::size_t k = pick(rng);
            std::size_t j = 0;
            for (;; ++j) {
                if (identities[j] == identities[i]) continue;
                if (k-- == 0) break;
            }
            pairs.push_back({i, j, 0});
        }
    }
    return pairs;
}

std::vector<std::size_t> draw_references(const TargetState& state, PseudoClass cls, std::size_t k,
                                         std::mt19937_64& rng) {
    std::vector<std::size_t> members = state.members(cls);
    if (members.empty()) {
        std::vector<std::size_t> order(state.weights.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return cls == PseudoClass::Inlier ? state.weights[a] > state.weights[b]
                                              : state.weights[a] < state.weights[b];
        });
        order.resize(std::min(k, order.size()));
        return order;
    }
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(std::min(k, members.size()));
    return members;
}

std::vector<Batch> make_batches(std::span<const SourcePair> pairs, std::size_t n_source, std::size_t n_targets,
                                const TargetState& state, const TrainConfig& config, std::uint64_t epoch_seed) {
    if (state.weights.size() != n_targets) throw std::invalid_argument("make_batches: state does not match targets");
    std::mt19937_64 rng(epoch_seed);
    std::vector<SourcePair> match, nonmatch;
    for (const SourcePair& p : pairs) (p.label == 1 ? match : nonmatch).push_back(p);
    std::shuffle(match.begin(), match.end(), rng);
    std::shuffle(nonmatch.begin(), nonmatch.end(), rng);

    const std::size_t np = config.pairs_per_batch;
    const std::size_t count = std::min(match.size(), nonmatch.size()) / np;
    if (count == 0 || n_targets == 0)
        throw std::invalid_argument("make_batches: not enough matching/unmatching pairs for one batch of " +
                                    std::to_string(np));

    std::vector<std::size_t> stream;
    const std::size_t needed = count * 2 * np;
    std::vector<std::size_t> perm(n_targets);
    while (stream.size() < needed) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        stream.insert(stream.end(), perm.begin(), perm.end());
    }

    std::vector<Batch> batches(count);
    for (std::size_t b = 0; b < count; ++b) {
        Batch& batch = batches[b];
        for (std::size_t i = 0; i < np; ++i) {
            batch.pairs.push_back(match[b * np + i]);
            batch.pairs.push_back(nonmatch[b * np + i]);
        }
        batch.targets.assign(stream.begin() + static_cast<std::ptrdiff_t>(b * 2 * np),
                             stream.begin() + static_cast<std::ptrdiff_t>((b + 1) * 2 * np));
        batch.refs = draw_all_references(n_source, state, config.refs_per_class, rng);
    }
    return batches;
}

// ---------------------------------------------------------------------------

BatchLoss batch_objective(const NetParams& params, const TrainData& data, const Batch& batch,
                          const TargetState& state, const TrainConfig& config, const KernelBank& bank,
                          const Mat& source_emb, const Mat& target_emb, std::vector<Mat>* grads) {
    std::vector<std::size_t> lefts, rights;
    std::vector<int> labels;
    for (const SourcePair& p : batch.pairs) {
        lefts.push_back(p.left);
        rights.push_back(p.right);
        labels.push_back(p.label);
    }

    Graph g;
    const NetVars vars = bind_params(g, params);
    g.set_scope("contrastive");
    const auto left = forward_layers(g, vars, g.input(select_rows(data.source, lefts), "source_left"));
    const auto right = forward_layers(g, vars, g.input(select_rows(data.source, rights), "source_right"));
    const Var contrastive = contrastive_loss(g, left.back(), right.back(), labels, config.margin);

    std::optional<Var> mmd;
    std::optional<Var> entropy;
    if (config.mode != TrainMode::Siamese) {
        g.set_scope("mmd");
        const auto target = forward_layers(g, vars, g.input(select_rows(data.target, batch.targets), "target"));
        if (config.mode == TrainMode::DAOutlierDetection) {
            const auto w = batch_weights(state, batch.targets);
            mmd = multilayer_mkmmd(g, left, target, bank, config.adapt_layers, std::span<const double>(w));
            g.set_scope("entropy");
            const ReferenceSets refs = gather_refs(batch.refs, source_emb, target_emb);
            entropy = entropy_loss(g, class_probabilities(g, target.back(), refs, config.normalize_similarity, config.similarity_scale));
        } else {
            mmd = multilayer_mkmmd(g, left, target, bank, config.adapt_layers);
        }
    }
    g.set_scope("objective");
    const Var total = overall_objective(g, contrastive, mmd, entropy, config.gamma, config.eta);
    g.set_output(total);

    BatchLoss out;
    out.total = g.forward();
    out.contrastive = g.value(contrastive)[0];
    if (mmd) out.mmd = g.value(*mmd)[0];
    if (entropy) out.entropy = g.value(*entropy)[0];
    if (grads) {
        g.backward();
        *grads = param_grads(g, vars);
    }
    return out;
}

EpochRecord train_epoch(NetParams& params, const TrainData& data, std::span<const Batch> batches,
                        const TargetState& state, const TrainConfig& config, const KernelBank& bank) {
    EpochRecord rec;
    rec.epoch = state.epoch + 1;
    if (batches.empty()) return rec;
    const Mat source_emb = embed(params, data.source);
    const Mat target_emb = embed(params, data.target);

    std::vector<Mat> grads;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        BatchLoss loss;
        try {
            loss = batch_objective(params, data, batches[b], state, config, bank, source_emb, target_emb, &grads);
        } catch (const GraphError& e) {
            throw TrainError("epoch " + std::to_string(rec.epoch) + ", batch " + std::to_string(b) + ": " + e.what());
        }
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            auto step = [&](Mat& p, const Mat& g) {
                for (std::size_t i = 0; i < p.size(); ++i) p[i] -= config.learning_rate * g[i];
            };
            step(params.layers[l].weight, grads[2 * l]);
            step(params.layers[l].bias, grads[2 * l + 1]);
        }
        rec.contrastive += loss.contrastive;
        rec.mmd += loss.mmd;
        rec.entropy += loss.entropy;
    }
    const auto n = static_cast<double>(batches.size());
    rec.contrastive /= n;
    rec.mmd /= n;
    rec.entropy /= n;
    return rec;
}

TargetState update_target_state(const NetParams& params, const TrainData& data, const TargetState& state,
                                const TrainConfig& config, std::uint64_t epoch_seed) {
    std::mt19937_64 rng(epoch_seed);
    const Mat source_emb = embed(params, data.source);
    const Mat target_emb = embed(params, data.target);
    const auto idx = draw_all_references(data.source.rows(), state, config.refs_per_class, rng);
    const Mat probs = class_probabilities(target_emb, gather_refs(idx, source_emb, target_emb),
                                          config.normalize_similarity, config.similarity_scale);
    const TargetWeights tw = target_weights(probs);

    TargetState next;
    next.probs = probs;
    next.weights = tw.weights;
    next.epoch = state.epoch + 1;
    next.classes.reserve(tw.decisions.size());
    for (RefClass d : tw.decisions)
        next.classes.push_back(d == RefClass::PseudoOutlier ? PseudoClass::Outlier : PseudoClass::Inlier);
    return next;
}

double mean_weight_change(const TargetState& before, const TargetState& after) {
    if (before.weights.size() != after.weights.size() || before.weights.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < before.weights.size(); ++i) s += std::abs(after.weights[i] - before.weights[i]);
    return s / static_cast<double>(before.weights.size());
}

TrainReport run_training(const TrainData& data, const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (data.source_ids.size() != data.source.rows())
        throw std::invalid_argument("run_training: source identities do not match source rows");

    TrainReport report;
    report.params = init_params(config.net_config(data.source.cols()), config.seed);

    Mat all(data.source.rows() + data.target.rows(), data.source.cols());
    std::copy(data.source.data().begin(), data.source.data().end(), all.data().begin());
    std::copy(data.target.data().begin(), data.target.data().end(),
              all.data().begin() + static_cast<std::ptrdiff_t>(data.source.size()));
    report.bandwidth = median_bandwidth(all);
    const KernelBank bank = build_bank(report.bandwidth, config.span_exponent, config.bandwidth_factor);

    const bool reweight = config.mode == TrainMode::DAOutlierDetection;
    TargetState state = reweight ? init_target_state(data.source, data.target) : unit_target_state(data.target.rows());
    report.initial_state = state;

    std::size_t calm_epochs = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const auto pairs = make_source_pairs(data.source_ids, derive_seed(config.seed, epoch, kPairs));
        const auto batches = make_batches(pairs, data.source.rows(), data.target.rows(), state, config,
                                          derive_seed(config.seed, epoch, kBatches));
        EpochRecord rec = train_epoch(report.params, data, batches, state, config, bank);
        rec.epoch = epoch;

        if (reweight) {
            TargetState next =
                update_target_state(report.params, data, state, config, derive_seed(config.seed, epoch, kUpdateRefs));
            rec.mean_weight_change = mean_weight_change(state, next);
            state = std::move(next);
        } else {
            state.epoch = epoch;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec, state);

        if (reweight) {
            calm_epochs = rec.mean_weight_change < config.stop_tolerance ? calm_epochs + 1 : 0;
            if (calm_epochs >= config.patience) {
                report.converged = true;
                break;
            }
        }
    }
    report.final_state = std::move(state);
    return report;
}

}  // namespace odam
