// SPDX-License-Identifier: Apache-2.0
#include "rff/finetune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "rff/metrics.hpp"
#include "rff/simsiam.hpp"

namespace rff {

void FinetuneConfig::validate() const {
    if (batch_size < 2) throw ConfigError("finetune: batch_size must be >= 2");
    if (val_batch < 1) throw ConfigError("finetune: val_batch must be >= 1");
    if (patience < 1) throw ConfigError("finetune: patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("finetune: max_epochs must be >= 1");
    if (labels_per_device == 0 && (label_fraction <= 0.0 || label_fraction >= 1.0))
        throw ConfigError("finetune: label_fraction must be in (0, 1)");
    if (snr_hi < snr_lo) throw ConfigError("finetune: SNR range reversed");
}

std::pair<std::vector<int>, std::vector<int>> split_labeled(
    const std::vector<ReceivedFrame>& dataset, double fraction, int labels_per_device,
    std::uint64_t seed) {
    std::map<int, std::vector<int>> by_device;
    for (int i = 0; i < int(dataset.size()); ++i)
        by_device[dataset[std::size_t(i)].device_id].push_back(i);

    std::vector<int> labeled, rest;
    for (auto& [device, idx] : by_device) {
        Rng rng(derive_seed(seed, 0x51u + std::uint64_t(device)));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[std::size_t(rng.uniform_int(0, std::int64_t(i) - 1))]);
        const int take = labels_per_device > 0
                             ? labels_per_device
                             : int(std::lround(fraction * double(idx.size())));
        if (take < 1 || take >= int(idx.size()))
            throw ConfigError("split_labeled: split leaves a device without data");
        labeled.insert(labeled.end(), idx.begin(), idx.begin() + take);
        rest.insert(rest.end(), idx.begin() + take, idx.end());
    }
    std::sort(labeled.begin(), labeled.end());
    std::sort(rest.begin(), rest.end());
    return {std::move(labeled), std::move(rest)};
}

namespace {

// LS and MMSE expansion of the labeled packets with fresh noise draws.
std::vector<EqualizedSample> expand_labeled(const std::vector<ReceivedFrame>& packets,
                                            const std::vector<int>& indices,
                                            const MmseStatistics& stats, const FinetuneConfig& cfg,
                                            std::uint64_t epoch_tag) {
    std::vector<EqualizedSample> out(indices.size() * 2);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(indices.size()); ++i) {
        const auto& packet = packets[std::size_t(indices[std::size_t(i)])];
        Rng rng(derive_seed(cfg.seed, epoch_tag * 0x10000000ULL + std::uint64_t(i)));
        const int snr1 = int(rng.uniform_int(cfg.snr_lo, cfg.snr_hi));
        const int snr2 = int(rng.uniform_int(cfg.snr_lo, cfg.snr_hi));
        out[std::size_t(2 * i)] = augment_view(packet, stats, EstimatorKind::ls, snr1, 0.0, rng);
        out[std::size_t(2 * i + 1)] =
            augment_view(packet, stats, EstimatorKind::mmse, snr2, 0.0, rng);
    }
    return out;
}

std::vector<int> predict_from_probs(const std::vector<float>& probs, int n, int c) {
    std::vector<int> preds(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        preds[std::size_t(i)] = argmax_lowest(probs.data() + std::size_t(i) * c, c);
    return preds;
}

}  // namespace

std::vector<float> fuse_equal_weights(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) throw ShapeError("fuse_equal_weights: length mismatch");
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5f * a[i] + 0.5f * b[i];
    return out;
}

int argmax_lowest(const float* row, int count) {
    int best = 0;
    for (int j = 1; j < count; ++j)
        if (row[j] > row[best]) best = j;  // strict: ties keep the lowest id
    return best;
}

HybridViews make_hybrid_views(const std::vector<ReceivedFrame>& packets,
                              const MmseStatistics& stats, double snr_db) {
    HybridViews views;
    views.ls.resize(packets.size());
    views.mmse.resize(packets.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(packets.size()); ++i) {
        views.ls[std::size_t(i)] =
            clean_view(packets[std::size_t(i)], stats, EstimatorKind::ls, snr_db);
        views.mmse[std::size_t(i)] =
            clean_view(packets[std::size_t(i)], stats, EstimatorKind::mmse, snr_db);
    }
    return views;
}

std::vector<int> hybrid_predict_views(Model& model, const HybridViews& views, int batch_size,
                                      std::vector<float>* probabilities) {
    if (!model.classifier) throw ConfigError("hybrid_predict: model has no classifier head");
    const int c = model.num_classes;
    const int n = int(views.ls.size());

    std::vector<float> fused(std::size_t(n) * std::size_t(c));
    typename Backbone<float>::Ctx bctx;
    typename ClassifierHead<float>::Ctx cctx;
    for (int start = 0; start < n; start += batch_size) {
        const int stop = std::min(n, start + batch_size);
        for (const auto* side : {&views.ls, &views.mmse}) {
            std::vector<const EqualizedSample*> ptrs;
            for (int i = start; i < stop; ++i) ptrs.push_back(&(*side)[std::size_t(i)]);
            auto feats = model.forward_features(batch_from_samples(ptrs), bctx, false, false);
            auto probs = softmax(model.forward_classifier(feats, cctx, false));
            for (int i = start; i < stop; ++i)
                for (int j = 0; j < c; ++j)
                    fused[std::size_t(i) * c + std::size_t(j)] +=
                        0.5f * probs.data[std::size_t(i - start) * c + std::size_t(j)];
        }
    }
    if (probabilities) *probabilities = fused;
    return predict_from_probs(fused, n, c);
}

std::vector<int> hybrid_predict_batch(Model& model, const std::vector<ReceivedFrame>& packets,
                                      const MmseStatistics& stats, double snr_db, int batch_size,
                                      std::vector<float>* probabilities) {
    return hybrid_predict_views(model, make_hybrid_views(packets, stats, snr_db), batch_size,
                                probabilities);
}

std::pair<int, std::vector<float>> hybrid_predict(Model& model, const ReceivedFrame& packet,
                                                  const MmseStatistics& stats, double snr_db) {
    std::vector<float> probs;
    const auto preds = hybrid_predict_batch(model, {packet}, stats, snr_db, 1, &probs);
    return {preds[0], std::move(probs)};
}

std::pair<Model, FinetuneReport> train_classifier(Model model,
                                                  const std::vector<ReceivedFrame>& train_packets,
                                                  const std::vector<ReceivedFrame>& val_packets,
                                                  const FinetuneConfig& cfg,
                                                  const MmseStatistics& stats, int num_classes) {
    cfg.validate();
    if (train_packets.empty() || val_packets.empty())
        throw ConfigError("train_classifier: empty split");

    Adam<float> opt;
    opt.attach(model, [&](const std::string& name) {
        return name.rfind("backbone.", 0) == 0 ? cfg.backbone_lr_ratio : 1.0;
    });

    std::vector<int> train_idx(train_packets.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
    std::vector<int> val_labels(val_packets.size());
    for (std::size_t i = 0; i < val_packets.size(); ++i) val_labels[i] = val_packets[i].device_id;
    const double val_snr = val_packets.front().snr_db;
    // validation inputs never change; equalize them once
    const HybridViews val_views = make_hybrid_views(val_packets, stats, val_snr);

    Rng shuffle_rng(derive_seed(cfg.seed, 0xF17E));
    FinetuneReport report;
    report.labeled_count = int(train_packets.size());
    report.validation_count = int(val_packets.size());
    Model best_model = model;
    const auto t_start = std::chrono::steady_clock::now();

    typename Backbone<float>::Ctx bctx;
    typename ClassifierHead<float>::Ctx cctx;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        auto samples = expand_labeled(train_packets, train_idx, stats, cfg,
                                      0xF7000000ULL + std::uint64_t(epoch));
        std::vector<int> order(samples.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[std::size_t(shuffle_rng.uniform_int(0, std::int64_t(i) - 1))]);

        for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + std::size_t(cfg.batch_size));
            if (end - begin < 2) break;
            std::vector<const EqualizedSample*> ptrs;
            std::vector<int> labels;
            for (std::size_t i = begin; i < end; ++i) {
                ptrs.push_back(&samples[std::size_t(order[i])]);
                labels.push_back(samples[std::size_t(order[i])].label);
            }
            model.zero_grad();
            auto feats = model.forward_features(batch_from_samples(ptrs), bctx,
                                                !cfg.freeze_backbone_bn);
            auto logits = model.forward_classifier(feats, cctx);
            Tensor dlogits;
            const float loss = cross_entropy(logits, labels, &dlogits);
            if (!std::isfinite(double(loss)))
                throw NumericError("train_classifier: loss diverged at epoch " +
                                   std::to_string(epoch));
            auto dfeats = model.classifier->backward(cctx, dlogits);
            model.backbone.backward(bctx, dfeats);
            opt.step(cfg.head_lr);
        }

        const auto preds = hybrid_predict_views(model, val_views, cfg.val_batch);
        const double acc = accuracy(preds, val_labels);
        report.val_accuracy.push_back(acc);

        if (report.best_epoch < 0 || acc > report.best_accuracy) {
            report.best_accuracy = acc;
            report.best_epoch = epoch;
            best_model = model;
        }
        if (epoch - report.best_epoch >= cfg.patience) break;
    }

    report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    const auto preds = hybrid_predict_views(best_model, val_views, cfg.val_batch);
    report.final_accuracy = accuracy(preds, val_labels);
    report.confusion_matrix = confusion(preds, val_labels, num_classes);
    return {std::move(best_model), std::move(report)};
}

std::pair<Model, FinetuneReport> finetune(const Model& backbone_model,
                                          const std::vector<ReceivedFrame>& target_dataset,
                                          const FinetuneConfig& cfg, const MmseStatistics& stats) {
    cfg.validate();
    int num_classes = 0;
    for (const auto& p : target_dataset) num_classes = std::max(num_classes, p.device_id + 1);

    const auto [labeled, rest] =
        split_labeled(target_dataset, cfg.label_fraction, cfg.labels_per_device, cfg.seed);
    std::vector<ReceivedFrame> train_packets, val_packets;
    train_packets.reserve(labeled.size());
    val_packets.reserve(rest.size());
    for (int i : labeled) train_packets.push_back(target_dataset[std::size_t(i)]);
    for (int i : rest) val_packets.push_back(target_dataset[std::size_t(i)]);

    Model model = backbone_model;
    model.projection.reset();  // keep the backbone CNN, discard the rest
    model.prediction.reset();
    model.with_heads = false;
    model.attach_classifier(num_classes, derive_seed(cfg.seed, 0xC1A55));
    return train_classifier(std::move(model), train_packets, val_packets, cfg, stats, num_classes);
}

std::pair<Model, FinetuneReport> supervised_train(const std::vector<ReceivedFrame>& target_dataset,
                                                  const BackboneConfig& backbone_cfg,
                                                  const FinetuneConfig& cfg,
                                                  const MmseStatistics& stats) {
    int num_classes = 0;
    for (const auto& p : target_dataset) num_classes = std::max(num_classes, p.device_id + 1);

    const auto [labeled, rest] =
        split_labeled(target_dataset, cfg.label_fraction, cfg.labels_per_device, cfg.seed);
    std::vector<ReceivedFrame> train_packets, val_packets;
    for (int i : labeled) train_packets.push_back(target_dataset[std::size_t(i)]);
    for (int i : rest) val_packets.push_back(target_dataset[std::size_t(i)]);

    Model model =
        Model::make_classifier(backbone_cfg, num_classes, derive_seed(cfg.seed, 0x50BE8));
    return train_classifier(std::move(model), train_packets, val_packets, cfg, stats, num_classes);
}

}  // namespace rff
