// SPDX-License-Identifier: Apache-2.0
#include "rff/simsiam.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "rff/metrics.hpp"

namespace rff {

const char* train_mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::ls_only: return "ls_only";
        case TrainMode::mmse_only: return "mmse_only";
        case TrainMode::mixed: return "mixed";
        case TrainMode::supervised: return "supervised";
    }
    throw ConfigError("unknown train mode");
}

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "ls_only") return TrainMode::ls_only;
    if (name == "mmse_only") return TrainMode::mmse_only;
    if (name == "mixed") return TrainMode::mixed;
    if (name == "supervised") return TrainMode::supervised;
    throw ConfigError("unknown mode: " + name);
}

std::pair<EstimatorKind, EstimatorKind> view_kinds(TrainMode mode) {
    switch (mode) {
        case TrainMode::ls_only: return {EstimatorKind::ls, EstimatorKind::ls};
        case TrainMode::mmse_only: return {EstimatorKind::mmse, EstimatorKind::mmse};
        case TrainMode::mixed: return {EstimatorKind::ls, EstimatorKind::mmse};
        case TrainMode::supervised: break;
    }
    throw ConfigError("supervised mode has no contrastive views");
}

EstimatorKind feature_kind(TrainMode mode) {
    return mode == TrainMode::mmse_only ? EstimatorKind::mmse : EstimatorKind::ls;
}

void PretrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("pretrain: epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("pretrain: batch_size must be >= 2");
    if (snr_hi < snr_lo) throw ConfigError("pretrain: SNR range reversed");
    if (mask_ratio < 0.0 || mask_ratio >= 1.0) throw ConfigError("pretrain: bad mask ratio");
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw ConfigError("pretrain: train fraction must be in (0, 1)");
    if (mode == TrainMode::supervised)
        throw ConfigError("pretrain: supervised mode is handled by the supervised trainer");
    backbone.validate();
}

Tensor batch_from_samples(const std::vector<const EqualizedSample*>& samples) {
    const int n = int(samples.size());
    Tensor x({n, 2, kSymbolsPerPacket});
    for (int i = 0; i < n; ++i)
        std::copy(samples[std::size_t(i)]->values.begin(), samples[std::size_t(i)]->values.end(),
                  x.data.begin() + std::size_t(i) * 2 * kSymbolsPerPacket);
    return x;
}

std::vector<float> extract_features(Model& model, const std::vector<EqualizedSample>& samples,
                                    int batch_size) {
    const int d = model.cfg.embed_dim();
    std::vector<float> out(samples.size() * std::size_t(d));
    typename Backbone<float>::Ctx ctx;
    for (std::size_t start = 0; start < samples.size(); start += std::size_t(batch_size)) {
        const std::size_t stop = std::min(samples.size(), start + std::size_t(batch_size));
        std::vector<const EqualizedSample*> ptrs;
        ptrs.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) ptrs.push_back(&samples[i]);
        const Tensor feats = model.forward_features(batch_from_samples(ptrs), ctx, false, false);
        std::copy(feats.data.begin(), feats.data.end(), out.begin() + start * std::size_t(d));
    }
    return out;
}

namespace {

int count_classes(const std::vector<ReceivedFrame>& dataset) {
    int c = 0;
    for (const auto& p : dataset) c = std::max(c, p.device_id + 1);
    return c;
}

// Augmented view pair for every packet index in the batch; parallel over
// packets, each with its own derived seed.
void build_pair_batch(const std::vector<ReceivedFrame>& dataset, const std::vector<int>& order,
                      std::size_t begin, std::size_t end, const MmseStatistics& stats,
                      const PretrainConfig& cfg, std::uint64_t epoch_tag,
                      std::vector<EqualizedSample>& v1, std::vector<EqualizedSample>& v2) {
    const auto kinds = view_kinds(cfg.mode);
    const std::size_t n = end - begin;
    v1.resize(n);
    v2.resize(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(n); ++i) {
        const int packet_idx = order[begin + std::size_t(i)];
        const std::uint64_t seed =
            derive_seed(cfg.seed, epoch_tag * 0x10000000ULL + std::uint64_t(packet_idx));
        auto pair = make_pair_with_kinds(dataset[std::size_t(packet_idx)], stats, kinds.first,
                                         kinds.second, cfg.snr_lo, cfg.snr_hi, cfg.mask_ratio,
                                         seed);
        v1[std::size_t(i)] = std::move(pair.first);
        v2[std::size_t(i)] = std::move(pair.second);
    }
}

double epoch_nmi(Model& model, const std::vector<EqualizedSample>& val_views,
                 const std::vector<int>& val_labels, int num_classes,
                 const PretrainConfig& cfg, int epoch) {
    FeatureMatrix fm;
    fm.rows = std::int64_t(val_views.size());
    fm.dims = model.cfg.embed_dim();
    fm.values = extract_features(model, val_views);
    fm.labels = val_labels;
    const Partition clusters =
        kmeans(fm, num_classes, cfg.nmi_restarts, derive_seed(cfg.seed, 0xA11CE + std::uint64_t(epoch)));
    Partition truth;
    truth.k = num_classes;
    truth.assignments = val_labels;
    return nmi(clusters, truth);
}

}  // namespace

std::pair<Model, PretrainReport> pretrain(const std::vector<ReceivedFrame>& dataset,
                                          const PretrainConfig& cfg, const MmseStatistics& stats,
                                          const PretrainHooks& hooks) {
    cfg.validate();
    if (dataset.size() < 4) throw ConfigError("pretrain: dataset too small");
    const int num_classes = count_classes(dataset);

    // 90/10 split on a seeded shuffle
    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    {
        Rng rng(derive_seed(cfg.seed, 0x5B117));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[std::size_t(rng.uniform_int(0, std::int64_t(i) - 1))]);
    }
    const std::size_t n_train = std::max<std::size_t>(
        2, std::size_t(std::llround(cfg.train_fraction * double(dataset.size()))));
    std::vector<int> train_idx(order.begin(), order.begin() + std::ptrdiff_t(n_train));
    std::vector<int> val_idx(order.begin() + std::ptrdiff_t(n_train), order.end());
    if (val_idx.empty()) throw ConfigError("pretrain: validation split is empty");

    // clean validation views for the NMI probe, fixed across epochs
    std::vector<EqualizedSample> val_views(val_idx.size());
    std::vector<int> val_labels(val_idx.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(val_idx.size()); ++i) {
        const auto& packet = dataset[std::size_t(val_idx[std::size_t(i)])];
        val_views[std::size_t(i)] =
            clean_view(packet, stats, feature_kind(cfg.mode), packet.snr_db);
        val_labels[std::size_t(i)] = packet.device_id;
    }

    Model model = Model::make_simsiam(cfg.backbone, derive_seed(cfg.seed, 0x1417));
    Adam<float> opt;
    opt.attach(model);
    SimsiamWorkspace<float> ws;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5824FF1E));

    PretrainReport report;
    report.epochs.reserve(std::size_t(cfg.epochs));
    const auto t_start = std::chrono::steady_clock::now();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min);

        for (std::size_t i = train_idx.size(); i > 1; --i)
            std::swap(train_idx[i - 1],
                      train_idx[std::size_t(shuffle_rng.uniform_int(0, std::int64_t(i) - 1))]);

        double loss_sum = 0.0;
        std::int64_t loss_count = 0;
        std::vector<EqualizedSample> v1, v2;
        for (std::size_t begin = 0; begin < train_idx.size(); begin += std::size_t(cfg.batch_size)) {
            const std::size_t end = std::min(train_idx.size(), begin + std::size_t(cfg.batch_size));
            if (end - begin < 2) break;  // batchnorm needs at least two samples
            build_pair_batch(dataset, train_idx, begin, end, stats, cfg,
                             0x7E000000ULL + std::uint64_t(epoch), v1, v2);
            std::vector<const EqualizedSample*> p1, p2;
            p1.reserve(v1.size());
            p2.reserve(v2.size());
            for (const auto& s : v1) p1.push_back(&s);
            for (const auto& s : v2) p2.push_back(&s);

            model.zero_grad();
            const float loss = simsiam_loss_step(model, ws, batch_from_samples(p1),
                                                 batch_from_samples(p2), true, true);
            if (!std::isfinite(double(loss)))
                throw NumericError("pretrain: loss diverged at epoch " + std::to_string(epoch));
            opt.step(lr);
            loss_sum += double(loss) * double(end - begin);
            loss_count += std::int64_t(end - begin);
        }

        // validation loss: same augmentation pipeline, held-out per-epoch seed
        double val_sum = 0.0;
        std::int64_t val_count = 0;
        for (std::size_t begin = 0; begin < val_idx.size(); begin += std::size_t(cfg.batch_size)) {
            const std::size_t end = std::min(val_idx.size(), begin + std::size_t(cfg.batch_size));
            if (end - begin < 2) break;
            build_pair_batch(dataset, val_idx, begin, end, stats, cfg,
                             0xA7000000ULL + std::uint64_t(epoch), v1, v2);
            std::vector<const EqualizedSample*> p1, p2;
            for (const auto& s : v1) p1.push_back(&s);
            for (const auto& s : v2) p2.push_back(&s);
            const float loss = simsiam_loss_step(model, ws, batch_from_samples(p1),
                                                 batch_from_samples(p2), false, false);
            val_sum += double(loss) * double(end - begin);
            val_count += std::int64_t(end - begin);
        }

        EpochRecord rec;
        rec.train_loss = loss_count ? loss_sum / double(loss_count) : 0.0;
        rec.val_loss = val_count ? val_sum / double(val_count) : 0.0;
        rec.nmi = epoch_nmi(model, val_views, val_labels, num_classes, cfg, epoch);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
        report.epochs.push_back(rec);

        if (report.best_nmi_epoch < 0 || rec.nmi > report.best_nmi) {
            report.best_nmi = rec.nmi;
            report.best_nmi_epoch = epoch;
            if (hooks.on_best_nmi) hooks.on_best_nmi(epoch, model);
        }
        if (hooks.on_epoch) hooks.on_epoch(epoch, model, rec);
    }

    report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (hooks.on_complete) hooks.on_complete(model, opt, shuffle_rng.serialize());
    report.final_nmi = report.epochs.back().nmi;
    const int tail = std::min<int>(10, int(report.epochs.size()));
    double acc = 0.0;
    for (int i = 0; i < tail; ++i)
        acc += report.epochs[report.epochs.size() - 1 - std::size_t(i)].nmi;
    report.avg_nmi_last10 = acc / double(tail);
    return {std::move(model), std::move(report)};
}

}  // namespace rff
