// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rff/chanest.hpp"
#include "rff/nn.hpp"

namespace rff {

// --- CE loss pieces (Eqs. 12-13), templated for gradient checks -------------

// Row-wise softmax with max subtraction.
template <typename T>
TensorT<T> softmax(const TensorT<T>& z) {
    if (z.ndim() != 2) throw ShapeError("softmax: expects [N, C]");
    const int n = z.dim(0), c = z.dim(1);
    TensorT<T> out({n, c});
    for (int i = 0; i < n; ++i) {
        const T* zr = z.data.data() + std::size_t(i) * c;
        T* orow = out.data.data() + std::size_t(i) * c;
        T zmax = zr[0];
        for (int j = 1; j < c; ++j) zmax = std::max(zmax, zr[j]);
        T sum = T(0);
        for (int j = 0; j < c; ++j) {
            orow[j] = std::exp(zr[j] - zmax);
            sum += orow[j];
        }
        for (int j = 0; j < c; ++j) orow[j] /= sum;
    }
    return out;
}

// Mean over the batch of -log softmax(z)[label]; gradient w.r.t. logits is
// (softmax - onehot) / N.
template <typename T>
T cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels,
                TensorT<T>* dlogits = nullptr) {
    const int n = logits.dim(0), c = logits.dim(1);
    if (int(labels.size()) != n) throw ShapeError("cross_entropy: labels length mismatch");
    for (int l : labels)
        if (l < 0 || l >= c) throw ConfigError("cross_entropy: label out of range");
    TensorT<T> probs = softmax(logits);
    T loss = T(0);
    for (int i = 0; i < n; ++i)
        loss -= std::log(std::max(probs.data[std::size_t(i) * c + std::size_t(labels[std::size_t(i)])],
                                  std::numeric_limits<T>::min()));
    loss /= T(n);
    if (dlogits) {
        *dlogits = TensorT<T>({n, c});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j)
                dlogits->data[std::size_t(i) * c + std::size_t(j)] =
                    (probs.data[std::size_t(i) * c + std::size_t(j)] -
                     (j == labels[std::size_t(i)] ? T(1) : T(0))) /
                    T(n);
    }
    return loss;
}

// --- fine-tuning -------------------------------------------------------------

struct FinetuneConfig {
    int batch_size = 10;
    int val_batch = 512;
    double head_lr = 1e-3;
    double backbone_lr_ratio = 0.01;
    int patience = 30;
    int max_epochs = 200;
    double label_fraction = 0.01;
    int labels_per_device = 0;  // > 0 overrides label_fraction
    int snr_lo = 10;
    int snr_hi = 20;
    std::uint64_t seed = 0;
    bool freeze_backbone_bn = false;

    void validate() const;
};

struct FinetuneReport {
    std::vector<double> val_accuracy;
    int best_epoch = -1;
    double best_accuracy = 0.0;
    double final_accuracy = 0.0;
    std::vector<std::vector<std::int64_t>> confusion_matrix;
    double total_seconds = 0.0;
    int labeled_count = 0;
    int validation_count = 0;
};

// Stratified per-device labeled/validation split; exactly
// round(fraction * per-device count) labeled packets per device.
std::pair<std::vector<int>, std::vector<int>> split_labeled(
    const std::vector<ReceivedFrame>& dataset, double fraction, int labels_per_device,
    std::uint64_t seed);

// p_final = 1/2 softmax(ls branch) + 1/2 softmax(mmse branch).
std::vector<float> fuse_equal_weights(const std::vector<float>& a, const std::vector<float>& b);

// Argmax with ties broken by the lowest class index.
int argmax_lowest(const float* row, int count);

// Equal-weight LS+MMSE decision for a batch of packets at the given SNR.
// Returns argmax class per packet (ties broken by lowest id) and, if
// requested, the fused probabilities.
std::vector<int> hybrid_predict_batch(Model& model, const std::vector<ReceivedFrame>& packets,
                                      const MmseStatistics& stats, double snr_db, int batch_size,
                                      std::vector<float>* probabilities = nullptr);

// Both equalized views of each packet, reusable across validation epochs.
struct HybridViews {
    std::vector<EqualizedSample> ls;
    std::vector<EqualizedSample> mmse;
};

HybridViews make_hybrid_views(const std::vector<ReceivedFrame>& packets,
                              const MmseStatistics& stats, double snr_db);

std::vector<int> hybrid_predict_views(Model& model, const HybridViews& views, int batch_size,
                                      std::vector<float>* probabilities = nullptr);

// Single-packet convenience wrapper.
std::pair<int, std::vector<float>> hybrid_predict(Model& model, const ReceivedFrame& packet,
                                                  const MmseStatistics& stats, double snr_db);

// Classifier training shared by fine-tuning and the supervised baseline:
// AWGN + dual-equalization expansion of the labeled set each epoch, early
// stopping on hybrid validation accuracy, best checkpoint restored.
std::pair<Model, FinetuneReport> train_classifier(Model model,
                                                  const std::vector<ReceivedFrame>& train_packets,
                                                  const std::vector<ReceivedFrame>& val_packets,
                                                  const FinetuneConfig& cfg,
                                                  const MmseStatistics& stats, int num_classes);

// 1%-label adaptation of a pretrained backbone on the target dataset.
std::pair<Model, FinetuneReport> finetune(const Model& backbone_model,
                                          const std::vector<ReceivedFrame>& target_dataset,
                                          const FinetuneConfig& cfg, const MmseStatistics& stats);

// Table-II baseline: backbone + head trained from scratch on a 70/30 split.
std::pair<Model, FinetuneReport> supervised_train(const std::vector<ReceivedFrame>& target_dataset,
                                                  const BackboneConfig& backbone_cfg,
                                                  const FinetuneConfig& cfg,
                                                  const MmseStatistics& stats);

}  // namespace rff
