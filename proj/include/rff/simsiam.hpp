// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "rff/chanest.hpp"
#include "rff/nn.hpp"

namespace rff {

enum class TrainMode { ls_only, mmse_only, mixed, supervised };

const char* train_mode_name(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

// Equalizer kinds feeding the two augmented views of one packet.
std::pair<EstimatorKind, EstimatorKind> view_kinds(TrainMode mode);

// Canonical single-view equalizer for feature extraction under a mode
// (LS for ls_only and mixed, MMSE for mmse_only).
EstimatorKind feature_kind(TrainMode mode);

struct PretrainConfig {
    int epochs = 100;
    int batch_size = 128;
    double lr_max = 1e-3;
    double lr_min = 1e-4;
    int snr_lo = 10;
    int snr_hi = 20;
    double mask_ratio = 0.1;
    double train_fraction = 0.9;
    TrainMode mode = TrainMode::mixed;
    std::uint64_t seed = 0;
    int nmi_restarts = 10;
    BackboneConfig backbone;

    void validate() const;
};

struct EpochRecord {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double nmi = 0.0;
    double seconds = 0.0;
};

struct PretrainReport {
    std::vector<EpochRecord> epochs;
    int best_nmi_epoch = -1;
    double best_nmi = 0.0;
    double final_nmi = 0.0;
    double avg_nmi_last10 = 0.0;
    double total_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Losses. neg_cosine treats z as a constant; gradients flow only through p.
// ---------------------------------------------------------------------------

template <typename T>
T neg_cosine(const TensorT<T>& p, const TensorT<T>& z) {
    if (p.shape != z.shape || p.ndim() != 2) throw ShapeError("neg_cosine: shape mismatch");
    const int n = p.dim(0), d = p.dim(1);
    T acc = T(0);
    for (int i = 0; i < n; ++i) {
        const T* pr = p.data.data() + std::size_t(i) * d;
        const T* zr = z.data.data() + std::size_t(i) * d;
        T pp = T(0), zz = T(0), pz = T(0);
        for (int j = 0; j < d; ++j) {
            pp += pr[j] * pr[j];
            zz += zr[j] * zr[j];
            pz += pr[j] * zr[j];
        }
        if (pp <= T(0) || zz <= T(0)) throw NumericError("neg_cosine: zero-norm row");
        acc += -pz / (std::sqrt(pp) * std::sqrt(zz));
    }
    return acc / T(n);
}

// d(weight * neg_cosine(p, z)) / dp
template <typename T>
TensorT<T> neg_cosine_grad_p(const TensorT<T>& p, const TensorT<T>& z, T weight) {
    const int n = p.dim(0), d = p.dim(1);
    TensorT<T> dp({n, d});
    for (int i = 0; i < n; ++i) {
        const T* pr = p.data.data() + std::size_t(i) * d;
        const T* zr = z.data.data() + std::size_t(i) * d;
        T pp = T(0), zz = T(0), pz = T(0);
        for (int j = 0; j < d; ++j) {
            pp += pr[j] * pr[j];
            zz += zr[j] * zr[j];
            pz += pr[j] * zr[j];
        }
        const T pn = std::sqrt(pp), zn = std::sqrt(zz);
        if (pn <= T(0) || zn <= T(0)) throw NumericError("neg_cosine: zero-norm row");
        const T cos_pz = pz / (pn * zn);
        const T scale = -weight / (T(n) * pn);
        T* out = dp.data.data() + std::size_t(i) * d;
        for (int j = 0; j < d; ++j) out[j] = scale * (zr[j] / zn - (pr[j] / pn) * cos_pz);
    }
    return dp;
}

template <typename T>
struct SimsiamWorkspace {
    typename ModelT<T>::EncoderCtx enc1, enc2;
    typename PredictionMlp<T>::Ctx pred1, pred2;
};

// One evaluation of the symmetrized stop-gradient loss
// L = 1/2 D(p1, sg(z2)) + 1/2 D(p2, sg(z1)) on a batch pair; with_grads
// accumulates parameter gradients (encoder branches receive gradient only
// through their own p-branch).
template <typename T>
T simsiam_loss_step(ModelT<T>& model, SimsiamWorkspace<T>& ws, const TensorT<T>& x1,
                    const TensorT<T>& x2, bool training, bool with_grads) {
    if (x1.shape != x2.shape) throw ShapeError("simsiam: view batches must match");
    auto z1 = model.forward_encoder(x1, ws.enc1, training, with_grads);
    auto z2 = model.forward_encoder(x2, ws.enc2, training, with_grads);
    auto p1 = model.forward_predictor(z1, ws.pred1, training, with_grads);
    auto p2 = model.forward_predictor(z2, ws.pred2, training, with_grads);

    const T loss = T(0.5) * neg_cosine(p1, z2) + T(0.5) * neg_cosine(p2, z1);
    if (with_grads) {
        auto dz1 = model.prediction->backward(ws.pred1, neg_cosine_grad_p(p1, z2, T(0.5)));
        auto dz2 = model.prediction->backward(ws.pred2, neg_cosine_grad_p(p2, z1, T(0.5)));
        auto df1 = model.projection->backward(ws.enc1.proj, dz1);
        model.backbone.backward(ws.enc1.bb, df1);
        auto df2 = model.projection->backward(ws.enc2.proj, dz2);
        model.backbone.backward(ws.enc2.bb, df2);
    }
    return loss;
}

// ---------------------------------------------------------------------------

// [N, 2, 260] batch from equalized samples.
Tensor batch_from_samples(const std::vector<const EqualizedSample*>& samples);

// Backbone features of each sample, eval mode, batched.
std::vector<float> extract_features(Model& model, const std::vector<EqualizedSample>& samples,
                                    int batch_size = 512);

struct PretrainHooks {
    std::function<void(int epoch, Model& model, const EpochRecord&)> on_epoch;
    std::function<void(int epoch, Model& model)> on_best_nmi;
    // fired once after the last epoch, with the optimizer and the training
    // rng state for checkpointing
    std::function<void(Model& model, Adam<float>& optimizer, const std::string& rng_state)>
        on_complete;
};

// Algorithm-1 epoch loop over residual-channel pairs. The dataset is raw
// received packets; labels are used only for the per-epoch NMI probe.
std::pair<Model, PretrainReport> pretrain(const std::vector<ReceivedFrame>& dataset,
                                          const PretrainConfig& cfg, const MmseStatistics& stats,
                                          const PretrainHooks& hooks = {});

}  // namespace rff
