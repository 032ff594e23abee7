// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rff/dataset.hpp"
#include "rff/finetune.hpp"
#include "rff/simsiam.hpp"

using namespace rff;

namespace {

BackboneConfig tiny_backbone() {
    BackboneConfig cfg;
    cfg.widths = {4, 8};
    cfg.input_len = 16;
    return cfg;
}

template <typename T>
TensorT<T> random_batch(std::vector<int> shape, std::uint64_t seed) {
    TensorT<T> t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.data) v = T(rng.uniform(-1.0, 1.0));
    return t;
}

// Small source dataset over a benign channel for smoke training runs.
std::vector<ReceivedFrame> smoke_dataset(int devices, int packets, std::uint64_t seed,
                                         double base_snr = 20.0) {
    DeviceSet set = DeviceSet::evenly_spaced(devices);
    ChannelConfig ch;
    ch.base_snr_db = base_snr;
    return generate_dataset(set, ch, packets, seed);
}

}  // namespace

TEST_CASE("neg_cosine fixed points") {
    TensorT<double> p({2, 3});
    p.data = {1.0, 0.0, 0.0, 0.0, 2.0, 0.0};
    CHECK(neg_cosine(p, p) == doctest::Approx(-1.0).epsilon(1e-12));

    TensorT<double> z({2, 3});
    z.data = {0.0, 3.0, 0.0, 0.0, 0.0, -1.0};  // orthogonal rows
    CHECK(neg_cosine(p, z) == doctest::Approx(0.0).epsilon(1e-12));

    TensorT<double> anti = p;
    for (auto& v : anti.data) v = -v;
    CHECK(neg_cosine(p, anti) == doctest::Approx(1.0).epsilon(1e-12));

    TensorT<double> zero({1, 2});
    CHECK_THROWS_AS(neg_cosine(zero, zero), NumericError);
}

TEST_CASE("neg_cosine gradient matches finite differences") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        TensorT<double> p = random_batch<double>({3, 5}, derive_seed(42, std::uint64_t(trial)));
        TensorT<double> z = random_batch<double>({3, 5}, derive_seed(43, std::uint64_t(trial)));
        const TensorT<double> dp = neg_cosine_grad_p(p, z, 0.5);
        double worst = 0.0;
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double keep = p.data[i];
            const double h = 1e-6;
            p.data[i] = keep + h;
            const double lp = 0.5 * neg_cosine(p, z);
            p.data[i] = keep - h;
            const double lm = 0.5 * neg_cosine(p, z);
            p.data[i] = keep;
            const double fd = (lp - lm) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - dp.data[i]) /
                                        std::max({std::abs(fd), std::abs(dp.data[i]), 1e-8}));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("symmetrized loss equals the mean of its two halves") {
    ModelT<double> model = ModelT<double>::make_simsiam(tiny_backbone(), 51);
    const auto x1 = random_batch<double>({4, 2, 16}, 52);
    const auto x2 = random_batch<double>({4, 2, 16}, 53);
    SimsiamWorkspace<double> ws;
    const double loss = simsiam_loss_step(model, ws, x1, x2, false, false);
    CHECK(loss >= -1.0);
    CHECK(loss <= 1.0);

    // recompute Eq. 11 from the two Eq. 10 values
    typename ModelT<double>::EncoderCtx e1, e2;
    typename PredictionMlp<double>::Ctx pc1, pc2;
    const auto z1 = model.forward_encoder(x1, e1, false);
    const auto z2 = model.forward_encoder(x2, e2, false);
    const auto p1 = model.forward_predictor(z1, pc1, false);
    const auto p2 = model.forward_predictor(z2, pc2, false);
    const double recomputed = 0.5 * neg_cosine(p1, z2) + 0.5 * neg_cosine(p2, z1);
    CHECK(loss == doctest::Approx(recomputed).epsilon(1e-12));

    // swapping the views leaves the value unchanged
    const double swapped = simsiam_loss_step(model, ws, x2, x1, false, false);
    CHECK(loss == doctest::Approx(swapped).epsilon(1e-6));
}

TEST_CASE("stop-gradient: encoder grads match the frozen-z surrogate") {
    ModelT<double> model = ModelT<double>::make_simsiam(tiny_backbone(), 61);
    const auto x1 = random_batch<double>({3, 2, 16}, 62);
    const auto x2 = random_batch<double>({3, 2, 16}, 63);

    // analytic gradients from the implementation
    model.zero_grad();
    SimsiamWorkspace<double> ws;
    simsiam_loss_step(model, ws, x1, x2, true, true);

    // frozen z constants captured at theta_0
    typename ModelT<double>::EncoderCtx e1, e2;
    typename PredictionMlp<double>::Ctx pc1, pc2;
    const auto z1c = model.forward_encoder(x1, e1, true);
    const auto z2c = model.forward_encoder(x2, e2, true);

    auto surrogate = [&] {
        typename ModelT<double>::EncoderCtx f1, f2;
        typename PredictionMlp<double>::Ctx q1, q2;
        const auto p1 = model.forward_predictor(model.forward_encoder(x1, f1, true), q1, true);
        const auto p2 = model.forward_predictor(model.forward_encoder(x2, f2, true), q2, true);
        return 0.5 * neg_cosine(p1, z2c) + 0.5 * neg_cosine(p2, z1c);
    };

    double worst = 0.0;
    model.for_each_param([&](const std::string&, TensorT<double>& param) {
        for (std::size_t i = 0; i < param.data.size(); ++i) {
            const double keep = param.data[i];
            const double h = 1e-6;
            param.data[i] = keep + h;
            const double lp = surrogate();
            param.data[i] = keep - h;
            const double lm = surrogate();
            param.data[i] = keep;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = param.grad[i];
            worst = std::max(worst,
                             std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
        }
    });
    CHECK(worst < 1e-3);
}

TEST_CASE("without the p-branch the encoder receives no gradient") {
    ModelT<double> model = ModelT<double>::make_simsiam(tiny_backbone(), 71);
    const auto x1 = random_batch<double>({3, 2, 16}, 72);
    model.zero_grad();
    // forward the encoder alone; the sg(z) terms contribute nothing
    typename ModelT<double>::EncoderCtx ctx;
    model.forward_encoder(x1, ctx, true);
    model.for_each_param([&](const std::string&, TensorT<double>& param) {
        for (const double g : param.grad) CHECK(g == 0.0);
    });
}

TEST_CASE("pretrain smoke run completes and improves") {
    const auto dataset = smoke_dataset(2, 50, 411);
    const MmseStatistics stats = estimate_mmse_statistics(ChannelConfig{}, 10000, 412);
    PretrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 16;
    cfg.lr_max = 5e-3;
    cfg.lr_min = 1e-3;
    cfg.mode = TrainMode::mixed;
    cfg.seed = 413;
    cfg.nmi_restarts = 4;
    cfg.backbone = tiny_backbone();
    cfg.backbone.input_len = 260;

    const auto [model, report] = pretrain(dataset, cfg, stats);
    REQUIRE(int(report.epochs.size()) == cfg.epochs);
    for (const auto& e : report.epochs) {
        CHECK(e.train_loss >= -1.0);
        CHECK(e.train_loss <= 1.0);
        CHECK(e.val_loss >= -1.0);
        CHECK(e.val_loss <= 1.0);
        CHECK(e.nmi >= 0.0);
        CHECK(e.nmi <= 1.0);
    }
    CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss);
    CHECK(report.best_nmi_epoch >= 0);
    CHECK(report.best_nmi_epoch < cfg.epochs);
}

TEST_CASE("near-identical views drive the loss to -1") {
    // benign channel + ls/ls views + no mask: augmentation is effectively
    // frozen, so the collapse-free sanity run must saturate
    DeviceSet set = DeviceSet::evenly_spaced(2);
    ChannelConfig ch;
    ch.num_taps = 1;
    ch.doppler_hz_min = ch.doppler_hz_max = 0.0;
    ch.base_snr_db = 300.0;
    const auto dataset = generate_dataset(set, ch, 48, 421);
    const MmseStatistics stats = estimate_mmse_statistics(ch, 10000, 422);

    PretrainConfig cfg;
    cfg.epochs = 80;
    cfg.batch_size = 16;
    cfg.lr_max = 1e-2;
    cfg.lr_min = 1e-2;
    cfg.mode = TrainMode::ls_only;
    cfg.snr_lo = cfg.snr_hi = 300;
    cfg.mask_ratio = 0.0;
    cfg.seed = 423;
    cfg.nmi_restarts = 2;
    cfg.backbone = tiny_backbone();
    cfg.backbone.input_len = 260;

    const auto [model, report] = pretrain(dataset, cfg, stats);
    CHECK(report.epochs.back().train_loss < -0.94);
    CHECK(report.epochs.back().train_loss >= -1.0);
}

TEST_CASE("pretrain is bit-deterministic single-threaded") {
    const int saved = max_threads();
    set_max_threads(1);
    const auto dataset = smoke_dataset(2, 24, 431);
    const MmseStatistics stats = estimate_mmse_statistics(ChannelConfig{}, 10000, 432);
    PretrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 433;
    cfg.nmi_restarts = 2;
    cfg.backbone = tiny_backbone();
    cfg.backbone.input_len = 260;

    auto [m1, r1] = pretrain(dataset, cfg, stats);
    auto [m2, r2] = pretrain(dataset, cfg, stats);
    bool identical = true;
    m1.for_each_param([&](const std::string& name, Tensor& p) {
        m2.for_each_param([&](const std::string& name2, Tensor& q) {
            if (name == name2 && p.data != q.data) identical = false;
        });
    });
    CHECK(identical);
    CHECK(r1.epochs.back().train_loss == r2.epochs.back().train_loss);
    set_max_threads(saved);
}

TEST_CASE("softmax closed forms") {
    TensorT<double> z({1, 7});
    auto probs = softmax(z);
    for (const double v : probs.data) CHECK(v == doctest::Approx(1.0 / 7.0).epsilon(1e-12));

    TensorT<double> two({1, 2});
    two.data = {1.0, 0.0};
    probs = softmax(two);
    CHECK(probs.data[0] == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-12));
    CHECK(probs.data[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(probs.data[1] == doctest::Approx(0.2689).epsilon(1e-4));

    // shift invariance
    TensorT<double> shifted = two;
    for (auto& v : shifted.data) v += 123.0;
    const auto probs2 = softmax(shifted);
    for (std::size_t i = 0; i < probs.data.size(); ++i)
        CHECK(probs.data[i] == doctest::Approx(probs2.data[i]).epsilon(1e-12));

    // rows sum to one, entries in (0, 1)
    const auto r = softmax(random_batch<double>({5, 7}, 55));
    for (int i = 0; i < 5; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 7; ++j) {
            const double v = r.data[std::size_t(i) * 7 + std::size_t(j)];
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("cross entropy values and gradient") {
    TensorT<double> uniform({1, 7});
    CHECK(cross_entropy(uniform, {3}) == doctest::Approx(std::log(7.0)).epsilon(1e-12));
    CHECK(cross_entropy(uniform, {3}) == doctest::Approx(1.9459).epsilon(1e-4));

    TensorT<double> confident({1, 3});
    confident.data = {60.0, 0.0, 0.0};
    CHECK(cross_entropy(confident, {0}) < 1e-12);

    CHECK_THROWS_AS(cross_entropy(uniform, {7}), ConfigError);

    Rng rng(66);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = int(rng.uniform_int(1, 4));
        const int c = int(rng.uniform_int(2, 7));
        TensorT<double> logits = random_batch<double>({n, c}, derive_seed(67, std::uint64_t(trial)));
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) labels.push_back(int(rng.uniform_int(0, c - 1)));
        TensorT<double> grad;
        cross_entropy(logits, labels, &grad);

        double worst = 0.0;
        for (std::size_t i = 0; i < logits.data.size(); ++i) {
            const double keep = logits.data[i];
            const double h = 1e-5;
            logits.data[i] = keep + h;
            const double lp = cross_entropy(logits, labels);
            logits.data[i] = keep - h;
            const double lm = cross_entropy(logits, labels);
            logits.data[i] = keep;
            const double fd = (lp - lm) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - grad.data[i]) /
                                        std::max({std::abs(fd), std::abs(grad.data[i]), 1e-8}));
        }
        CHECK(worst < 1e-4);

        // gradient identity: softmax - onehot over N
        const auto probs = softmax(logits);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) {
                const double expected =
                    (probs.data[std::size_t(i) * c + std::size_t(j)] -
                     (j == labels[std::size_t(i)] ? 1.0 : 0.0)) /
                    double(n);
                CHECK(grad.data[std::size_t(i) * c + std::size_t(j)] ==
                      doctest::Approx(expected).epsilon(1e-12));
            }
    }
}

TEST_CASE("hybrid fusion arithmetic and symmetry") {
    const std::vector<float> a{0.6f, 0.4f};
    const std::vector<float> b{0.2f, 0.8f};
    const auto fused = fuse_equal_weights(a, b);
    CHECK(fused[0] == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(fused[1] == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(argmax_lowest(fused.data(), 2) == 1);
    CHECK(fuse_equal_weights(b, a) == fused);

    // agreement case and tie break
    const auto same = fuse_equal_weights({0.9f, 0.1f}, {0.8f, 0.2f});
    CHECK(argmax_lowest(same.data(), 2) == 0);
    const float tie[2] = {0.5f, 0.5f};
    CHECK(argmax_lowest(tie, 2) == 0);
}

TEST_CASE("layer-wise learning rates scale backbone updates by 1/100") {
    Model model = Model::make_classifier(tiny_backbone(), 3, 81);
    Adam<float> opt;
    opt.attach(model, [](const std::string& name) {
        return name.rfind("backbone.", 0) == 0 ? 0.01 : 1.0;
    });
    model.zero_grad();
    model.for_each_param([](const std::string&, Tensor& p) {
        std::fill(p.grad.begin(), p.grad.end(), 1.0f);
    });
    const float w_bb = model.backbone.blocks[0].conv.w.data[0];
    const float w_head = model.classifier->lin1.w.data[0];
    opt.step(1e-3);
    const double d_bb = std::abs(double(model.backbone.blocks[0].conv.w.data[0]) - double(w_bb));
    const double d_head = std::abs(double(model.classifier->lin1.w.data[0]) - double(w_head));
    CHECK(d_bb / d_head == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("split_labeled takes exactly 10 per device at 1% of 1000") {
    std::vector<ReceivedFrame> dataset(7000);
    for (int i = 0; i < 7000; ++i) dataset[std::size_t(i)].device_id = i / 1000;
    const auto [labeled, rest] = split_labeled(dataset, 0.01, 0, 99);
    CHECK(labeled.size() == 70);
    CHECK(rest.size() == 6930);
    std::vector<int> per_device(7, 0);
    for (int i : labeled) ++per_device[std::size_t(dataset[std::size_t(i)].device_id)];
    for (int c : per_device) CHECK(c == 10);

    const auto [labeled2, rest2] = split_labeled(dataset, 0.01, 0, 99);
    CHECK(labeled == labeled2);  // deterministic under the same seed
}

TEST_CASE("early stop waits out the patience window with frozen weights") {
    const auto dataset = smoke_dataset(2, 8, 441);
    const MmseStatistics stats = estimate_mmse_statistics(ChannelConfig{}, 10000, 442);
    Model model = Model::make_classifier(tiny_backbone(), 2, 443);
    model.cfg.input_len = 260;
    model.backbone.cfg.input_len = 260;

    std::vector<ReceivedFrame> train(dataset.begin(), dataset.begin() + 4);
    std::vector<ReceivedFrame> val(dataset.begin() + 4, dataset.end());

    FinetuneConfig cfg;
    cfg.batch_size = 4;
    cfg.head_lr = 0.0;  // frozen: accuracy can never improve after epoch 0
    cfg.backbone_lr_ratio = 0.0;
    cfg.patience = 30;
    cfg.max_epochs = 100;
    cfg.seed = 444;
    cfg.freeze_backbone_bn = true;

    const auto [trained, report] = train_classifier(model, train, val, cfg, stats, 2);
    CHECK(int(report.val_accuracy.size()) == 31);  // epochs 0..30
    CHECK(report.best_epoch == 0);
}

TEST_CASE("finetune on a tiny run restores the best checkpoint") {
    const auto dataset = smoke_dataset(2, 20, 451);
    const MmseStatistics stats = estimate_mmse_statistics(ChannelConfig{}, 10000, 452);

    PretrainConfig pcfg;
    pcfg.epochs = 2;
    pcfg.batch_size = 8;
    pcfg.seed = 453;
    pcfg.nmi_restarts = 2;
    pcfg.backbone = tiny_backbone();
    pcfg.backbone.input_len = 260;
    auto [backbone, preport] = pretrain(dataset, pcfg, stats);

    FinetuneConfig cfg;
    cfg.batch_size = 4;
    cfg.labels_per_device = 3;
    cfg.patience = 5;
    cfg.max_epochs = 12;
    cfg.seed = 454;
    const auto target = smoke_dataset(2, 20, 455);
    const auto [model, report] = finetune(backbone, target, cfg, stats);

    CHECK(report.labeled_count == 6);
    CHECK(report.validation_count == 34);
    CHECK(report.best_accuracy == *std::max_element(report.val_accuracy.begin(),
                                                    report.val_accuracy.end()));
    CHECK(report.final_accuracy == report.best_accuracy);  // restored argmax checkpoint
    REQUIRE(report.confusion_matrix.size() == 2);
    std::int64_t total = 0;
    for (const auto& row : report.confusion_matrix)
        for (const auto v : row) total += v;
    CHECK(total == 34);
}
