// SPDX-License-Identifier: Apache-2.0
#include "rff/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "rff/checkpoint.hpp"
#include "rff/container.hpp"
#include "rff/metrics.hpp"

namespace rff {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError(std::string("unknown config key '") + key + "' in " + where);
    }
}

ChannelConfig channel_from_json(const json& j) {
    check_keys(j,
               {"rms_delay_ns", "sample_period_ns", "num_taps", "doppler_hz_min", "doppler_hz_max",
                "frame_interval_s", "base_snr_db"},
               "channel");
    ChannelConfig c;
    c.rms_delay_ns = j.value("rms_delay_ns", c.rms_delay_ns);
    c.sample_period_ns = j.value("sample_period_ns", c.sample_period_ns);
    c.num_taps = j.value("num_taps", c.num_taps);
    c.doppler_hz_min = j.value("doppler_hz_min", c.doppler_hz_min);
    c.doppler_hz_max = j.value("doppler_hz_max", c.doppler_hz_max);
    c.frame_interval_s = j.value("frame_interval_s", c.frame_interval_s);
    c.base_snr_db = j.value("base_snr_db", c.base_snr_db);
    return c;
}

json channel_to_json(const ChannelConfig& c) {
    return {{"rms_delay_ns", c.rms_delay_ns},
            {"sample_period_ns", c.sample_period_ns},
            {"num_taps", c.num_taps},
            {"doppler_hz_min", c.doppler_hz_min},
            {"doppler_hz_max", c.doppler_hz_max},
            {"frame_interval_s", c.frame_interval_s},
            {"base_snr_db", c.base_snr_db}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << text;
    if (!os) throw IoError("write failed: " + path);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    check_keys(j,
               {"device_count", "packets_per_device", "mode", "seed", "out_dir", "deterministic",
                "stats_samples", "eval_snrs_db", "source_channel", "target_channel", "pretrain",
                "finetune"},
               "config");
    RunConfig c;
    c.device_count = j.value("device_count", c.device_count);
    c.packets_per_device = j.value("packets_per_device", c.packets_per_device);
    if (j.contains("mode")) c.mode = train_mode_from_string(j["mode"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.stats_samples = j.value("stats_samples", c.stats_samples);
    if (j.contains("eval_snrs_db")) c.eval_snrs_db = j["eval_snrs_db"].get<std::vector<double>>();
    if (j.contains("source_channel")) c.source_channel = channel_from_json(j["source_channel"]);
    if (j.contains("target_channel")) c.target_channel = channel_from_json(j["target_channel"]);

    if (j.contains("pretrain")) {
        const json& p = j["pretrain"];
        check_keys(p,
                   {"epochs", "batch_size", "lr_max", "lr_min", "snr_lo", "snr_hi", "mask_ratio",
                    "train_fraction", "nmi_restarts", "backbone"},
                   "pretrain");
        c.pretrain.epochs = p.value("epochs", c.pretrain.epochs);
        c.pretrain.batch_size = p.value("batch_size", c.pretrain.batch_size);
        c.pretrain.lr_max = p.value("lr_max", c.pretrain.lr_max);
        c.pretrain.lr_min = p.value("lr_min", c.pretrain.lr_min);
        c.pretrain.snr_lo = p.value("snr_lo", c.pretrain.snr_lo);
        c.pretrain.snr_hi = p.value("snr_hi", c.pretrain.snr_hi);
        c.pretrain.mask_ratio = p.value("mask_ratio", c.pretrain.mask_ratio);
        c.pretrain.train_fraction = p.value("train_fraction", c.pretrain.train_fraction);
        c.pretrain.nmi_restarts = p.value("nmi_restarts", c.pretrain.nmi_restarts);
        if (p.contains("backbone")) {
            const json& b = p["backbone"];
            check_keys(b, {"widths", "kernel", "pool"}, "backbone");
            c.pretrain.backbone.widths =
                b.value("widths", c.pretrain.backbone.widths);
            c.pretrain.backbone.kernel = b.value("kernel", c.pretrain.backbone.kernel);
            c.pretrain.backbone.pool = b.value("pool", c.pretrain.backbone.pool);
        }
    }
    if (j.contains("finetune")) {
        const json& f = j["finetune"];
        check_keys(f,
                   {"batch_size", "val_batch", "head_lr", "backbone_lr_ratio", "patience",
                    "max_epochs", "label_fraction", "labels_per_device", "snr_lo", "snr_hi",
                    "freeze_backbone_bn"},
                   "finetune");
        c.finetune.batch_size = f.value("batch_size", c.finetune.batch_size);
        c.finetune.val_batch = f.value("val_batch", c.finetune.val_batch);
        c.finetune.head_lr = f.value("head_lr", c.finetune.head_lr);
        c.finetune.backbone_lr_ratio = f.value("backbone_lr_ratio", c.finetune.backbone_lr_ratio);
        c.finetune.patience = f.value("patience", c.finetune.patience);
        c.finetune.max_epochs = f.value("max_epochs", c.finetune.max_epochs);
        c.finetune.label_fraction = f.value("label_fraction", c.finetune.label_fraction);
        c.finetune.labels_per_device = f.value("labels_per_device", c.finetune.labels_per_device);
        c.finetune.snr_lo = f.value("snr_lo", c.finetune.snr_lo);
        c.finetune.snr_hi = f.value("snr_hi", c.finetune.snr_hi);
        c.finetune.freeze_backbone_bn = f.value("freeze_backbone_bn", c.finetune.freeze_backbone_bn);
    }
    c.validate();
    return c;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
    json j{{"device_count", device_count},
           {"packets_per_device", packets_per_device},
           {"mode", train_mode_name(mode)},
           {"seed", seed},
           {"out_dir", out_dir},
           {"deterministic", deterministic},
           {"stats_samples", stats_samples},
           {"eval_snrs_db", eval_snrs_db},
           {"source_channel", channel_to_json(source_channel)},
           {"target_channel", channel_to_json(target_channel)},
           {"pretrain",
            {{"epochs", pretrain.epochs},
             {"batch_size", pretrain.batch_size},
             {"lr_max", pretrain.lr_max},
             {"lr_min", pretrain.lr_min},
             {"snr_lo", pretrain.snr_lo},
             {"snr_hi", pretrain.snr_hi},
             {"mask_ratio", pretrain.mask_ratio},
             {"train_fraction", pretrain.train_fraction},
             {"nmi_restarts", pretrain.nmi_restarts},
             {"backbone",
              {{"widths", pretrain.backbone.widths},
               {"kernel", pretrain.backbone.kernel},
               {"pool", pretrain.backbone.pool}}}}},
           {"finetune",
            {{"batch_size", finetune.batch_size},
             {"val_batch", finetune.val_batch},
             {"head_lr", finetune.head_lr},
             {"backbone_lr_ratio", finetune.backbone_lr_ratio},
             {"patience", finetune.patience},
             {"max_epochs", finetune.max_epochs},
             {"label_fraction", finetune.label_fraction},
             {"labels_per_device", finetune.labels_per_device},
             {"snr_lo", finetune.snr_lo},
             {"snr_hi", finetune.snr_hi},
             {"freeze_backbone_bn", finetune.freeze_backbone_bn}}}};
    return j.dump(2);
}

std::string RunConfig::config_hash() const {
    json j = json::parse(to_json_text());
    j.erase("out_dir");
    return fnv1a_hex(j.dump());
}

void RunConfig::validate() const {
    if (device_count < 2) throw ConfigError("device_count must be >= 2");
    if (packets_per_device < 1) throw ConfigError("packets_per_device must be >= 1");
    if (stats_samples < 10000) throw ConfigError("stats_samples must be >= 1e4");
    if (eval_snrs_db.empty()) throw ConfigError("eval_snrs_db must not be empty");
    source_channel.validate();
    target_channel.validate();
    if (source_channel == target_channel && source_seed() == target_seed())
        throw ConfigError("target channel must differ from source for cross-scenario evaluation");
    pretrain.backbone.validate();
    if (mode != TrainMode::supervised) {
        PretrainConfig p = pretrain;
        p.mode = mode;
        p.validate();
    }
    finetune.validate();
}

std::string RunConfig::source_path() const { return out_dir + "/source.rffd"; }
std::string RunConfig::target_path() const { return out_dir + "/target.rffd"; }
std::string RunConfig::pretrain_dir() const {
    return out_dir + "/pretrain_" + train_mode_name(mode);
}
std::string RunConfig::finetune_dir() const {
    return out_dir + "/finetune_" + train_mode_name(mode);
}
std::string RunConfig::eval_dir() const { return out_dir + "/eval_" + train_mode_name(mode); }
std::string RunConfig::model_path() const {
    return mode == TrainMode::supervised ? pretrain_dir() + "/model_supervised.rffc"
                                         : finetune_dir() + "/model_finetuned.rffc";
}

void apply_threading(const RunConfig& cfg) {
    set_max_threads(cfg.deterministic ? 1 : threads_from_env());
}

MmseStatistics ensure_statistics(const RunConfig& cfg, const ChannelConfig& channel) {
    const std::string key = fnv1a_hex(channel_to_json(channel).dump() + "|" +
                                      std::to_string(cfg.stats_samples) + "|" +
                                      std::to_string(cfg.stats_seed()));
    const std::string path = cfg.out_dir + "/stats_" + key + ".rffs";
    if (fs::exists(path)) return load_mmse_statistics(path);
    MmseStatistics stats = estimate_mmse_statistics(channel, cfg.stats_samples, cfg.stats_seed());
    fs::create_directories(cfg.out_dir);
    save_mmse_statistics(path, stats, channel, cfg.stats_seed());
    return stats;
}

// --- commands ----------------------------------------------------------------

void cmd_gen(const RunConfig& cfg) {
    cfg.validate();
    apply_threading(cfg);
    fs::create_directories(cfg.out_dir);
    const DeviceSet devices = DeviceSet::evenly_spaced(cfg.device_count);

    DatasetMeta meta;
    meta.devices = devices;
    meta.packets_per_device = cfg.packets_per_device;
    meta.config_hash = cfg.config_hash();

    meta.channel = cfg.source_channel;
    meta.seed = cfg.source_seed();
    save_dataset(cfg.source_path(),
                 generate_dataset(devices, cfg.source_channel, cfg.packets_per_device, meta.seed),
                 meta);

    meta.channel = cfg.target_channel;
    meta.seed = cfg.target_seed();
    save_dataset(cfg.target_path(),
                 generate_dataset(devices, cfg.target_channel, cfg.packets_per_device, meta.seed),
                 meta);
}

namespace {

Model backbone_snapshot(const Model& model) {
    Model bb;
    bb.cfg = model.cfg;
    bb.backbone = model.backbone;
    bb.with_heads = false;
    bb.num_classes = 0;
    return bb;
}

void write_classifier_outputs(const std::string& dir, const FinetuneReport& report,
                              const std::string& hash, const std::string& kind) {
    std::string csv = "# config_hash=" + hash + "\nepoch,val_accuracy\n";
    for (std::size_t e = 0; e < report.val_accuracy.size(); ++e)
        csv += std::to_string(e) + "," + fmt("%.6f", report.val_accuracy[e]) + "\n";
    write_text(dir + "/" + kind + "_report.csv", csv);

    std::string conf = "# config_hash=" + hash + "\n";
    for (const auto& row : report.confusion_matrix) {
        for (std::size_t i = 0; i < row.size(); ++i)
            conf += std::to_string(row[i]) + (i + 1 < row.size() ? "," : "");
        conf += "\n";
    }
    write_text(dir + "/confusion.csv", conf);

    json summary{{"config_hash", hash},
                 {"kind", kind},
                 {"best_epoch", report.best_epoch},
                 {"best_accuracy", report.best_accuracy},
                 {"final_accuracy", report.final_accuracy},
                 {"epochs_run", report.val_accuracy.size()},
                 {"labeled_count", report.labeled_count},
                 {"validation_count", report.validation_count},
                 {"timing", {{"total_seconds", report.total_seconds}}}};
    write_text(dir + "/" + kind + "_summary.json", summary.dump(2) + "\n");
}

void run_supervised(const RunConfig& cfg) {
    auto [target, meta] = load_dataset(cfg.target_path());
    const MmseStatistics stats = ensure_statistics(cfg, cfg.target_channel);

    FinetuneConfig sup = cfg.finetune;
    sup.label_fraction = 0.7;  // supervised baseline: 70% labeled data
    sup.labels_per_device = 0;
    sup.backbone_lr_ratio = 1.0;
    sup.batch_size = cfg.pretrain.batch_size;
    sup.max_epochs = std::max(cfg.finetune.max_epochs, cfg.pretrain.epochs);
    sup.seed = cfg.pretrain_seed();

    auto [model, report] = supervised_train(target, cfg.pretrain.backbone, sup, stats);

    const std::string dir = cfg.pretrain_dir();
    fs::create_directories(dir);
    CheckpointMeta ckmeta;
    ckmeta.epoch = report.best_epoch;
    ckmeta.config_hash = cfg.config_hash();
    save_checkpoint(cfg.model_path(), model, ckmeta);
    write_classifier_outputs(dir, report, cfg.config_hash(), "supervised");
}

}  // namespace

void cmd_pretrain(const RunConfig& cfg) {
    cfg.validate();
    apply_threading(cfg);
    if (!fs::exists(cfg.source_path()) || !fs::exists(cfg.target_path()))
        throw IoError("dataset missing; run gen first");

    if (cfg.mode == TrainMode::supervised) {
        run_supervised(cfg);
        return;
    }

    auto [source, meta] = load_dataset(cfg.source_path());
    const MmseStatistics stats = ensure_statistics(cfg, cfg.source_channel);

    PretrainConfig pcfg = cfg.pretrain;
    pcfg.mode = cfg.mode;
    pcfg.seed = cfg.pretrain_seed();

    const std::string dir = cfg.pretrain_dir();
    fs::create_directories(dir + "/epochs");
    const std::string hash = cfg.config_hash();

    PretrainHooks hooks;
    hooks.on_epoch = [&](int epoch, Model& model, const EpochRecord&) {
        Model bb = backbone_snapshot(model);
        char name[64];
        std::snprintf(name, sizeof name, "/epochs/ckpt_epoch_%03d.rffc", epoch);
        CheckpointMeta m;
        m.epoch = epoch;
        m.config_hash = hash;
        save_checkpoint(dir + name, bb, m);
    };
    hooks.on_best_nmi = [&](int epoch, Model& model) {
        Model bb = backbone_snapshot(model);
        CheckpointMeta m;
        m.epoch = epoch;
        m.config_hash = hash;
        save_checkpoint(dir + "/checkpoint_best_nmi.rffc", bb, m);
    };

    hooks.on_complete = [&](Model& model, Adam<float>& opt, const std::string& rng_state) {
        CheckpointMeta final_meta;
        final_meta.epoch = cfg.pretrain.epochs;
        final_meta.config_hash = hash;
        final_meta.rng_state = rng_state;
        save_checkpoint(dir + "/checkpoint_final.rffc", model, final_meta, &opt);
    };

    auto [model, report] = pretrain(source, pcfg, stats, hooks);

    std::string csv = "# config_hash=" + hash + "\nepoch,train_loss,val_loss,seconds\n";
    for (std::size_t e = 0; e < report.epochs.size(); ++e) {
        const auto& r = report.epochs[e];
        csv += std::to_string(e) + "," + fmt("%.6f", r.train_loss) + "," +
               fmt("%.6f", r.val_loss) + "," + fmt("%.3f", r.seconds) + "\n";
    }
    write_text(dir + "/pretrain_report.csv", csv);

    json nmis = json::array(), train_losses = json::array(), val_losses = json::array();
    for (const auto& r : report.epochs) {
        nmis.push_back(r.nmi);
        train_losses.push_back(r.train_loss);
        val_losses.push_back(r.val_loss);
    }
    json summary{{"config_hash", hash},
                 {"mode", train_mode_name(cfg.mode)},
                 {"epochs", report.epochs.size()},
                 {"final_nmi", report.final_nmi},
                 {"best_nmi", report.best_nmi},
                 {"best_nmi_epoch", report.best_nmi_epoch},
                 {"avg_nmi_last10", report.avg_nmi_last10},
                 {"nmi_metadata",
                  {{"average_window_epochs", 10},
                   {"clustering", "kmeans++/lloyd"},
                   {"restarts", cfg.pretrain.nmi_restarts},
                   {"normalization", "geometric_mean_entropies"},
                   {"features", "backbone validation features"},
                   {"equalizer", estimator_name(feature_kind(cfg.mode))}}},
                 {"per_epoch_nmi", nmis},
                 {"per_epoch_train_loss", train_losses},
                 {"per_epoch_val_loss", val_losses},
                 {"timing", {{"total_seconds", report.total_seconds}}}};
    write_text(dir + "/pretrain_summary.json", summary.dump(2) + "\n");
}

void cmd_finetune(const RunConfig& cfg) {
    cfg.validate();
    apply_threading(cfg);
    if (cfg.mode == TrainMode::supervised)
        throw ConfigError("supervised mode trains directly; there is no fine-tune stage");
    const std::string backbone_path = cfg.pretrain_dir() + "/checkpoint_best_nmi.rffc";
    if (!fs::exists(backbone_path)) throw IoError("backbone checkpoint missing; run pretrain");
    if (!fs::exists(cfg.target_path())) throw IoError("target dataset missing; run gen");

    Model backbone = load_checkpoint(backbone_path);
    auto [target, meta] = load_dataset(cfg.target_path());
    const MmseStatistics stats = ensure_statistics(cfg, cfg.target_channel);

    FinetuneConfig fcfg = cfg.finetune;
    fcfg.seed = cfg.finetune_seed();
    auto [model, report] = finetune(backbone, target, fcfg, stats);

    const std::string dir = cfg.finetune_dir();
    fs::create_directories(dir);
    CheckpointMeta ckmeta;
    ckmeta.epoch = report.best_epoch;
    ckmeta.config_hash = cfg.config_hash();
    save_checkpoint(cfg.model_path(), model, ckmeta);
    write_classifier_outputs(dir, report, cfg.config_hash(), "finetune");
}

namespace {

// Extra AWGN bringing a stored packet down to `target_snr_db`; no-op when
// the packet is already noisier.
ReceivedFrame renoise_packet(const ReceivedFrame& packet, double target_snr_db,
                             std::uint64_t seed) {
    const double base_lin = std::pow(10.0, packet.snr_db / 10.0);
    const double target_lin = std::pow(10.0, target_snr_db / 10.0);
    if (target_lin >= base_lin) return packet;
    ReceivedFrame out = packet;
    const double power = mean_power(packet.signal);
    const double extra_var = power * (1.0 / target_lin - 1.0 / base_lin);
    Rng rng(seed);
    const double sigma = std::sqrt(extra_var);
    for (auto& v : out.signal.pilot) v += sigma * rng.cnormal();
    for (auto& row : out.signal.data)
        for (auto& v : row) v += sigma * rng.cnormal();
    out.snr_db = target_snr_db;
    return out;
}

}  // namespace

void cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    apply_threading(cfg);
    if (!fs::exists(cfg.model_path())) throw IoError("model checkpoint missing; run finetune");
    Model model = load_checkpoint(cfg.model_path());
    auto [target, meta] = load_dataset(cfg.target_path());
    const MmseStatistics stats = ensure_statistics(cfg, cfg.target_channel);

    // same validation split the classifier was trained against
    const double split_fraction = cfg.mode == TrainMode::supervised ? 0.7 : cfg.finetune.label_fraction;
    const int per_device =
        cfg.mode == TrainMode::supervised ? 0 : cfg.finetune.labels_per_device;
    const std::uint64_t split_seed =
        cfg.mode == TrainMode::supervised ? cfg.pretrain_seed() : cfg.finetune_seed();
    const auto [labeled, rest] = split_labeled(target, split_fraction, per_device, split_seed);
    std::vector<ReceivedFrame> val_packets;
    val_packets.reserve(rest.size());
    std::vector<int> val_labels;
    for (int i : rest) {
        val_packets.push_back(target[std::size_t(i)]);
        val_labels.push_back(target[std::size_t(i)].device_id);
    }

    const std::string dir = cfg.eval_dir();
    fs::create_directories(dir);
    const std::string hash = cfg.config_hash();

    json sweep = json::array();
    json per_class;
    for (double snr : cfg.eval_snrs_db) {
        std::vector<ReceivedFrame> noisy(val_packets.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < std::int64_t(val_packets.size()); ++i)
            noisy[std::size_t(i)] =
                renoise_packet(val_packets[std::size_t(i)], snr,
                               derive_seed(cfg.eval_seed(),
                                           std::uint64_t(std::llround(snr * 16.0)) ^
                                               (std::uint64_t(i) << 8)));
        const double used_snr = std::min(snr, meta.channel.base_snr_db);
        const auto preds =
            hybrid_predict_batch(model, noisy, stats, used_snr, cfg.finetune.val_batch);
        const double acc = accuracy(preds, val_labels);
        sweep.push_back({{"snr_db", snr}, {"accuracy", acc}});
        if (snr == cfg.eval_snrs_db.back()) {
            const auto conf = confusion(preds, val_labels, model.num_classes);
            per_class = json::array();
            for (int c = 0; c < model.num_classes; ++c) {
                std::int64_t row_total = 0;
                for (auto v : conf[std::size_t(c)]) row_total += v;
                per_class.push_back(row_total ? double(conf[std::size_t(c)][std::size_t(c)]) /
                                                    double(row_total)
                                              : 0.0);
            }
        }
    }

    // representation quality on the validation packets
    FeatureMatrix fm;
    fm.rows = std::int64_t(val_packets.size());
    fm.dims = model.cfg.embed_dim();
    std::vector<EqualizedSample> views(val_packets.size());
    const EstimatorKind kind = feature_kind(cfg.mode == TrainMode::supervised ? TrainMode::mixed
                                                                              : cfg.mode);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < std::int64_t(val_packets.size()); ++i)
        views[std::size_t(i)] =
            clean_view(val_packets[std::size_t(i)], stats, kind, val_packets[std::size_t(i)].snr_db);
    fm.values = extract_features(model, views, cfg.finetune.val_batch);
    fm.labels = val_labels;
    const Partition clusters = kmeans(fm, model.num_classes, cfg.pretrain.nmi_restarts,
                                      derive_seed(cfg.eval_seed(), 0x11E));
    Partition truth;
    truth.k = model.num_classes;
    truth.assignments = val_labels;
    const double nmi_value = nmi(clusters, truth);

    export_features(dir + "/features.csv", fm, "config_hash=" + hash);

    json metrics{{"config_hash", hash},
                 {"mode", train_mode_name(cfg.mode)},
                 {"nmi", nmi_value},
                 {"nmi_metadata",
                  {{"clustering", "kmeans++/lloyd"},
                   {"restarts", cfg.pretrain.nmi_restarts},
                   {"normalization", "geometric_mean_entropies"},
                   {"equalizer", estimator_name(kind)}}},
                 {"accuracy", sweep},
                 {"per_class_accuracy", per_class},
                 {"validation_count", val_packets.size()}};
    write_text(dir + "/metrics.json", metrics.dump(2) + "\n");
}

void cmd_inspect(const std::string& path, std::ostream& os) {
    const std::string magic = peek_magic(path);
    if (magic == "RFFDSET1") {
        json h = json::parse(dataset_manifest(path));
        os << "dataset: " << path << "\n";
        os << "  devices: " << h.at("devices").size() << "\n";
        os << "  packets_per_device: " << h.at("packets_per_device").get<int>() << "\n";
        os << "  packet_count: " << h.at("packet_count").get<std::int64_t>() << "\n";
        os << "  channel: " << h.at("channel_config").dump() << "\n";
        os << "  seed: " << h.at("seed").get<std::uint64_t>() << "\n";
        os << "  config_hash: " << h.value("config_hash", "") << "\n";
        os << "  shape per packet: pilot 52 + data 5x52 complex f32\n";
    } else if (magic == "RFFCKPT1") {
        json h = json::parse(checkpoint_manifest(path));
        const auto& arch = h.at("arch");
        os << "checkpoint: " << path << "\n";
        os << "  widths: " << arch.at("widths").dump() << ", kernel " << arch.at("kernel")
           << ", pool " << arch.at("pool") << "\n";
        os << "  with_heads: " << arch.at("with_heads").get<bool>()
           << ", num_classes: " << arch.at("num_classes").get<int>() << "\n";
        os << "  param_count: " << h.at("param_count").get<std::int64_t>() << "\n";
        const double mb = double(h.at("backbone_param_bytes").get<std::int64_t>()) / 1e6;
        os << "  backbone footprint: " << fmt("%.3f", mb) << " MB (fp32)\n";
        os << "  epoch: " << h.at("epoch").get<int>() << "\n";
        os << "  config_hash: " << h.value("config_hash", "") << "\n";
        os << "  tensors: " << h.at("tensors").size() << "\n";
    } else if (magic == "RFFSTAT1") {
        const Container c = read_container(path, "RFFSTAT1");
        json h = json::parse(c.header_json);
        os << "mmse statistics: " << path << "\n";
        os << "  dims: " << h.at("dims").dump() << "\n";
        os << "  sample_count: " << h.at("sample_count").get<std::int64_t>() << "\n";
        os << "  channel: " << h.at("channel_config").dump() << "\n";
    } else {
        throw IoError("unknown file format (magic '" + magic + "') in " + path);
    }
}

}  // namespace rff
