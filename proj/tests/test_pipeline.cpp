// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "rff/container.hpp"
#include "rff/pipeline.hpp"

using namespace rff;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Small config that runs the full pipeline in seconds.
RunConfig smoke_config(const std::string& out_dir, std::uint64_t seed = 7) {
    RunConfig cfg;
    cfg.device_count = 2;
    cfg.packets_per_device = 12;
    cfg.stats_samples = 10000;
    cfg.seed = seed;
    cfg.out_dir = out_dir;
    cfg.deterministic = true;
    cfg.eval_snrs_db = {10.0, 20.0};
    cfg.pretrain.epochs = 2;
    cfg.pretrain.batch_size = 8;
    cfg.pretrain.nmi_restarts = 2;
    cfg.pretrain.backbone.widths = {8, 16};
    cfg.finetune.batch_size = 4;
    cfg.finetune.val_batch = 64;
    cfg.finetune.labels_per_device = 2;
    cfg.finetune.max_epochs = 3;
    cfg.finetune.patience = 30;
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("dataset file roundtrip") {
    const DeviceSet devices = DeviceSet::evenly_spaced(2);
    ChannelConfig channel;
    const auto packets = generate_dataset(devices, channel, 5, 99);
    REQUIRE(packets.size() == 10);

    DatasetMeta meta;
    meta.devices = devices;
    meta.channel = channel;
    meta.packets_per_device = 5;
    meta.seed = 99;
    meta.config_hash = "abc";
    const auto path = fresh_dir("rff_ds_roundtrip") / "d.rffd";
    save_dataset(path, packets, meta);

    const auto [loaded, lmeta] = load_dataset(path);
    REQUIRE(loaded.size() == packets.size());
    CHECK(lmeta.packets_per_device == 5);
    CHECK(lmeta.seed == 99);
    CHECK(lmeta.config_hash == "abc");
    CHECK(lmeta.channel == channel);
    REQUIRE(lmeta.devices.size() == 2);
    CHECK(lmeta.devices.devices[1].amp_imbalance_db ==
          doctest::Approx(devices.devices[1].amp_imbalance_db));
    for (std::size_t i = 0; i < packets.size(); ++i) {
        CHECK(loaded[i].device_id == packets[i].device_id);
        for (int k = 0; k < kSubcarriers; ++k) {
            // payload is f32-quantized
            CHECK(loaded[i].signal.pilot[std::size_t(k)].real() ==
                  double(float(packets[i].signal.pilot[std::size_t(k)].real())));
            CHECK(loaded[i].signal.pilot[std::size_t(k)].imag() ==
                  double(float(packets[i].signal.pilot[std::size_t(k)].imag())));
        }
    }
}

TEST_CASE("generation is deterministic modulo the timestamp") {
    const auto dir_a = fresh_dir("rff_gen_a");
    const auto dir_b = fresh_dir("rff_gen_b");
    RunConfig a = smoke_config(dir_a.string());
    RunConfig b = smoke_config(dir_b.string());
    cmd_gen(a);
    cmd_gen(b);

    for (const char* name : {"source.rffd", "target.rffd"}) {
        const Container ca = read_container((dir_a / name).string(), "RFFDSET1");
        const Container cb = read_container((dir_b / name).string(), "RFFDSET1");
        CHECK(ca.payload == cb.payload);
        json ha = json::parse(ca.header_json);
        json hb = json::parse(cb.header_json);
        ha.erase("created");
        hb.erase("created");
        CHECK(ha.dump() == hb.dump());
    }

    // source and target differ (new channel draws)
    const Container cs = read_container((dir_a / "source.rffd").string(), "RFFDSET1");
    const Container ct = read_container((dir_a / "target.rffd").string(), "RFFDSET1");
    CHECK(cs.payload != ct.payload);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
    CHECK_THROWS_AS(RunConfig::from_json_text("{\"devices\": 7}"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("{\"pretrain\": {\"epoch\": 1}}"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("not json"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("{\"mode\": \"bogus\"}"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("{\"device_count\": 1}"), ConfigError);

    const RunConfig cfg = RunConfig::from_json_text(
        "{\"mode\": \"mmse_only\", \"seed\": 5, \"pretrain\": {\"epochs\": 3}}");
    CHECK(cfg.mode == TrainMode::mmse_only);
    CHECK(cfg.seed == 5);
    CHECK(cfg.pretrain.epochs == 3);
    CHECK(cfg.packets_per_device == 1000);  // defaults survive
}

TEST_CASE("config hash ignores the output directory") {
    RunConfig a = smoke_config("/tmp/x1");
    RunConfig b = smoke_config("/tmp/x2");
    CHECK(a.config_hash() == b.config_hash());
    b.seed += 1;
    CHECK(a.config_hash() != b.config_hash());
}

TEST_CASE("full smoke pipeline is byte-deterministic and self-consistent") {
    const auto dir_a = fresh_dir("rff_pipe_a");
    const auto dir_b = fresh_dir("rff_pipe_b");

    for (const auto& dir : {dir_a, dir_b}) {
        RunConfig cfg = smoke_config(dir.string());
        cmd_gen(cfg);
        cmd_pretrain(cfg);
        cmd_finetune(cfg);
        cmd_eval(cfg);
    }

    const std::string metrics_a = read_file(dir_a / "eval_mixed/metrics.json");
    const std::string metrics_b = read_file(dir_b / "eval_mixed/metrics.json");
    CHECK(metrics_a == metrics_b);  // byte-identical
    CHECK(read_file(dir_a / "eval_mixed/features.csv") ==
          read_file(dir_b / "eval_mixed/features.csv"));

    // outputs embed the config hash
    RunConfig cfg = smoke_config(dir_a.string());
    json metrics = json::parse(metrics_a);
    CHECK(metrics.at("config_hash").get<std::string>() == cfg.config_hash());
    const std::string report = read_file(dir_a / "pretrain_mixed/pretrain_report.csv");
    CHECK(report.find(cfg.config_hash()) != std::string::npos);

    // report csv has exactly `epochs` data rows
    int rows = 0;
    std::istringstream is(report);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '#' && line.rfind("epoch,", 0) != 0) ++rows;
    CHECK(rows == cfg.pretrain.epochs);

    // eval at the base snr reproduces the finetune validation accuracy
    json summary = json::parse(read_file(dir_a / "finetune_mixed/finetune_summary.json"));
    const double final_acc = summary.at("final_accuracy").get<double>();
    double eval_acc = -1.0;
    for (const auto& row : metrics.at("accuracy"))
        if (row.at("snr_db").get<double>() == 20.0) eval_acc = row.at("accuracy").get<double>();
    CHECK(eval_acc == doctest::Approx(final_acc).epsilon(0.005));

    // sweep has one row per requested snr, in order
    REQUIRE(metrics.at("accuracy").size() == 2);
    CHECK(metrics.at("accuracy")[0].at("snr_db").get<double>() == 10.0);

    // per-epoch checkpoints exist
    CHECK(fs::exists(dir_a / "pretrain_mixed/epochs/ckpt_epoch_000.rffc"));
    CHECK(fs::exists(dir_a / "pretrain_mixed/checkpoint_best_nmi.rffc"));
    CHECK(fs::exists(dir_a / "pretrain_mixed/checkpoint_final.rffc"));
}

TEST_CASE("inspect handles all formats and rejects unknown magic") {
    const auto dir = fresh_dir("rff_inspect");
    RunConfig cfg = smoke_config(dir.string());
    cmd_gen(cfg);

    std::ostringstream out;
    cmd_inspect(cfg.source_path(), out);
    CHECK(out.str().find("packets_per_device: 12") != std::string::npos);

    // statistics cache + checkpoint via the pipeline
    cmd_pretrain(cfg);
    std::ostringstream out2;
    cmd_inspect((dir / "pretrain_mixed/checkpoint_best_nmi.rffc").string(), out2);
    CHECK(out2.str().find("backbone footprint") != std::string::npos);

    const auto bogus = dir / "bogus.bin";
    std::ofstream(bogus) << "NOTMAGIC plus some trailing bytes";
    CHECK_THROWS_AS(cmd_inspect(bogus.string(), out), IoError);

    const auto tiny = dir / "tiny.bin";
    std::ofstream(tiny) << "abc";
    CHECK_THROWS_AS(cmd_inspect(tiny.string(), out), IoError);
}

TEST_CASE("supervised mode trains on the target 70/30 split") {
    const auto dir = fresh_dir("rff_supervised");
    RunConfig cfg = smoke_config(dir.string());
    cfg.mode = TrainMode::supervised;
    cfg.packets_per_device = 10;
    cfg.pretrain.epochs = 2;
    cfg.finetune.max_epochs = 2;
    cmd_gen(cfg);
    cmd_pretrain(cfg);
    CHECK(fs::exists(cfg.model_path()));

    json summary = json::parse(read_file(dir / "pretrain_supervised/supervised_summary.json"));
    CHECK(summary.at("labeled_count").get<int>() == 14);  // 70% of 2 x 10
    CHECK(summary.at("validation_count").get<int>() == 6);

    cmd_eval(cfg);
    CHECK(fs::exists(dir / "eval_supervised/metrics.json"));

    CHECK_THROWS_AS(cmd_finetune(cfg), ConfigError);
}

TEST_CASE("commands demand their inputs") {
    const auto dir = fresh_dir("rff_missing");
    RunConfig cfg = smoke_config(dir.string());
    CHECK_THROWS_AS(cmd_pretrain(cfg), IoError);
    CHECK_THROWS_AS(cmd_finetune(cfg), IoError);
    CHECK_THROWS_AS(cmd_eval(cfg), IoError);
}
