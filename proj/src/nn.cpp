// SPDX-License-Identifier: Apache-2.0
#include "rff/nn.hpp"

#include <cstring>
#include <nlohmann/json.hpp>

#include "rff/checkpoint.hpp"
#include "rff/container.hpp"

namespace rff {

using json = nlohmann::json;

void BackboneConfig::validate() const {
    if (in_channels < 1 || input_len < 1) throw ConfigError("backbone: bad input dims");
    if (widths.empty()) throw ConfigError("backbone: needs at least one block");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("backbone: kernel must be odd");
    if (pool < 1) throw ConfigError("backbone: pool must be >= 1");
    int len = input_len;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] < 1) throw ConfigError("backbone: bad width");
        len /= pool;
        if (len < 1) throw ConfigError("backbone: input too short for pooling depth");
    }
}

std::int64_t BackboneConfig::param_count() const {
    std::int64_t n = 0;
    int in_c = in_channels;
    for (int w : widths) {
        n += std::int64_t(w) * in_c * kernel + w;  // conv
        n += 2 * std::int64_t(w);                  // batchnorm affine
        in_c = w;
    }
    return n;
}

double cosine_lr(int epoch, int total_epochs, double lr_max, double lr_min) {
    if (epoch < 0 || epoch > total_epochs || total_epochs < 1)
        throw ConfigError("cosine_lr: epoch out of range");
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * double(epoch) / double(total_epochs)));
}

// --- checkpoint io ----------------------------------------------------------

namespace {

void append_f32(std::vector<char>& blob, const float* data, std::size_t count) {
    const char* p = reinterpret_cast<const char*>(data);
    blob.insert(blob.end(), p, p + count * 4);
}

void read_f32(const std::vector<char>& blob, std::size_t offset, float* out, std::size_t count) {
    if (offset + count * 4 > blob.size()) throw IoError("checkpoint blob truncated");
    std::memcpy(out, blob.data() + offset, count * 4);
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const CheckpointMeta& meta,
                     Adam<float>* optimizer) {
    json tensors = json::array();
    json buffers = json::array();
    std::vector<char> blob;

    model.for_each_param([&](const std::string& name, Tensor& p) {
        tensors.push_back({{"name", name}, {"shape", p.shape}, {"offset", blob.size()}});
        append_f32(blob, p.data.data(), p.data.size());
    });
    model.for_each_buffer([&](const std::string& name, std::vector<float>& buf) {
        buffers.push_back({{"name", name}, {"shape", {int(buf.size())}}, {"offset", blob.size()}});
        append_f32(blob, buf.data(), buf.size());
    });

    json header{{"version", 1},
                {"arch",
                 {{"in_channels", model.cfg.in_channels},
                  {"widths", model.cfg.widths},
                  {"kernel", model.cfg.kernel},
                  {"pool", model.cfg.pool},
                  {"input_len", model.cfg.input_len},
                  {"with_heads", model.with_heads},
                  {"num_classes", model.num_classes}}},
                {"param_count", model.param_count()},
                {"backbone_param_bytes", model.cfg.param_bytes()},
                {"epoch", meta.epoch},
                {"rng_state", meta.rng_state},
                {"config_hash", meta.config_hash},
                {"tensors", tensors},
                {"buffers", buffers}};

    if (optimizer) {
        json slots = json::array();
        for (auto& s : optimizer->slots) {
            json j{{"name", s.name}, {"lr_scale", s.lr_scale}, {"offset_m", blob.size()}};
            append_f32(blob, s.m.data(), s.m.size());
            j["offset_v"] = blob.size();
            append_f32(blob, s.v.data(), s.v.size());
            slots.push_back(std::move(j));
        }
        header["optimizer"] = {{"t", optimizer->t}, {"slots", slots}};
    }

    write_container(path, "RFFCKPT1", header.dump(), blob);
}

Model load_checkpoint(const std::string& path, CheckpointMeta* meta, Adam<float>* optimizer) {
    const Container c = read_container(path, "RFFCKPT1");
    json header = json::parse(c.header_json);
    const auto& arch = header.at("arch");

    BackboneConfig cfg;
    cfg.in_channels = arch.at("in_channels").get<int>();
    cfg.widths = arch.at("widths").get<std::vector<int>>();
    cfg.kernel = arch.at("kernel").get<int>();
    cfg.pool = arch.at("pool").get<int>();
    cfg.input_len = arch.at("input_len").get<int>();
    const bool with_heads = arch.at("with_heads").get<bool>();
    const int num_classes = arch.at("num_classes").get<int>();

    Model model;
    if (with_heads)
        model = Model::make_simsiam(cfg, 0);
    else {
        model.cfg = cfg;
        model.backbone.cfg = cfg;
        Rng rng(0);
        model.backbone.init(rng);
    }
    if (num_classes > 0) model.attach_classifier(num_classes, 0);

    // name -> offset maps; shapes must agree with the rebuilt architecture
    std::map<std::string, std::pair<std::size_t, std::vector<int>>> t_index;
    for (const auto& t : header.at("tensors"))
        t_index[t.at("name").get<std::string>()] = {t.at("offset").get<std::size_t>(),
                                                    t.at("shape").get<std::vector<int>>()};
    model.for_each_param([&](const std::string& name, Tensor& p) {
        auto it = t_index.find(name);
        if (it == t_index.end()) throw IoError("checkpoint missing tensor " + name);
        if (it->second.second != p.shape) throw IoError("checkpoint shape mismatch for " + name);
        read_f32(c.payload, it->second.first, p.data.data(), p.data.size());
    });

    std::map<std::string, std::size_t> b_index;
    for (const auto& b : header.at("buffers"))
        b_index[b.at("name").get<std::string>()] = b.at("offset").get<std::size_t>();
    model.for_each_buffer([&](const std::string& name, std::vector<float>& buf) {
        auto it = b_index.find(name);
        if (it == b_index.end()) throw IoError("checkpoint missing buffer " + name);
        read_f32(c.payload, it->second, buf.data(), buf.size());
    });

    if (meta) {
        meta->epoch = header.value("epoch", 0);
        meta->rng_state = header.value("rng_state", std::string());
        meta->config_hash = header.value("config_hash", std::string());
    }

    if (optimizer && header.contains("optimizer")) {
        optimizer->attach(model);
        optimizer->t = header["optimizer"].at("t").get<std::int64_t>();
        std::map<std::string, json> s_index;
        for (const auto& s : header["optimizer"].at("slots"))
            s_index[s.at("name").get<std::string>()] = s;
        for (auto& slot : optimizer->slots) {
            auto it = s_index.find(slot.name);
            if (it == s_index.end()) throw IoError("checkpoint missing optimizer slot " + slot.name);
            slot.lr_scale = it->second.at("lr_scale").get<double>();
            read_f32(c.payload, it->second.at("offset_m").get<std::size_t>(), slot.m.data(), slot.m.size());
            read_f32(c.payload, it->second.at("offset_v").get<std::size_t>(), slot.v.data(), slot.v.size());
        }
    }
    return model;
}

std::string checkpoint_manifest(const std::string& path) {
    return read_container(path, "RFFCKPT1").header_json;
}

}  // namespace rff
