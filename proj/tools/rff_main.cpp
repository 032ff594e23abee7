// SPDX-License-Identifier: Apache-2.0
//
// rff: residual-channel contrastive learning workbench CLI.
// Commands: gen | pretrain | finetune | eval | inspect.
// Exit codes: 0 ok, 2 config error, 3 I/O error, 4 numeric/training error.

#include <CLI11.hpp>
#include <iostream>

#include "rff/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct CommonFlags {
    std::string config_path;
    std::string mode;
    std::string out_dir;
    std::int64_t seed = -1;
    bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run configuration");
    cmd->add_option("--mode", flags.mode, "ls_only | mmse_only | mixed | supervised");
    cmd->add_option("--seed", flags.seed, "master seed override");
    cmd->add_option("--out", flags.out_dir, "output directory override");
    cmd->add_flag("--deterministic", flags.deterministic,
                  "single-threaded bit-reproducible mode");
}

rff::RunConfig resolve_config(const CommonFlags& flags) {
    rff::RunConfig cfg = flags.config_path.empty()
                             ? rff::RunConfig{}
                             : rff::RunConfig::from_json_file(flags.config_path);
    if (!flags.mode.empty()) cfg.mode = rff::train_mode_from_string(flags.mode);
    if (flags.seed >= 0) cfg.seed = std::uint64_t(flags.seed);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.deterministic) cfg.deterministic = true;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Residual-channel contrastive learning workbench for RF fingerprinting"};
    app.require_subcommand(1);

    CommonFlags gen_flags, pre_flags, ft_flags, eval_flags;
    std::string inspect_path;

    auto* gen = app.add_subcommand("gen", "simulate source and target datasets");
    add_common(gen, gen_flags);
    auto* pre = app.add_subcommand("pretrain", "contrastive pretraining (or supervised baseline)");
    add_common(pre, pre_flags);
    auto* ft = app.add_subcommand("finetune", "1%-label adaptation on the target dataset");
    add_common(ft, ft_flags);
    auto* ev = app.add_subcommand("eval", "SNR sweep, NMI and feature export");
    add_common(ev, eval_flags);
    auto* ins = app.add_subcommand("inspect", "summarize a dataset/checkpoint/statistics file");
    ins->add_option("path", inspect_path, "file to inspect")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            const auto cfg = resolve_config(gen_flags);
            rff::cmd_gen(cfg);
            std::cout << "wrote " << cfg.source_path() << " and " << cfg.target_path() << "\n";
        } else if (pre->parsed()) {
            const auto cfg = resolve_config(pre_flags);
            rff::cmd_pretrain(cfg);
            std::cout << "pretrain outputs in " << cfg.pretrain_dir() << "\n";
        } else if (ft->parsed()) {
            const auto cfg = resolve_config(ft_flags);
            rff::cmd_finetune(cfg);
            std::cout << "finetune outputs in " << cfg.finetune_dir() << "\n";
        } else if (ev->parsed()) {
            const auto cfg = resolve_config(eval_flags);
            rff::cmd_eval(cfg);
            std::cout << "eval outputs in " << cfg.eval_dir() << "\n";
        } else if (ins->parsed()) {
            rff::cmd_inspect(inspect_path, std::cout);
        }
    } catch (const rff::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const rff::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const rff::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
