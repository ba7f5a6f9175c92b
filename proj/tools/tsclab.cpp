#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tsc/harness.hpp"
#include "tsc/util.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> head;
    std::optional<std::string> reward_mode;
    std::optional<std::string> ablate;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
};

void add_common(CLI::App *cmd, CommonOpts &opts, bool config_required = true) {
    auto *config = cmd->add_option("config", opts.config_path, "experiment config (JSON)");
    if (config_required) config->required();
    cmd->add_option("--seed", opts.seed, "override run seed");
    cmd->add_option("--head", opts.head, "dqn|a2c|random|fixed_time|max_pressure");
    cmd->add_option("--reward-mode", opts.reward_mode, "log_distance|pressure");
    cmd->add_option("--ablate", opts.ablate,
                    "comma-separated features to disable: pe,gamma,jaccard,prior");
    cmd->add_option("--out", opts.out, "output directory");
    cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint path (eval)");
}

tsc::ExperimentConfig resolve(const CommonOpts &opts) {
    tsc::ExperimentConfig config;
    if (!opts.config_path.empty()) config = tsc::load_experiment_config(opts.config_path);
    if (opts.seed) config.seed = *opts.seed;
    if (opts.head) config.head = tsc::policy_from_string(*opts.head);
    if (opts.reward_mode) {
        if (*opts.reward_mode == "log_distance")
            config.reward.mode = tsc::RewardMode::LogDistance;
        else if (*opts.reward_mode == "pressure")
            config.reward.mode = tsc::RewardMode::Pressure;
        else
            throw tsc::Error("unknown reward mode: " + *opts.reward_mode);
    }
    if (opts.ablate) {
        std::string rest = *opts.ablate;
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string flag = rest.substr(0, comma);
            rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
            if (flag == "pe")
                config.encoding.use_pe = false;
            else if (flag == "gamma")
                config.encoding.use_gamma = false;
            else if (flag == "jaccard")
                config.encoding.use_jaccard = false;
            else if (flag == "prior")
                config.encoding.use_prior = false;
            else if (!flag.empty())
                throw tsc::Error("unknown ablation flag: " + flag);
        }
    }
    if (opts.out) config.out_dir = *opts.out;
    if (opts.checkpoint) config.checkpoint = *opts.checkpoint;
    return config;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"traffic signal control laboratory"};
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, eval_opts, baseline_opts, info_opts;
    auto *gen = app.add_subcommand("generate", "sample and save a scenario bundle");
    add_common(gen, gen_opts);
    auto *train = app.add_subcommand("train", "train a policy on random scenarios");
    add_common(train, train_opts);
    auto *eval = app.add_subcommand("eval", "evaluate a checkpoint or heuristic");
    add_common(eval, eval_opts);
    auto *baseline = app.add_subcommand("baseline", "evaluate a heuristic policy");
    add_common(baseline, baseline_opts);
    auto *info = app.add_subcommand("encoder-info", "print encoder parameter counts");
    add_common(info, info_opts, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            tsc::cmd_generate(resolve(gen_opts));
        } else if (train->parsed()) {
            tsc::cmd_train(resolve(train_opts));
        } else if (eval->parsed()) {
            tsc::cmd_eval(resolve(eval_opts));
        } else if (baseline->parsed()) {
            tsc::ExperimentConfig config = resolve(baseline_opts);
            if (config.head == tsc::PolicyKind::Dqn || config.head == tsc::PolicyKind::A2c)
                throw tsc::Error("baseline expects a heuristic head "
                                 "(random|fixed_time|max_pressure)");
            tsc::cmd_eval(config);
        } else if (info->parsed()) {
            std::cout << tsc::encoder_info(resolve(info_opts));
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
