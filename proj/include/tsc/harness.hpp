#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsc/agents.hpp"

namespace tsc {

enum class PolicyKind { Dqn, A2c, Random, FixedTime, MaxPressure };

PolicyKind policy_from_string(const std::string &name);
std::string policy_to_string(PolicyKind kind);

struct ExperimentConfig {
    // scenario source: a saved bundle directory, or generated from `domain`
    std::optional<std::string> scenario_dir;
    DomainConfig domain;
    std::uint64_t seed = 0; // run seed; also the base of evaluation sweeps

    PolicyKind head = PolicyKind::Dqn;
    RewardConfig reward;
    EncodingConfig encoding;

    int decision_steps = 3000;
    double episode_s = 3600.0;
    double warmup_s = 100.0;
    double action_period_s = 10.0;
    double sim_dt = 1.0;

    double gamma_disc = 0.9;
    double lr = 1e-3;
    std::size_t batch_size = 64;
    int target_sync_every = 100;
    std::size_t replay_capacity = 50000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_anneal_steps = 2000;

    double fixed_time_green_s = 30.0;
    int eval_seeds = 1; // generated scenarios per evaluation sweep
    int ma_window = 100;

    std::string checkpoint; // required by eval with a learned head
    std::string out_dir = "out";
};

ExperimentConfig experiment_config_from_json(const std::string &text);
std::string experiment_config_to_json(const ExperimentConfig &config);
ExperimentConfig load_experiment_config(const std::string &path);

TrainConfig to_train_config(const ExperimentConfig &config);
EncoderConfig to_encoder_config(const ExperimentConfig &config);

// trailing mean; the prefix is averaged over the points available so far
std::vector<double> moving_average(const std::vector<double> &series, std::size_t window);

// per-decision-tick, per-intersection metrics row
struct MetricsRow {
    double time_s = 0.0;
    std::string intersection_id;
    std::size_t queue_len = 0;    // standing vehicles on incoming lanes
    std::size_t standing = 0;     // standing vehicles on incoming+outgoing lanes
    double waiting_time_s = 0.0;  // summed accumulated waiting on incoming lanes
    std::size_t throughput = 0;   // crossings during the window
    double travel_time_s = 0.0;   // network average over arrived vehicles
    double reward = 0.0;
};

struct EvalSummary {
    double avg_travel_time = 0.0;
    double travel_time_std = 0.0;
    std::size_t arrived = 0;
    std::size_t en_route = 0;
    double standing_mean = 0.0; // network standing count per tick
    double standing_std = 0.0;
    double queue_mean = 0.0;
    double queue_std = 0.0;
    double avg_waiting_time = 0.0; // per arrived vehicle
    double throughput_mean = 0.0;  // arrivals per decision window
    double reward_mean = 0.0;
};

struct EvalResult {
    std::vector<MetricsRow> rows;
    std::vector<double> standing_series; // network standing per tick
    std::vector<double> queue_series;
    std::vector<double> reward_series;
    EvalSummary summary;
};

// Runs one frozen-policy episode on the scenario. The learned agents are
// consulted only when the matching head is selected.
EvalResult evaluate(const Scenario &scenario, PolicyKind head,
                    const ExperimentConfig &config, const DqnAgent *dqn,
                    const A2cAgent *a2c, std::uint64_t eval_seed);

std::string metrics_csv(const std::vector<MetricsRow> &rows);
std::string summary_text(const EvalSummary &summary);
std::string summary_json(const EvalSummary &summary);

// recomputed from raw rows, for the mean/std audit
EvalSummary summarize(const EvalResult &result);

// --- commands; each writes its outputs plus the resolved config ---

void cmd_generate(const ExperimentConfig &config);
void cmd_train(const ExperimentConfig &config);
void cmd_eval(const ExperimentConfig &config);
std::string encoder_info(const ExperimentConfig &config);

} // namespace tsc
