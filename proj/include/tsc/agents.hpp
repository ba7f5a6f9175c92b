#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "tsc/domainrand.hpp"
#include "tsc/encoder.hpp"
#include "tsc/reward.hpp"
#include "tsc/stategraph.hpp"

namespace tsc {

struct Transition {
    StateGraph state;
    int action = 0; // phase index within the intersection's phase list
    double reward = 0.0;
    StateGraph next_state;
    bool done = false;
};

// Ring buffer with uniform sampling, without replacement within a batch.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::vector<const Transition *> sample(std::size_t batch, Rng &rng) const;
    const Transition &at(std::size_t i) const { return items_[i]; }

private:
    std::size_t capacity_;
    std::size_t write_ = 0;
    std::vector<Transition> items_;
};

// epsilon-greedy over value estimates; argmax ties break to the lowest index
std::size_t select_action_epsilon_greedy(const std::vector<double> &values,
                                         double epsilon, Rng &rng);
std::size_t argmax_index(const std::vector<double> &values);
// categorical draw from softmax of logits
std::size_t select_action_softmax(const std::vector<double> &logits, Rng &rng);

struct DqnConfig {
    EncoderConfig encoder;
    ad::AdamWConfig optimizer; // lr 1e-3, defaults otherwise
    double gamma_disc = 0.9;
    std::size_t batch_size = 64;
    int target_sync_every = 100; // hard sync, in updates
    double huber_delta = 1.0;
};

// Double-DQN policy head on the shared encoder. Online and target networks
// each hold a full encoder+decoder parameter set.
class DqnAgent {
public:
    DqnAgent(const DqnConfig &config, std::uint64_t init_seed);

    std::vector<double> q_values(const StateGraph &graph) const; // frozen, no grad
    std::size_t act(const StateGraph &graph, double epsilon, Rng &rng) const;

    // y = r + gamma * Q_target(s', argmax_a Q_online(s', a)); r when done
    std::vector<double> targets(const std::vector<const Transition *> &batch) const;

    // One batch update; returns the Huber loss, or nullopt when the buffer
    // cannot fill a batch yet (reported as a skip).
    std::optional<double> update(const ReplayBuffer &buffer, Rng &rng);

    void save(const std::string &path) const;
    void load(const std::string &path);
    std::size_t parameter_count() const { return online_.parameter_count(); }
    const ad::ParamStore &online_store() const { return online_; }
    ad::ParamStore &online_store() { return online_; }
    const ad::ParamStore &target_store() const { return target_; }
    int updates_done() const { return updates_; }
    const DqnConfig &config() const { return config_; }

private:
    std::vector<double> q_values_with(const ad::ParamStore &store,
                                      const StateGraph &graph) const;

    DqnConfig config_;
    ad::ParamStore online_;
    ad::ParamStore target_;
    Encoder encoder_online_;
    Encoder encoder_target_;
    int updates_ = 0;
};

struct A2cConfig {
    EncoderConfig encoder;
    ad::AdamWConfig optimizer;
    double gamma_disc = 0.9;
};

struct OnPolicyTransition {
    StateGraph state;
    int action = 0;
    double reward = 0.0;
    StateGraph next_state;
    bool done = false;
    std::uint64_t policy_version = 0;
};

// Advantage actor-critic head; tuples must come from the current policy.
class A2cAgent {
public:
    A2cAgent(const A2cConfig &config, std::uint64_t init_seed);

    std::vector<double> policy_logits(const StateGraph &graph) const;
    double state_value(const StateGraph &graph) const;
    std::size_t act(const StateGraph &graph, Rng &rng) const; // softmax sample
    std::size_t act_greedy(const StateGraph &graph) const;
    std::uint64_t policy_version() const { return policy_version_; }

    // combined actor/critic step; errors on stale tuples
    std::pair<double, double> update(const std::vector<OnPolicyTransition> &fresh,
                                     Rng &rng);

    void save(const std::string &path) const;
    void load(const std::string &path);
    std::size_t parameter_count() const { return store_.parameter_count(); }
    ad::ParamStore &store() { return store_; }

private:
    A2cConfig config_;
    ad::ParamStore store_;
    Encoder encoder_;
    std::uint64_t policy_version_ = 0;
};

// --- heuristic baselines ---

std::size_t random_policy(std::size_t n_phases, Rng &rng);
// cycles through the phase list with a fixed green duration
std::size_t fixed_time_policy(double clock, std::size_t n_phases,
                              double green_s = 30.0);
// phase maximizing the summed pressure of its right-of-way movements
std::size_t max_pressure_policy(const Simulation &sim, std::size_t intersection);

// --- training ---

enum class HeadKind { Dqn, A2c };

struct TrainConfig {
    DomainConfig domain; // scenario distribution; seed field is the run seed
    HeadKind head = HeadKind::Dqn;
    RewardConfig reward;
    EncodingConfig encoding;
    DqnConfig dqn;
    A2cConfig a2c;
    int decision_steps = 3000;
    double episode_s = 3600.0;
    double warmup_s = 100.0; // decision-free spawn-in time
    double action_period_s = 10.0;
    double sim_dt = 1.0;
    std::size_t replay_capacity = 50000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_anneal_steps = 2000;
};

struct TrainLogRow {
    int decision_step = 0;
    double mean_reward = 0.0;
    double mean_queue = 0.0;
    double loss = 0.0;
    double epsilon = 0.0;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::size_t parameter_count = 0;
    int episodes = 0;
};

double epsilon_at(const TrainConfig &config, int step);

// Domain-randomized training of the shared policy; every intersection acts
// through the same agent and receives the team-average reward.
TrainResult train_dqn(const TrainConfig &config, DqnAgent &agent);
TrainResult train_a2c(const TrainConfig &config, A2cAgent &agent);

} // namespace tsc
