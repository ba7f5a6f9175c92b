#include "tsc/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsc/util.hpp"

namespace tsc {

using ad::Matrix;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

// --- replay buffer ---

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
    } else {
        items_[write_] = std::move(t);
        write_ = (write_ + 1) % capacity_;
    }
}

std::vector<const Transition *> ReplayBuffer::sample(std::size_t batch, Rng &rng) const {
    if (batch > items_.size())
        throw Error("replay sample larger than buffer content");
    // partial Fisher-Yates over an index array
    std::vector<std::size_t> idx(items_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<const Transition *> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t j = i + rng.index(idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(&items_[idx[i]]);
    }
    return out;
}

// --- action selection ---

std::size_t argmax_index(const std::vector<double> &values) {
    if (values.empty()) throw Error("argmax of empty values");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::size_t select_action_epsilon_greedy(const std::vector<double> &values,
                                         double epsilon, Rng &rng) {
    if (values.empty()) throw Error("action selection over empty values");
    if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.index(values.size());
    return argmax_index(values);
}

std::size_t select_action_softmax(const std::vector<double> &logits, Rng &rng) {
    if (logits.empty()) throw Error("action selection over empty logits");
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        total += probs[i];
    }
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        u -= probs[i];
        if (u <= 0.0) return i;
    }
    return probs.size() - 1;
}

// --- decoders ---

namespace {

constexpr const char *kQPrefix = "q";
constexpr const char *kActorPrefix = "actor";
constexpr const char *kCriticPrefix = "critic";

void create_dqn_params(ParamStore &store, const EncoderConfig &ec, Rng &rng) {
    Encoder::create_params(store, ec, rng);
    create_mlp(store, kQPrefix, static_cast<std::size_t>(ec.latent),
               static_cast<std::size_t>(ec.latent), 1, rng);
}

void create_a2c_params(ParamStore &store, const EncoderConfig &ec, Rng &rng) {
    Encoder::create_params(store, ec, rng);
    create_mlp(store, kActorPrefix, static_cast<std::size_t>(ec.latent),
               static_cast<std::size_t>(ec.latent), 1, rng);
    create_mlp(store, kCriticPrefix, static_cast<std::size_t>(ec.latent),
               static_cast<std::size_t>(ec.latent), 1, rng);
}

std::vector<double> column_of(const Matrix &m) {
    return m.data;
}

} // namespace

// --- DQN ---

DqnAgent::DqnAgent(const DqnConfig &config, std::uint64_t init_seed)
    : config_(config), encoder_online_(online_, config.encoder),
      encoder_target_(target_, config.encoder) {
    Rng init_rng(init_seed);
    create_dqn_params(online_, config_.encoder, init_rng);
    Rng dummy(init_seed); // same structure; values overwritten by the sync
    create_dqn_params(target_, config_.encoder, dummy);
    target_.copy_values_from(online_);
}

std::vector<double> DqnAgent::q_values_with(const ParamStore &store,
                                            const StateGraph &graph) const {
    Tape tape(false);
    ParamStore &mutable_store = const_cast<ParamStore &>(store);
    const Encoder enc(mutable_store, config_.encoder);
    Var emb = enc.forward(tape, graph, false, nullptr);
    Var q = apply_mlp(tape, mutable_store, kQPrefix, emb, config_.encoder.slope,
                      config_.encoder.dropout_p, false, nullptr);
    return column_of(q.value());
}

std::vector<double> DqnAgent::q_values(const StateGraph &graph) const {
    return q_values_with(online_, graph);
}

std::size_t DqnAgent::act(const StateGraph &graph, double epsilon, Rng &rng) const {
    return select_action_epsilon_greedy(q_values(graph), epsilon, rng);
}

std::vector<double> DqnAgent::targets(const std::vector<const Transition *> &batch) const {
    std::vector<double> y;
    y.reserve(batch.size());
    for (const Transition *t : batch) {
        if (t->done) {
            y.push_back(t->reward);
            continue;
        }
        const auto online_next = q_values_with(online_, t->next_state);
        const std::size_t best = argmax_index(online_next);
        const auto target_next = q_values_with(target_, t->next_state);
        y.push_back(t->reward + config_.gamma_disc * target_next[best]);
    }
    return y;
}

std::optional<double> DqnAgent::update(const ReplayBuffer &buffer, Rng &rng) {
    if (buffer.size() < config_.batch_size) return std::nullopt;
    const auto batch = buffer.sample(config_.batch_size, rng);
    const auto y = targets(batch);

    online_.zero_grad();
    double total_loss = 0.0;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        Tape tape(true);
        Var emb = encoder_online_.forward(tape, batch[i]->state, true, &rng);
        Var q = apply_mlp(tape, online_, kQPrefix, emb, config_.encoder.slope,
                          config_.encoder.dropout_p, true, &rng);
        Var q_taken = tape.gather_rows(q, {batch[i]->action});
        Matrix target(1, 1);
        target.data[0] = y[i];
        Var loss = tape.huber(q_taken, target, config_.huber_delta);
        total_loss += loss.value().data[0] * inv_batch;
        tape.backward(tape.scale(loss, inv_batch));
    }
    online_.adamw_step(config_.optimizer);
    updates_ += 1;
    if (updates_ % config_.target_sync_every == 0)
        target_.copy_values_from(online_);
    return total_loss;
}

void DqnAgent::save(const std::string &path) const {
    ad::save_checkpoint(path, {{"online", &online_}, {"target", &target_}});
}

void DqnAgent::load(const std::string &path) {
    ad::load_checkpoint(path, {{"online", &online_}, {"target", &target_}});
}

// --- A2C ---

A2cAgent::A2cAgent(const A2cConfig &config, std::uint64_t init_seed)
    : config_(config), encoder_(store_, config.encoder) {
    Rng init_rng(init_seed);
    create_a2c_params(store_, config_.encoder, init_rng);
}

std::vector<double> A2cAgent::policy_logits(const StateGraph &graph) const {
    Tape tape(false);
    ParamStore &store = const_cast<ParamStore &>(store_);
    const Encoder enc(store, config_.encoder);
    Var emb = enc.forward(tape, graph, false, nullptr);
    Var logits = apply_mlp(tape, store, kActorPrefix, emb, config_.encoder.slope,
                           config_.encoder.dropout_p, false, nullptr);
    return column_of(logits.value());
}

double A2cAgent::state_value(const StateGraph &graph) const {
    Tape tape(false);
    ParamStore &store = const_cast<ParamStore &>(store_);
    const Encoder enc(store, config_.encoder);
    Var emb = enc.forward(tape, graph, false, nullptr);
    Var v = apply_mlp(tape, store, kCriticPrefix, tape.mean_rows(emb),
                      config_.encoder.slope, config_.encoder.dropout_p, false, nullptr);
    return v.value().data[0];
}

std::size_t A2cAgent::act(const StateGraph &graph, Rng &rng) const {
    return select_action_softmax(policy_logits(graph), rng);
}

std::size_t A2cAgent::act_greedy(const StateGraph &graph) const {
    return argmax_index(policy_logits(graph));
}

std::pair<double, double> A2cAgent::update(const std::vector<OnPolicyTransition> &fresh,
                                           Rng &rng) {
    if (fresh.empty()) throw Error("a2c update without transitions");
    for (const auto &t : fresh)
        if (t.policy_version != policy_version_)
            throw Error("a2c update with stale tuples (policy version " +
                        std::to_string(t.policy_version) + ", now " +
                        std::to_string(policy_version_) + ")");

    store_.zero_grad();
    double actor_total = 0.0, critic_total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(fresh.size());
    for (const auto &t : fresh) {
        const double bootstrap =
            t.done ? t.reward : t.reward + config_.gamma_disc * state_value(t.next_state);
        Tape tape(true);
        Var emb = encoder_.forward(tape, t.state, true, &rng);
        Var logits = apply_mlp(tape, store_, kActorPrefix, emb, config_.encoder.slope,
                               config_.encoder.dropout_p, true, &rng);
        Var value = apply_mlp(tape, store_, kCriticPrefix, tape.mean_rows(emb),
                              config_.encoder.slope, config_.encoder.dropout_p, true,
                              &rng);
        const double advantage = bootstrap - value.value().data[0];

        std::vector<int> all_groups(t.state.n_phase(), 0);
        Var probs = tape.grouped_softmax(logits, all_groups);
        Var log_prob = tape.log(tape.gather_rows(probs, {t.action}));
        Var actor_loss = tape.scale(log_prob, -advantage);

        Matrix target(1, 1);
        target.data[0] = bootstrap;
        Var delta = tape.sub(value, tape.constant(target));
        Var critic_loss = tape.mul(delta, delta);

        actor_total += actor_loss.value().data[0] * inv_n;
        critic_total += critic_loss.value().data[0] * inv_n;
        Var combined = tape.scale(tape.add(actor_loss, critic_loss), inv_n);
        tape.backward(combined);
    }
    store_.adamw_step(config_.optimizer);
    policy_version_ += 1;
    return {actor_total, critic_total};
}

void A2cAgent::save(const std::string &path) const {
    ad::save_checkpoint(path, {{"model", &store_}});
}

void A2cAgent::load(const std::string &path) {
    ad::load_checkpoint(path, {{"model", &store_}});
    policy_version_ += 1;
}

// --- baselines ---

std::size_t random_policy(std::size_t n_phases, Rng &rng) {
    if (n_phases == 0) throw Error("random policy over zero phases");
    return rng.index(n_phases);
}

std::size_t fixed_time_policy(double clock, std::size_t n_phases, double green_s) {
    if (n_phases == 0) throw Error("fixed-time policy over zero phases");
    const auto slot = static_cast<std::size_t>(std::floor(clock / green_s + 1e-9));
    return slot % n_phases;
}

std::size_t max_pressure_policy(const Simulation &sim, std::size_t intersection) {
    const RoadNetwork &net = sim.network();
    const auto &phases = net.phases_of(intersection);
    const auto &movements = net.movements_of(intersection);
    if (phases.empty()) throw Error("max-pressure policy over zero phases");
    std::size_t best = 0;
    double best_pressure = -std::numeric_limits<double>::infinity();
    for (std::size_t pi = 0; pi < phases.size(); ++pi) {
        double total = 0.0;
        for (std::size_t m : movements)
            if (net.gamma(m, phases[pi]) != signal_code(SignalState::Prohibited))
                total += pressure(sim, m);
        if (total > best_pressure) {
            best_pressure = total;
            best = pi;
        }
    }
    return best;
}

// --- training loop ---

double epsilon_at(const TrainConfig &config, int step) {
    if (config.epsilon_anneal_steps <= 0) return config.epsilon_end;
    const double frac = std::min(1.0, static_cast<double>(step) /
                                          static_cast<double>(config.epsilon_anneal_steps));
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

namespace {

struct TickObservation {
    std::vector<StateGraph> graphs;
    std::vector<std::size_t> actions;
    std::uint64_t policy_version = 0;
};

// shared scaffolding of both training loops: domain-randomized episodes,
// one joint decision every action period, team-average rewards
template <typename ActFn, typename LearnFn>
TrainResult run_training(const TrainConfig &config, ActFn &&select, LearnFn &&learn) {
    TrainResult result;
    Rng explore_rng(mix64(config.domain.seed ^ 0x455850ULL));
    int step = 0;
    int episode = 0;
    const int ticks_per_episode = static_cast<int>(
        (config.episode_s - config.warmup_s) / config.action_period_s);
    const int sim_steps_per_tick =
        static_cast<int>(config.action_period_s / config.sim_dt);

    while (step < config.decision_steps) {
        DomainConfig domain = config.domain;
        domain.seed = mix64(config.domain.seed + 0x9E3779B97F4A7C15ULL *
                                                     static_cast<std::uint64_t>(episode));
        Scenario scenario = make_scenario(domain);
        Simulation sim(scenario.net, expand_flows(scenario.net, scenario.flows));
        const std::size_t n_inter = scenario.net.intersections().size();

        for (double t = 0.0; t < config.warmup_s - 1e-9; t += config.sim_dt)
            sim.step(config.sim_dt);

        std::optional<TickObservation> prev;
        for (int tick = 0; tick < ticks_per_episode && step < config.decision_steps;
             ++tick) {
            TickObservation now;
            for (std::size_t v = 0; v < n_inter; ++v)
                now.graphs.push_back(build_state_graph(sim, v, config.encoding));

            if (prev) {
                std::vector<double> rewards;
                for (std::size_t v = 0; v < n_inter; ++v)
                    rewards.push_back(reward(sim, v, config.reward));
                const auto global = global_reward(rewards, config.reward.global_mode);
                const double loss = learn(*prev, now.graphs, global, false, explore_rng);
                TrainLogRow row;
                row.decision_step = step;
                row.mean_reward = global.front();
                row.mean_queue = static_cast<double>(standing_vehicle_count(sim));
                row.loss = loss;
                row.epsilon = epsilon_at(config, step);
                result.log.push_back(row);
            }

            const double eps = epsilon_at(config, step);
            now.policy_version = select(now, eps, explore_rng);
            for (std::size_t v = 0; v < n_inter; ++v)
                sim.apply_action(v, now.graphs[v].phase_globals[now.actions[v]]);
            step += 1;
            for (int k = 0; k < sim_steps_per_tick; ++k) sim.step(config.sim_dt);
            prev = std::move(now);
        }

        // terminal transition of the episode
        if (prev) {
            std::vector<StateGraph> terminal;
            for (std::size_t v = 0; v < n_inter; ++v)
                terminal.push_back(build_state_graph(sim, v, config.encoding));
            std::vector<double> rewards;
            for (std::size_t v = 0; v < n_inter; ++v)
                rewards.push_back(reward(sim, v, config.reward));
            const auto global = global_reward(rewards, config.reward.global_mode);
            learn(*prev, terminal, global, true, explore_rng);
        }
        episode += 1;
    }
    result.episodes = episode;
    return result;
}

} // namespace

TrainResult train_dqn(const TrainConfig &config, DqnAgent &agent) {
    ReplayBuffer buffer(config.replay_capacity);
    auto select = [&](TickObservation &obs, double eps, Rng &rng) -> std::uint64_t {
        for (const StateGraph &g : obs.graphs)
            obs.actions.push_back(agent.act(g, eps, rng));
        return 0;
    };
    auto learn = [&](const TickObservation &prev, const std::vector<StateGraph> &now,
                     const std::vector<double> &global, bool done, Rng &rng) -> double {
        for (std::size_t v = 0; v < prev.graphs.size(); ++v) {
            Transition t;
            t.state = prev.graphs[v];
            t.action = static_cast<int>(prev.actions[v]);
            t.reward = global[v];
            t.next_state = now[v];
            t.done = done;
            buffer.push(std::move(t));
        }
        const auto loss = agent.update(buffer, rng);
        return loss.value_or(0.0);
    };
    TrainResult result = run_training(config, select, learn);
    result.parameter_count = agent.parameter_count();
    return result;
}

TrainResult train_a2c(const TrainConfig &config, A2cAgent &agent) {
    auto select = [&](TickObservation &obs, double, Rng &rng) -> std::uint64_t {
        for (const StateGraph &g : obs.graphs) obs.actions.push_back(agent.act(g, rng));
        return agent.policy_version();
    };
    auto learn = [&](const TickObservation &prev, const std::vector<StateGraph> &now,
                     const std::vector<double> &global, bool done, Rng &rng) -> double {
        std::vector<OnPolicyTransition> fresh;
        for (std::size_t v = 0; v < prev.graphs.size(); ++v) {
            OnPolicyTransition t;
            t.state = prev.graphs[v];
            t.action = static_cast<int>(prev.actions[v]);
            t.reward = global[v];
            t.next_state = now[v];
            t.done = done;
            t.policy_version = prev.policy_version;
            fresh.push_back(std::move(t));
        }
        const auto [actor_loss, critic_loss] = agent.update(fresh, rng);
        return actor_loss + critic_loss;
    };
    TrainResult result = run_training(config, select, learn);
    result.parameter_count = agent.parameter_count();
    return result;
}

} // namespace tsc
