#include "tsc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "tsc/util.hpp"

namespace tsc {

PolicyKind policy_from_string(const std::string &name) {
    if (name == "dqn") return PolicyKind::Dqn;
    if (name == "a2c") return PolicyKind::A2c;
    if (name == "random") return PolicyKind::Random;
    if (name == "fixed_time") return PolicyKind::FixedTime;
    if (name == "max_pressure") return PolicyKind::MaxPressure;
    throw Error("unknown head/policy: " + name +
                " (expected dqn|a2c|random|fixed_time|max_pressure)");
}

std::string policy_to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::Dqn: return "dqn";
    case PolicyKind::A2c: return "a2c";
    case PolicyKind::Random: return "random";
    case PolicyKind::FixedTime: return "fixed_time";
    case PolicyKind::MaxPressure: return "max_pressure";
    }
    throw Error("unreachable policy kind");
}

ExperimentConfig experiment_config_from_json(const std::string &text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig c;
    if (j.contains("scenario")) {
        const auto &s = j.at("scenario");
        if (s.contains("file"))
            c.scenario_dir = s.at("file").get<std::string>();
        else if (s.contains("generated"))
            c.domain = domain_config_from_json(s.at("generated").dump());
        else
            throw Error("scenario must hold either {file} or {generated}");
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("head")) c.head = policy_from_string(j.at("head").get<std::string>());
    if (j.contains("reward_mode")) {
        const std::string mode = j.at("reward_mode").get<std::string>();
        if (mode == "log_distance")
            c.reward.mode = RewardMode::LogDistance;
        else if (mode == "pressure")
            c.reward.mode = RewardMode::Pressure;
        else
            throw Error("unknown reward_mode: " + mode);
    }
    c.reward.epsilon = j.value("reward_epsilon", c.reward.epsilon);
    c.encoding.ds = j.value("ds", c.encoding.ds);
    c.encoding.d_pe = j.value("d_pe", c.encoding.d_pe);
    if (j.contains("ablate"))
        for (const auto &flag : j.at("ablate")) {
            const std::string name = flag.get<std::string>();
            if (name == "pe")
                c.encoding.use_pe = false;
            else if (name == "gamma")
                c.encoding.use_gamma = false;
            else if (name == "jaccard")
                c.encoding.use_jaccard = false;
            else if (name == "prior")
                c.encoding.use_prior = false;
            else
                throw Error("unknown ablation flag: " + name);
        }
    c.decision_steps = j.value("decision_steps", c.decision_steps);
    c.episode_s = j.value("episode_s", c.episode_s);
    c.warmup_s = j.value("warmup_s", c.warmup_s);
    c.gamma_disc = j.value("gamma_disc", c.gamma_disc);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.target_sync_every = j.value("target_sync_every", c.target_sync_every);
    c.replay_capacity = j.value("replay_capacity", c.replay_capacity);
    c.epsilon_start = j.value("epsilon_start", c.epsilon_start);
    c.epsilon_end = j.value("epsilon_end", c.epsilon_end);
    c.epsilon_anneal_steps = j.value("epsilon_anneal_steps", c.epsilon_anneal_steps);
    c.fixed_time_green_s = j.value("fixed_time_green_s", c.fixed_time_green_s);
    c.eval_seeds = j.value("eval_seeds", c.eval_seeds);
    c.ma_window = j.value("ma_window", c.ma_window);
    c.checkpoint = j.value("checkpoint", c.checkpoint);
    c.out_dir = j.value("out", c.out_dir);
    return c;
}

std::string experiment_config_to_json(const ExperimentConfig &c) {
    nlohmann::ordered_json j;
    if (c.scenario_dir)
        j["scenario"]["file"] = *c.scenario_dir;
    else
        j["scenario"]["generated"] =
            nlohmann::ordered_json::parse(domain_config_to_json(c.domain));
    j["seed"] = c.seed;
    j["head"] = policy_to_string(c.head);
    j["reward_mode"] =
        c.reward.mode == RewardMode::LogDistance ? "log_distance" : "pressure";
    j["reward_epsilon"] = c.reward.epsilon;
    j["ds"] = c.encoding.ds;
    j["d_pe"] = c.encoding.d_pe;
    nlohmann::ordered_json ablate = nlohmann::ordered_json::array();
    if (!c.encoding.use_pe) ablate.push_back("pe");
    if (!c.encoding.use_gamma) ablate.push_back("gamma");
    if (!c.encoding.use_jaccard) ablate.push_back("jaccard");
    if (!c.encoding.use_prior) ablate.push_back("prior");
    j["ablate"] = ablate;
    j["decision_steps"] = c.decision_steps;
    j["episode_s"] = c.episode_s;
    j["warmup_s"] = c.warmup_s;
    j["gamma_disc"] = c.gamma_disc;
    j["lr"] = c.lr;
    j["batch_size"] = c.batch_size;
    j["target_sync_every"] = c.target_sync_every;
    j["replay_capacity"] = c.replay_capacity;
    j["epsilon_start"] = c.epsilon_start;
    j["epsilon_end"] = c.epsilon_end;
    j["epsilon_anneal_steps"] = c.epsilon_anneal_steps;
    j["fixed_time_green_s"] = c.fixed_time_green_s;
    j["eval_seeds"] = c.eval_seeds;
    j["ma_window"] = c.ma_window;
    j["checkpoint"] = c.checkpoint;
    j["out"] = c.out_dir;
    return j.dump(2) + "\n";
}

ExperimentConfig load_experiment_config(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return experiment_config_from_json(buf.str());
}

EncoderConfig to_encoder_config(const ExperimentConfig &c) {
    EncoderConfig ec;
    ec.feature_dim = c.encoding.feature_dim();
    return ec;
}

TrainConfig to_train_config(const ExperimentConfig &c) {
    TrainConfig t;
    t.domain = c.domain;
    t.domain.seed = c.seed;
    t.head = c.head == PolicyKind::A2c ? HeadKind::A2c : HeadKind::Dqn;
    t.reward = c.reward;
    t.encoding = c.encoding;
    t.decision_steps = c.decision_steps;
    t.episode_s = c.episode_s;
    t.warmup_s = c.warmup_s;
    t.action_period_s = c.action_period_s;
    t.sim_dt = c.sim_dt;
    t.replay_capacity = c.replay_capacity;
    t.epsilon_start = c.epsilon_start;
    t.epsilon_end = c.epsilon_end;
    t.epsilon_anneal_steps = c.epsilon_anneal_steps;
    t.dqn.encoder = to_encoder_config(c);
    t.dqn.optimizer.lr = c.lr;
    t.dqn.gamma_disc = c.gamma_disc;
    t.dqn.batch_size = c.batch_size;
    t.dqn.target_sync_every = c.target_sync_every;
    t.a2c.encoder = to_encoder_config(c);
    t.a2c.optimizer.lr = c.lr;
    t.a2c.gamma_disc = c.gamma_disc;
    return t;
}

std::vector<double> moving_average(const std::vector<double> &series,
                                   std::size_t window) {
    if (window == 0) throw Error("moving average window must be >= 1");
    std::vector<double> out;
    out.reserve(series.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        acc += series[i];
        if (i >= window) acc -= series[i - window];
        const std::size_t n = std::min(i + 1, window);
        out.push_back(acc / static_cast<double>(n));
    }
    return out;
}

namespace {

double mean_of(const std::vector<double> &xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double std_of(const std::vector<double> &xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

} // namespace

EvalResult evaluate(const Scenario &scenario, PolicyKind head,
                    const ExperimentConfig &config, const DqnAgent *dqn,
                    const A2cAgent *a2c, std::uint64_t eval_seed) {
    const RoadNetwork &net = scenario.net;
    Simulation sim(net, expand_flows(net, scenario.flows));
    Rng rng(mix64(eval_seed ^ 0x4556414CULL));
    const std::size_t n_inter = net.intersections().size();
    const bool learned = head == PolicyKind::Dqn || head == PolicyKind::A2c;
    if (head == PolicyKind::Dqn && !dqn) throw Error("dqn evaluation without an agent");
    if (head == PolicyKind::A2c && !a2c) throw Error("a2c evaluation without an agent");

    EvalResult result;
    const int sim_steps_per_tick =
        static_cast<int>(config.action_period_s / config.sim_dt);
    const int ticks =
        static_cast<int>((config.episode_s - config.warmup_s) / config.action_period_s);

    for (double t = 0.0; t < config.warmup_s - 1e-9; t += config.sim_dt)
        sim.step(config.sim_dt);

    std::vector<double> travel_times;
    for (int tick = 0; tick < ticks; ++tick) {
        for (std::size_t v = 0; v < n_inter; ++v) {
            std::size_t action = 0;
            switch (head) {
            case PolicyKind::Dqn: {
                const StateGraph g = build_state_graph(sim, v, config.encoding);
                action = argmax_index(dqn->q_values(g));
                break;
            }
            case PolicyKind::A2c: {
                const StateGraph g = build_state_graph(sim, v, config.encoding);
                action = a2c->act_greedy(g);
                break;
            }
            case PolicyKind::Random:
                action = random_policy(net.phases_of(v).size(), rng);
                break;
            case PolicyKind::FixedTime:
                action = fixed_time_policy(sim.clock() - config.warmup_s,
                                           net.phases_of(v).size(),
                                           config.fixed_time_green_s);
                break;
            case PolicyKind::MaxPressure:
                action = max_pressure_policy(sim, v);
                break;
            }
            sim.apply_action(v, net.phases_of(v)[action]);
        }
        std::vector<std::size_t> crossings(n_inter, 0);
        for (int k = 0; k < sim_steps_per_tick; ++k) {
            sim.step(config.sim_dt);
            for (std::size_t v = 0; v < n_inter; ++v)
                crossings[v] += sim.crossings_at(v);
        }

        // metrics after the environment transition
        travel_times.clear();
        for (const Vehicle &veh : sim.vehicles())
            if (veh.arrive_time) travel_times.push_back(*veh.arrive_time - veh.depart_time);
        const double avg_tt = mean_of(travel_times);
        const auto lane_standing = standing_per_lane(sim);

        double network_reward = 0.0;
        std::size_t network_queue = 0;
        for (std::size_t v = 0; v < n_inter; ++v) {
            MetricsRow row;
            row.time_s = sim.clock();
            row.intersection_id = net.intersections()[v].id;
            for (std::size_t lane : net.in_lanes_of(v)) {
                row.queue_len += lane_standing[lane];
                for (std::size_t id : sim.lane_vehicles(lane))
                    row.waiting_time_s += sim.vehicles()[id].waiting_s;
            }
            for (std::size_t lane : net.local_lanes_of(v)) row.standing += lane_standing[lane];
            row.throughput = crossings[v];
            row.travel_time_s = avg_tt;
            row.reward = reward(sim, v, config.reward);
            network_reward += row.reward;
            network_queue += row.queue_len;
            result.rows.push_back(std::move(row));
        }
        result.standing_series.push_back(static_cast<double>(standing_vehicle_count(sim)));
        result.queue_series.push_back(static_cast<double>(network_queue));
        result.reward_series.push_back(network_reward / static_cast<double>(n_inter));
        (void)learned;
    }

    result.summary = summarize(result);
    // travel-time statistics over arrived vehicles
    travel_times.clear();
    double waiting_total = 0.0;
    std::size_t arrived = 0;
    for (const Vehicle &veh : sim.vehicles())
        if (veh.arrive_time) {
            travel_times.push_back(*veh.arrive_time - veh.depart_time);
            waiting_total += veh.waiting_s;
            ++arrived;
        }
    result.summary.avg_travel_time = mean_of(travel_times);
    result.summary.travel_time_std = std_of(travel_times);
    result.summary.arrived = arrived;
    result.summary.en_route = sim.on_network_count();
    result.summary.avg_waiting_time =
        arrived > 0 ? waiting_total / static_cast<double>(arrived) : 0.0;
    return result;
}

EvalSummary summarize(const EvalResult &result) {
    EvalSummary s = result.summary; // keep vehicle-level stats if present
    s.standing_mean = mean_of(result.standing_series);
    s.standing_std = std_of(result.standing_series);
    s.queue_mean = mean_of(result.queue_series);
    s.queue_std = std_of(result.queue_series);
    s.reward_mean = mean_of(result.reward_series);
    std::vector<double> throughput;
    std::map<double, double> by_time;
    for (const MetricsRow &row : result.rows)
        by_time[row.time_s] += static_cast<double>(row.throughput);
    for (const auto &[t, total] : by_time) throughput.push_back(total);
    s.throughput_mean = mean_of(throughput);
    return s;
}

std::string metrics_csv(const std::vector<MetricsRow> &rows) {
    std::string out =
        "time_s,intersection_id,queue_len,standing,waiting_time_s,throughput,"
        "travel_time_s,reward\n";
    for (const MetricsRow &row : rows) {
        out += join_csv({format_g6(row.time_s), row.intersection_id,
                         std::to_string(row.queue_len), std::to_string(row.standing),
                         format_g6(row.waiting_time_s), std::to_string(row.throughput),
                         format_g6(row.travel_time_s), format_g6(row.reward)});
        out += '\n';
    }
    return out;
}

std::string summary_text(const EvalSummary &s) {
    std::ostringstream out;
    out << "avg_travel_time_s     " << format_g6(s.avg_travel_time) << " +- "
        << format_g6(s.travel_time_std) << "\n";
    out << "standing_vehicles     " << format_g6(s.standing_mean) << " +- "
        << format_g6(s.standing_std) << "\n";
    out << "queue_length          " << format_g6(s.queue_mean) << " +- "
        << format_g6(s.queue_std) << "\n";
    out << "avg_waiting_time_s    " << format_g6(s.avg_waiting_time) << "\n";
    out << "throughput_per_window " << format_g6(s.throughput_mean) << "\n";
    out << "reward_mean           " << format_g6(s.reward_mean) << "\n";
    out << "arrived               " << s.arrived << "\n";
    out << "en_route              " << s.en_route << "\n";
    return out.str();
}

std::string summary_json(const EvalSummary &s) {
    nlohmann::ordered_json j;
    j["avg_travel_time_s"] = s.avg_travel_time;
    j["travel_time_std"] = s.travel_time_std;
    j["standing_mean"] = s.standing_mean;
    j["standing_std"] = s.standing_std;
    j["queue_mean"] = s.queue_mean;
    j["queue_std"] = s.queue_std;
    j["avg_waiting_time_s"] = s.avg_waiting_time;
    j["throughput_per_window"] = s.throughput_mean;
    j["reward_mean"] = s.reward_mean;
    j["arrived"] = s.arrived;
    j["en_route"] = s.en_route;
    return j.dump(2) + "\n";
}

namespace {

void write_file_or_throw(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write: " + path);
    out << content;
}

void write_resolved_config(const ExperimentConfig &config) {
    std::filesystem::create_directories(config.out_dir);
    write_file_or_throw(config.out_dir + "/resolved_config.json",
                        experiment_config_to_json(config));
}

Scenario scenario_for(const ExperimentConfig &config, std::uint64_t seed) {
    if (config.scenario_dir) return load_scenario(*config.scenario_dir);
    DomainConfig domain = config.domain;
    domain.seed = seed;
    return make_scenario(domain);
}

} // namespace

void cmd_generate(const ExperimentConfig &config) {
    write_resolved_config(config);
    DomainConfig domain = config.domain;
    domain.seed = config.seed;
    Scenario scenario = make_scenario(domain);
    save_scenario(scenario, config.out_dir + "/scenario");
}

void cmd_train(const ExperimentConfig &config) {
    write_resolved_config(config);
    const TrainConfig tc = to_train_config(config);
    TrainResult result;
    if (config.head == PolicyKind::Dqn) {
        DqnAgent agent(tc.dqn, config.seed);
        result = train_dqn(tc, agent);
        agent.save(config.out_dir + "/checkpoint.bin");
    } else if (config.head == PolicyKind::A2c) {
        A2cAgent agent(tc.a2c, config.seed);
        result = train_a2c(tc, agent);
        agent.save(config.out_dir + "/checkpoint.bin");
    } else {
        throw Error("train requires head dqn or a2c");
    }
    std::string log = "decision_step,mean_reward,mean_queue,loss,epsilon\n";
    for (const TrainLogRow &row : result.log) {
        log += join_csv({std::to_string(row.decision_step), format_g6(row.mean_reward),
                         format_g6(row.mean_queue), format_g6(row.loss),
                         format_g6(row.epsilon)});
        log += '\n';
    }
    write_file_or_throw(config.out_dir + "/train_log.csv", log);

    std::vector<double> rewards;
    for (const TrainLogRow &row : result.log) rewards.push_back(row.mean_reward);
    const auto ma = moving_average(rewards, static_cast<std::size_t>(config.ma_window));
    std::string ma_csv = "decision_step,reward_ma\n";
    for (std::size_t i = 0; i < ma.size(); ++i) {
        ma_csv += join_csv({std::to_string(result.log[i].decision_step), format_g6(ma[i])});
        ma_csv += '\n';
    }
    write_file_or_throw(config.out_dir + "/train_reward_ma.csv", ma_csv);
}

void cmd_eval(const ExperimentConfig &config) {
    write_resolved_config(config);

    std::optional<DqnAgent> dqn;
    std::optional<A2cAgent> a2c;
    const TrainConfig tc = to_train_config(config);
    if (config.head == PolicyKind::Dqn) {
        if (config.checkpoint.empty()) throw Error("eval with head dqn needs a checkpoint");
        dqn.emplace(tc.dqn, config.seed);
        dqn->load(config.checkpoint);
    } else if (config.head == PolicyKind::A2c) {
        if (config.checkpoint.empty()) throw Error("eval with head a2c needs a checkpoint");
        a2c.emplace(tc.a2c, config.seed);
        a2c->load(config.checkpoint);
    }

    const int sweeps = config.scenario_dir ? 1 : std::max(1, config.eval_seeds);
    std::vector<double> standing_means, queue_means, travel_means;
    for (int k = 0; k < sweeps; ++k) {
        const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(k);
        Scenario scenario = scenario_for(config, seed);
        EvalResult result =
            evaluate(scenario, config.head, config, dqn ? &*dqn : nullptr,
                     a2c ? &*a2c : nullptr, seed);
        const std::string suffix = sweeps > 1 ? "_seed" + std::to_string(k) : "";
        write_file_or_throw(config.out_dir + "/metrics" + suffix + ".csv",
                            metrics_csv(result.rows));
        write_file_or_throw(config.out_dir + "/summary" + suffix + ".txt",
                            summary_text(result.summary));
        write_file_or_throw(config.out_dir + "/summary" + suffix + ".json",
                            summary_json(result.summary));
        standing_means.push_back(result.summary.standing_mean);
        queue_means.push_back(result.summary.queue_mean);
        travel_means.push_back(result.summary.avg_travel_time);
    }
    if (sweeps > 1) {
        nlohmann::ordered_json j;
        j["seeds"] = sweeps;
        j["standing_mean"] = mean_of(standing_means);
        j["standing_std"] = std_of(standing_means);
        j["queue_mean"] = mean_of(queue_means);
        j["queue_std"] = std_of(queue_means);
        j["avg_travel_time_s"] = mean_of(travel_means);
        j["avg_travel_time_std"] = std_of(travel_means);
        write_file_or_throw(config.out_dir + "/sweep_summary.json", j.dump(2) + "\n");
    }
}

std::string encoder_info(const ExperimentConfig &config) {
    ad::ParamStore store;
    Rng rng(config.seed);
    Encoder::create_params(store, to_encoder_config(config), rng);
    std::ostringstream out;
    out << "encoder parameter counts (latent " << to_encoder_config(config).latent
        << ", heads " << to_encoder_config(config).heads << ")\n";
    std::size_t total = 0;
    for (const auto &[level, count] : Encoder::parameter_counts(store)) {
        out << "  " << level << ": " << count << "\n";
        total += count;
    }
    out << "  total: " << total << "\n";
    return out.str();
}

} // namespace tsc
