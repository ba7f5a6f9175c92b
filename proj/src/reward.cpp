#include "tsc/reward.hpp"

#include <cmath>

#include "tsc/util.hpp"

namespace tsc {

double pressure(const Simulation &sim, std::size_t movement) {
    const RoadNetwork &net = sim.network();
    const Movement &m = net.movements().at(movement);
    const std::size_t in = net.lane_index(m.in_lane);
    const std::size_t out = net.lane_index(m.out_lane);
    const double c_in = static_cast<double>(sim.lane_vehicles(in).size());
    const double c_out = static_cast<double>(sim.lane_vehicles(out).size());
    return c_in / net.lanes()[in].length_m - c_out / net.lanes()[out].length_m;
}

double log_energy(const Simulation &sim, std::size_t lane, double epsilon) {
    const double length = sim.network().lanes().at(lane).length_m;
    double energy = 0.0;
    for (std::size_t id : sim.lane_vehicles(lane))
        energy += std::log(sim.vehicles()[id].pos_m / length + epsilon);
    return energy;
}

double log_pressure(const Simulation &sim, std::size_t intersection, double epsilon) {
    const RoadNetwork &net = sim.network();
    double total = 0.0;
    for (std::size_t mi : net.movements_of(intersection)) {
        const Movement &m = net.movements()[mi];
        const std::size_t in = net.lane_index(m.in_lane);
        const std::size_t out = net.lane_index(m.out_lane);
        total += log_energy(sim, in, epsilon) / net.lanes()[in].length_m -
                 log_energy(sim, out, epsilon) / net.lanes()[out].length_m;
    }
    return total;
}

double reward(const Simulation &sim, std::size_t intersection,
              const RewardConfig &config) {
    if (config.mode == RewardMode::LogDistance)
        return -std::fabs(log_pressure(sim, intersection, config.epsilon));
    double total = 0.0;
    for (std::size_t m : sim.network().movements_of(intersection))
        total += pressure(sim, m);
    return -std::fabs(total);
}

std::vector<double> global_reward(const std::vector<double> &rewards, GlobalMode mode) {
    if (rewards.empty()) throw Error("global_reward of an empty agent set");
    if (mode == GlobalMode::Identical) return rewards;
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    return std::vector<double>(rewards.size(), mean);
}

} // namespace tsc
