#pragma once

#include <vector>

#include "tsc/sim.hpp"

namespace tsc {

enum class RewardMode { Pressure, LogDistance };
enum class GlobalMode { Identical, TeamAverage };

struct RewardConfig {
    double epsilon = 1e-6;
    RewardMode mode = RewardMode::LogDistance;
    GlobalMode global_mode = GlobalMode::TeamAverage;
};

// incoming minus outgoing vehicle density of a movement, full-lane counts
double pressure(const Simulation &sim, std::size_t movement);

// sum over the lane's vehicles of log(pos/length + epsilon); in (-inf, ~0]
double log_energy(const Simulation &sim, std::size_t lane, double epsilon = 1e-6);

// movement-summed normalized log-energies of an intersection
double log_pressure(const Simulation &sim, std::size_t intersection,
                    double epsilon = 1e-6);

// nonpositive; zero exactly at balance
double reward(const Simulation &sim, std::size_t intersection,
              const RewardConfig &config);

// per-agent training signal from per-intersection rewards
std::vector<double> global_reward(const std::vector<double> &rewards, GlobalMode mode);

} // namespace tsc
