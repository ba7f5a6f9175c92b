#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsc/net.hpp"
#include "tsc/rng.hpp"
#include "tsc/sim.hpp"

namespace tsc {

struct IntRange {
    int lo = 0;
    int hi = 0;
};

struct RealRange {
    double lo = 0.0;
    double hi = 0.0;
};

// The sampled configuration space: rectangular grids with randomized
// dimensions, approach counts, lane counts and lane lengths, plus
// Beta-distributed demand.
struct DomainConfig {
    IntRange grid_rows{1, 1};
    IntRange grid_cols{1, 1};
    RealRange lane_length_range{100.0, 200.0};
    IntRange approaches_per_intersection{3, 4};
    IntRange lanes_per_approach{1, 2};
    int vehicle_pool = 400;
    IntRange flow_count_range{4, 8};
    double t_max = 3600.0;
    std::uint64_t seed = 0;
};

struct FlowSpec {
    std::string origin;      // source lane id
    std::string destination; // sink lane id
    int vehicle_count = 0;
    double alpha = 1.0;
    double beta = 1.0;
    std::vector<double> departures; // sorted, in [0, t_max]
};

// Throws on empty ranges, t_max <= 0 or lane lengths shorter than ds.
void validate_config(const DomainConfig &config, double ds = 10.0);

NetworkData sample_network(const DomainConfig &config, Rng &rng);
std::vector<FlowSpec> sample_flows(const RoadNetwork &net, const DomainConfig &config,
                                   Rng &rng);

// One scheduled vehicle per departure, routed by shortest path, in flow order.
std::vector<Vehicle> expand_flows(const RoadNetwork &net,
                                  const std::vector<FlowSpec> &flows);

struct Scenario {
    RoadNetwork net;
    std::vector<FlowSpec> flows;
    DomainConfig config;
};

// Samples network and flows from the config's seed.
Scenario make_scenario(const DomainConfig &config);

// Scenario bundle on disk: network.json + flows.json + domain.json,
// sufficient to replay exactly.
void save_scenario(const Scenario &scenario, const std::string &dir);
Scenario load_scenario(const std::string &dir);

std::string domain_config_to_json(const DomainConfig &config);
DomainConfig domain_config_from_json(const std::string &text);

// Regularized incomplete beta function I_x(a, b) and its inverse in x;
// the inverse-CDF route used for departure sampling.
double incomplete_beta(double a, double b, double x);
double beta_inverse_cdf(double a, double b, double p);

} // namespace tsc
