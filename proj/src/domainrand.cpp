#include "tsc/domainrand.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "tsc/util.hpp"

namespace tsc {

namespace {

// compass sides, clockwise from north
enum Dir { North = 0, East = 1, South = 2, West = 3 };

const char *dir_name(int d) {
    static const char *names[4] = {"N", "E", "S", "W"};
    return names[d];
}

enum class Turn { Left, Through, Right };

Turn turn_of(int d_in, int d_out) {
    const int rel = (d_out - d_in + 4) % 4;
    switch (rel) {
    case 1: return Turn::Left;
    case 2: return Turn::Through;
    case 3: return Turn::Right;
    default: throw Error("u-turn movement requested");
    }
}

constexpr double kSpeedLimit = 13.89; // m/s, uniform across generated lanes

} // namespace

void validate_config(const DomainConfig &c, double ds) {
    auto check_int = [](const IntRange &r, int lo, const char *name) {
        if (r.lo > r.hi || r.lo < lo)
            throw Error(std::string("invalid range for ") + name);
    };
    check_int(c.grid_rows, 1, "grid_rows");
    check_int(c.grid_cols, 1, "grid_cols");
    check_int(c.approaches_per_intersection, 2, "approaches_per_intersection");
    check_int(c.lanes_per_approach, 1, "lanes_per_approach");
    check_int(c.flow_count_range, 1, "flow_count_range");
    if (c.lane_length_range.lo > c.lane_length_range.hi || c.lane_length_range.lo < ds)
        throw Error("lane_length_range must be nonempty with minimum >= ds");
    if (c.t_max <= 0.0) throw Error("t_max must be positive");
    if (c.vehicle_pool < 0) throw Error("vehicle_pool must be nonnegative");
}

NetworkData sample_network(const DomainConfig &config, Rng &rng) {
    validate_config(config);
    NetworkData net;
    const int rows = static_cast<int>(rng.uniform_int(config.grid_rows.lo, config.grid_rows.hi));
    const int cols = static_cast<int>(rng.uniform_int(config.grid_cols.lo, config.grid_cols.hi));

    auto vid = [](int r, int c) {
        return "v" + std::to_string(r) + "_" + std::to_string(c);
    };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            net.intersections.push_back({vid(r, c)});

    // (intersection id, dir) -> lane ids
    std::map<std::pair<std::string, int>, std::vector<std::string>> in_lanes, out_lanes;

    auto add_lane = [&](const std::string &id, double length,
                        std::optional<std::string> up, std::optional<std::string> down) {
        net.lanes.push_back({id, length, kSpeedLimit, std::move(up), std::move(down)});
    };

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::string v = vid(r, c);
            const int interior[4] = {r > 0, c + 1 < cols, r + 1 < rows, c > 0};
            int interior_count = interior[0] + interior[1] + interior[2] + interior[3];

            // internal roads toward the east and south neighbours; the
            // matching directions of the neighbour are filled here as well
            if (interior[East]) {
                const std::string w = vid(r, c + 1);
                const double length = rng.uniform(config.lane_length_range.lo,
                                                  config.lane_length_range.hi);
                const int n = static_cast<int>(rng.uniform_int(
                    config.lanes_per_approach.lo, config.lanes_per_approach.hi));
                for (int j = 0; j < n; ++j) {
                    const std::string east_id = "ln_" + v + "_" + w + "_" + std::to_string(j);
                    add_lane(east_id, length, v, w);
                    out_lanes[{v, East}].push_back(east_id);
                    in_lanes[{w, West}].push_back(east_id);
                    const std::string west_id = "ln_" + w + "_" + v + "_" + std::to_string(j);
                    add_lane(west_id, length, w, v);
                    out_lanes[{w, West}].push_back(west_id);
                    in_lanes[{v, East}].push_back(west_id);
                }
            }
            if (interior[South]) {
                const std::string w = vid(r + 1, c);
                const double length = rng.uniform(config.lane_length_range.lo,
                                                  config.lane_length_range.hi);
                const int n = static_cast<int>(rng.uniform_int(
                    config.lanes_per_approach.lo, config.lanes_per_approach.hi));
                for (int j = 0; j < n; ++j) {
                    const std::string south_id = "ln_" + v + "_" + w + "_" + std::to_string(j);
                    add_lane(south_id, length, v, w);
                    out_lanes[{v, South}].push_back(south_id);
                    in_lanes[{w, North}].push_back(south_id);
                    const std::string north_id = "ln_" + w + "_" + v + "_" + std::to_string(j);
                    add_lane(north_id, length, w, v);
                    out_lanes[{w, North}].push_back(north_id);
                    in_lanes[{v, South}].push_back(north_id);
                }
            }

            // external approaches on the remaining sides, in N,E,S,W order,
            // until the sampled approach count is met
            int target = static_cast<int>(rng.uniform_int(
                config.approaches_per_intersection.lo, config.approaches_per_intersection.hi));
            target = std::clamp(target, interior_count, 4);
            int external = target - interior_count;
            for (int d = 0; d < 4 && external > 0; ++d) {
                if (interior[d]) continue;
                --external;
                const double length = rng.uniform(config.lane_length_range.lo,
                                                  config.lane_length_range.hi);
                const int n = static_cast<int>(rng.uniform_int(
                    config.lanes_per_approach.lo, config.lanes_per_approach.hi));
                for (int j = 0; j < n; ++j) {
                    const std::string src = "src_" + v + "_" + dir_name(d) + std::to_string(j);
                    add_lane(src, length, std::nullopt, v);
                    in_lanes[{v, d}].push_back(src);
                    const std::string snk = "snk_" + v + "_" + dir_name(d) + std::to_string(j);
                    add_lane(snk, length, v, std::nullopt);
                    out_lanes[{v, d}].push_back(snk);
                }
            }
        }
    }

    // movements: every (incoming direction, outgoing direction) pair except
    // u-turns; index-wrapped so that every lane on both sides is covered
    // even when approach lane counts differ
    struct MovementInfo {
        std::string id;
        Turn turn;
        int d_in;
    };
    std::map<std::string, std::vector<MovementInfo>> movement_info; // per intersection
    for (const Intersection &inter : net.intersections) {
        for (int d_in = 0; d_in < 4; ++d_in) {
            const auto &ins = in_lanes[{inter.id, d_in}];
            if (ins.empty()) continue;
            for (int rel = 1; rel <= 3; ++rel) {
                const int d_out = (d_in + rel) % 4;
                const auto &outs = out_lanes[{inter.id, d_out}];
                if (outs.empty()) continue;
                const std::size_t fan = std::max(ins.size(), outs.size());
                for (std::size_t j = 0; j < fan; ++j) {
                    const std::size_t ji = j % ins.size();
                    const std::size_t jo = j % outs.size();
                    const std::string id = "m_" + inter.id + "_" + dir_name(d_in) +
                                           std::to_string(ji) + "_" + dir_name(d_out) +
                                           std::to_string(jo);
                    net.movements.push_back({id, ins[ji], outs[jo], inter.id});
                    movement_info[inter.id].push_back({id, turn_of(d_in, d_out), d_in});
                }
            }
        }
    }

    // 4-phase scheme: NS through+right, NS left, EW through+right, EW left;
    // phases whose green set would be empty are dropped
    for (const Intersection &inter : net.intersections) {
        const auto &owned = movement_info[inter.id];
        struct Template {
            const char *suffix;
            bool ns;
            bool left_phase;
        };
        const Template templates[4] = {
            {"ns", true, false}, {"nsl", true, true}, {"ew", false, false}, {"ewl", false, true}};
        for (const Template &t : templates) {
            Phase phase;
            phase.id = "p_" + inter.id + "_" + t.suffix;
            phase.owner = inter.id;
            bool any_green = false;
            for (const MovementInfo &m : owned) {
                const bool ns_in = m.d_in == North || m.d_in == South;
                SignalState s = SignalState::Prohibited;
                if (ns_in == t.ns) {
                    if (t.left_phase && m.turn == Turn::Left)
                        s = SignalState::Protected;
                    else if (!t.left_phase && m.turn == Turn::Through)
                        s = SignalState::Protected;
                    else if (!t.left_phase && m.turn == Turn::Right)
                        s = SignalState::Permitted;
                }
                if (s != SignalState::Prohibited) any_green = true;
                phase.signal[m.id] = s;
            }
            if (any_green) net.phases.push_back(std::move(phase));
        }
    }
    return net;
}

std::vector<FlowSpec> sample_flows(const RoadNetwork &net, const DomainConfig &config,
                                   Rng &rng) {
    const auto &sources = net.source_lanes();
    const auto &sinks = net.sink_lanes();
    if (sources.empty() || sinks.empty())
        throw Error("network has no source or no sink lanes");

    const int flow_count = static_cast<int>(
        rng.uniform_int(config.flow_count_range.lo, config.flow_count_range.hi));
    const int base = config.vehicle_pool / flow_count;
    const int remainder = config.vehicle_pool % flow_count;

    std::vector<FlowSpec> flows;
    for (int f = 0; f < flow_count; ++f) {
        FlowSpec flow;
        bool routed = false;
        for (int attempt = 0; attempt < 100 && !routed; ++attempt) {
            const std::size_t origin = sources[rng.index(sources.size())];
            const std::size_t dest = sinks[rng.index(sinks.size())];
            if (shortest_path(net, origin, dest)) {
                flow.origin = net.lanes()[origin].id;
                flow.destination = net.lanes()[dest].id;
                routed = true;
            }
        }
        if (!routed) {
            // only fail when genuinely no routable pair exists
            for (std::size_t o : sources)
                for (std::size_t d : sinks)
                    if (shortest_path(net, o, d)) {
                        flow.origin = net.lanes()[o].id;
                        flow.destination = net.lanes()[d].id;
                        routed = true;
                        break;
                    }
            if (!routed) throw Error("no feasible origin-destination pair");
        }
        flow.alpha = rng.uniform(1.0, 10.0);
        flow.beta = rng.uniform(1.0, 10.0);
        flow.vehicle_count = base + (f < remainder ? 1 : 0);
        // counter-based stream so each flow is independently reproducible
        CounterRng stream(config.seed, 0x464C4F57ULL + static_cast<std::uint64_t>(f));
        for (int k = 0; k < flow.vehicle_count; ++k) {
            const double u = stream.uniform(static_cast<std::uint64_t>(k));
            flow.departures.push_back(config.t_max *
                                      beta_inverse_cdf(flow.alpha, flow.beta, u));
        }
        std::sort(flow.departures.begin(), flow.departures.end());
        flows.push_back(std::move(flow));
    }
    return flows;
}

std::vector<Vehicle> expand_flows(const RoadNetwork &net,
                                  const std::vector<FlowSpec> &flows) {
    std::vector<Vehicle> vehicles;
    for (const FlowSpec &flow : flows) {
        const auto path = shortest_path(net, net.lane_index(flow.origin),
                                        net.lane_index(flow.destination));
        if (!path) throw Error("flow route does not exist: " + flow.origin + " -> " +
                               flow.destination);
        for (double t : flow.departures) {
            Vehicle v;
            v.route = *path;
            v.depart_time = t;
            vehicles.push_back(std::move(v));
        }
    }
    return vehicles;
}

Scenario make_scenario(const DomainConfig &config) {
    Rng rng(config.seed);
    NetworkData data = sample_network(config, rng);
    try {
        RoadNetwork net(std::move(data));
        auto flows = sample_flows(net, config, rng);
        return Scenario{std::move(net), std::move(flows), config};
    } catch (const Error &e) {
        throw Error(std::string("domain config cannot produce a usable network: ") +
                    e.what());
    }
}

// --- persistence ---

std::string domain_config_to_json(const DomainConfig &c) {
    nlohmann::ordered_json j;
    j["grid_rows"] = {c.grid_rows.lo, c.grid_rows.hi};
    j["grid_cols"] = {c.grid_cols.lo, c.grid_cols.hi};
    j["lane_length_range"] = {c.lane_length_range.lo, c.lane_length_range.hi};
    j["approaches_per_intersection"] = {c.approaches_per_intersection.lo,
                                        c.approaches_per_intersection.hi};
    j["lanes_per_approach"] = {c.lanes_per_approach.lo, c.lanes_per_approach.hi};
    j["vehicle_pool"] = c.vehicle_pool;
    j["flow_count_range"] = {c.flow_count_range.lo, c.flow_count_range.hi};
    j["t_max"] = c.t_max;
    j["seed"] = c.seed;
    return j.dump(2) + "\n";
}

DomainConfig domain_config_from_json(const std::string &text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DomainConfig c;
    auto int_range = [&](const char *key, IntRange fallback) {
        if (!j.contains(key)) return fallback;
        return IntRange{j.at(key).at(0).get<int>(), j.at(key).at(1).get<int>()};
    };
    auto real_range = [&](const char *key, RealRange fallback) {
        if (!j.contains(key)) return fallback;
        return RealRange{j.at(key).at(0).get<double>(), j.at(key).at(1).get<double>()};
    };
    c.grid_rows = int_range("grid_rows", c.grid_rows);
    c.grid_cols = int_range("grid_cols", c.grid_cols);
    c.lane_length_range = real_range("lane_length_range", c.lane_length_range);
    c.approaches_per_intersection =
        int_range("approaches_per_intersection", c.approaches_per_intersection);
    c.lanes_per_approach = int_range("lanes_per_approach", c.lanes_per_approach);
    c.vehicle_pool = j.value("vehicle_pool", c.vehicle_pool);
    c.flow_count_range = int_range("flow_count_range", c.flow_count_range);
    c.t_max = j.value("t_max", c.t_max);
    c.seed = j.value("seed", c.seed);
    return c;
}

namespace {

std::string flows_to_json(const std::vector<FlowSpec> &flows) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const FlowSpec &f : flows) {
        nlohmann::ordered_json jf;
        jf["origin"] = f.origin;
        jf["destination"] = f.destination;
        jf["vehicle_count"] = f.vehicle_count;
        jf["alpha"] = f.alpha;
        jf["beta"] = f.beta;
        jf["departures"] = f.departures;
        j.push_back(jf);
    }
    return j.dump(2) + "\n";
}

std::vector<FlowSpec> flows_from_json(const std::string &text) {
    std::vector<FlowSpec> flows;
    for (const auto &jf : nlohmann::json::parse(text)) {
        FlowSpec f;
        f.origin = jf.at("origin").get<std::string>();
        f.destination = jf.at("destination").get<std::string>();
        f.vehicle_count = jf.at("vehicle_count").get<int>();
        f.alpha = jf.at("alpha").get<double>();
        f.beta = jf.at("beta").get<double>();
        f.departures = jf.at("departures").get<std::vector<double>>();
        flows.push_back(std::move(f));
    }
    return flows;
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

} // namespace

void save_scenario(const Scenario &scenario, const std::string &dir) {
    std::filesystem::create_directories(dir);
    write_file(dir + "/network.json", network_to_json(scenario.net.data()));
    write_file(dir + "/flows.json", flows_to_json(scenario.flows));
    write_file(dir + "/domain.json", domain_config_to_json(scenario.config));
}

Scenario load_scenario(const std::string &dir) {
    RoadNetwork net(network_from_json(read_file(dir + "/network.json")));
    auto flows = flows_from_json(read_file(dir + "/flows.json"));
    auto config = domain_config_from_json(read_file(dir + "/domain.json"));
    return Scenario{std::move(net), std::move(flows), std::move(config)};
}

// --- regularized incomplete beta ---

namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 1e-15;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete_beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(log_bt);
    if (x < (a + 1.0) / (a + b + 2.0))
        return bt * beta_continued_fraction(a, b, x) / a;
    return 1.0 - bt * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double beta_inverse_cdf(double a, double b, double p) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (incomplete_beta(a, b, mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace tsc
