#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tsc {

// Right-of-way of a movement during a phase. Codes are fixed so that more
// right-of-way is monotone in the code.
enum class SignalState : int {
    Prohibited = -1,
    Permitted = 0,
    Protected = 1,
};

inline int signal_code(SignalState s) { return static_cast<int>(s); }
SignalState signal_from_code(int code);

struct Lane {
    std::string id;
    double length_m = 0.0;
    double speed_limit = 13.89; // m/s
    // Intersections this lane connects. A lane's coordinate space is
    // (0, length_m], origin at the downstream intersection's centre.
    std::optional<std::string> upstream;
    std::optional<std::string> downstream;
};

struct Movement {
    std::string id;
    std::string in_lane;
    std::string out_lane;
    std::string owner; // intersection where in_lane terminates
};

struct Phase {
    std::string id;
    std::string owner;
    // movement id -> state, total over the owner's movements
    std::map<std::string, SignalState> signal;
};

struct Intersection {
    std::string id;
};

// Raw network description, as read from or written to disk. May be invalid;
// validate() reports violations as data.
struct NetworkData {
    std::vector<Intersection> intersections;
    std::vector<Lane> lanes;
    std::vector<Movement> movements;
    std::vector<Phase> phases;
};

struct Violation {
    std::string entity; // id of the offending lane/movement/phase/intersection
    std::string message;
};

std::vector<Violation> validate(const NetworkData &data);

// Movements that are non-Prohibited during the phase.
std::set<std::string> green_set(const Phase &phase);

// Green-set overlap of two phases of the same intersection, in [0, 1].
// Both green sets empty degenerates to 1 (identical emptiness).
double jaccard(const Phase &a, const Phase &b);

// Validated, index-resolved road network. Immutable after construction.
class RoadNetwork {
public:
    // Throws Error listing every violation if the data fails validate().
    explicit RoadNetwork(NetworkData data);

    const NetworkData &data() const { return data_; }
    const std::vector<Lane> &lanes() const { return data_.lanes; }
    const std::vector<Movement> &movements() const { return data_.movements; }
    const std::vector<Phase> &phases() const { return data_.phases; }
    const std::vector<Intersection> &intersections() const { return data_.intersections; }

    std::size_t lane_index(const std::string &id) const;
    std::size_t intersection_index(const std::string &id) const;
    std::size_t movement_index(const std::string &id) const;
    std::size_t phase_index(const std::string &id) const;

    // coordination-graph connectivity of a lane
    const std::vector<std::size_t> &movements_into(std::size_t lane) const;
    const std::vector<std::size_t> &movements_out_of(std::size_t lane) const;
    std::set<std::string> movements_into(const std::string &lane_id) const;
    std::set<std::string> movements_out_of(const std::string &lane_id) const;

    // per-intersection structure
    const std::vector<std::size_t> &movements_of(std::size_t intersection) const;
    const std::vector<std::size_t> &phases_of(std::size_t intersection) const;
    const std::vector<std::size_t> &in_lanes_of(std::size_t intersection) const;
    const std::vector<std::size_t> &out_lanes_of(std::size_t intersection) const;
    // in-lanes then out-lanes, deduplicated, in network lane order; the
    // deterministic local lane ordering used by positional encodings
    const std::vector<std::size_t> &local_lanes_of(std::size_t intersection) const;

    // movement from lane `from` to lane `to`, if one exists
    std::optional<std::size_t> movement_between(std::size_t from, std::size_t to) const;

    // lanes with no upstream (sources) / no downstream (sinks)
    const std::vector<std::size_t> &source_lanes() const { return sources_; }
    const std::vector<std::size_t> &sink_lanes() const { return sinks_; }

    int gamma(std::size_t movement, std::size_t phase) const;

private:
    NetworkData data_;
    std::map<std::string, std::size_t> lane_by_id_;
    std::map<std::string, std::size_t> intersection_by_id_;
    std::map<std::string, std::size_t> movement_by_id_;
    std::map<std::string, std::size_t> phase_by_id_;
    std::vector<std::vector<std::size_t>> into_;      // per lane
    std::vector<std::vector<std::size_t>> out_of_;    // per lane
    std::vector<std::vector<std::size_t>> mov_of_;    // per intersection
    std::vector<std::vector<std::size_t>> phase_of_;  // per intersection
    std::vector<std::vector<std::size_t>> in_lanes_;  // per intersection
    std::vector<std::vector<std::size_t>> out_lanes_; // per intersection
    std::vector<std::vector<std::size_t>> local_lanes_;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> mov_by_lanes_;
    std::vector<std::size_t> sources_;
    std::vector<std::size_t> sinks_;
};

// JSON (de)serialization. load_network rejects files failing validate().
std::string network_to_json(const NetworkData &data);
NetworkData network_from_json(const std::string &json_text);
void save_network(const NetworkData &data, const std::string &path);
RoadNetwork load_network(const std::string &path);

} // namespace tsc
