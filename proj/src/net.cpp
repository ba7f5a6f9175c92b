#include "tsc/net.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tsc/util.hpp"

namespace tsc {

SignalState signal_from_code(int code) {
    switch (code) {
    case -1: return SignalState::Prohibited;
    case 0: return SignalState::Permitted;
    case 1: return SignalState::Protected;
    default: throw Error("unknown signal code " + std::to_string(code));
    }
}

namespace {

template <typename T>
std::map<std::string, std::size_t> index_by_id(const std::vector<T> &items,
                                               const char *kind,
                                               std::vector<Violation> &out) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!index.emplace(items[i].id, i).second)
            out.push_back({items[i].id, std::string("duplicate ") + kind + " id"});
    }
    return index;
}

} // namespace

std::vector<Violation> validate(const NetworkData &data) {
    std::vector<Violation> out;
    auto lanes = index_by_id(data.lanes, "lane", out);
    auto intersections = index_by_id(data.intersections, "intersection", out);
    auto movements = index_by_id(data.movements, "movement", out);
    index_by_id(data.phases, "phase", out);

    for (const Lane &lane : data.lanes) {
        if (!(lane.length_m > 0.0))
            out.push_back({lane.id, "lane length must be positive"});
        if (!(lane.speed_limit > 0.0))
            out.push_back({lane.id, "lane speed limit must be positive"});
        for (const auto &end : {lane.upstream, lane.downstream})
            if (end && !intersections.count(*end))
                out.push_back({lane.id, "lane references unknown intersection " + *end});
    }

    std::map<std::string, std::vector<const Movement *>> movements_by_owner;
    for (const Movement &m : data.movements) {
        bool refs_ok = true;
        if (!intersections.count(m.owner)) {
            out.push_back({m.id, "movement owner " + m.owner + " does not exist"});
            refs_ok = false;
        }
        for (const auto &lane_id : {m.in_lane, m.out_lane})
            if (!lanes.count(lane_id)) {
                out.push_back({m.id, "movement references unknown lane " + lane_id});
                refs_ok = false;
            }
        if (m.in_lane == m.out_lane)
            out.push_back({m.id, "movement in_lane equals out_lane"});
        if (refs_ok) {
            const Lane &in = data.lanes[lanes.at(m.in_lane)];
            const Lane &from = data.lanes[lanes.at(m.out_lane)];
            if (!in.downstream || *in.downstream != m.owner)
                out.push_back({m.id, "in_lane " + m.in_lane + " does not terminate at owner " + m.owner});
            if (!from.upstream || *from.upstream != m.owner)
                out.push_back({m.id, "out_lane " + m.out_lane + " does not originate at owner " + m.owner});
        }
        movements_by_owner[m.owner].push_back(&m);
    }

    for (const Phase &phase : data.phases) {
        if (!intersections.count(phase.owner))
            out.push_back({phase.id, "phase owner " + phase.owner + " does not exist"});
        const auto &owned = movements_by_owner[phase.owner];
        for (const Movement *m : owned)
            if (!phase.signal.count(m->id))
                out.push_back({phase.id, "phase missing signal entry for movement " + m->id});
        for (const auto &[mov_id, state] : phase.signal) {
            (void)state;
            if (!movements.count(mov_id))
                out.push_back({phase.id, "phase references unknown movement " + mov_id});
            else if (data.movements[movements.at(mov_id)].owner != phase.owner)
                out.push_back({phase.id, "phase signals foreign movement " + mov_id});
        }
        if (green_set(phase).empty())
            out.push_back({phase.id, "phase has no non-Prohibited movement"});
    }

    // connectivity: every lane reachable from at least one source lane by
    // lane-to-lane movement edges (sources count as reached)
    if (out.empty() && !data.lanes.empty()) {
        std::vector<std::vector<std::size_t>> succ(data.lanes.size());
        for (const Movement &m : data.movements)
            succ[lanes.at(m.in_lane)].push_back(lanes.at(m.out_lane));
        std::vector<char> reached(data.lanes.size(), 0);
        std::vector<std::size_t> stack;
        for (std::size_t i = 0; i < data.lanes.size(); ++i)
            if (!data.lanes[i].upstream) {
                reached[i] = 1;
                stack.push_back(i);
            }
        while (!stack.empty()) {
            std::size_t lane = stack.back();
            stack.pop_back();
            for (std::size_t next : succ[lane])
                if (!reached[next]) {
                    reached[next] = 1;
                    stack.push_back(next);
                }
        }
        for (std::size_t i = 0; i < data.lanes.size(); ++i)
            if (!reached[i])
                out.push_back({data.lanes[i].id, "lane not reachable from any source lane"});
    }
    return out;
}

std::set<std::string> green_set(const Phase &phase) {
    std::set<std::string> greens;
    for (const auto &[mov_id, state] : phase.signal)
        if (state != SignalState::Prohibited)
            greens.insert(mov_id);
    return greens;
}

double jaccard(const Phase &a, const Phase &b) {
    if (a.owner != b.owner)
        throw Error("jaccard of phases with different owners: " + a.id + " vs " + b.id);
    const auto ga = green_set(a);
    const auto gb = green_set(b);
    if (ga.empty() && gb.empty()) return 1.0;
    std::vector<std::string> inter, uni;
    std::set_intersection(ga.begin(), ga.end(), gb.begin(), gb.end(), std::back_inserter(inter));
    std::set_union(ga.begin(), ga.end(), gb.begin(), gb.end(), std::back_inserter(uni));
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

RoadNetwork::RoadNetwork(NetworkData data) : data_(std::move(data)) {
    auto violations = validate(data_);
    if (!violations.empty()) {
        std::ostringstream msg;
        msg << "invalid network (" << violations.size() << " violations):";
        for (const auto &v : violations)
            msg << "\n  [" << v.entity << "] " << v.message;
        throw Error(msg.str());
    }
    for (std::size_t i = 0; i < data_.lanes.size(); ++i)
        lane_by_id_[data_.lanes[i].id] = i;
    for (std::size_t i = 0; i < data_.intersections.size(); ++i)
        intersection_by_id_[data_.intersections[i].id] = i;
    for (std::size_t i = 0; i < data_.movements.size(); ++i)
        movement_by_id_[data_.movements[i].id] = i;
    for (std::size_t i = 0; i < data_.phases.size(); ++i)
        phase_by_id_[data_.phases[i].id] = i;

    const std::size_t n_lanes = data_.lanes.size();
    const std::size_t n_inter = data_.intersections.size();
    into_.resize(n_lanes);
    out_of_.resize(n_lanes);
    mov_of_.resize(n_inter);
    phase_of_.resize(n_inter);
    in_lanes_.resize(n_inter);
    out_lanes_.resize(n_inter);
    local_lanes_.resize(n_inter);

    for (std::size_t i = 0; i < data_.movements.size(); ++i) {
        const Movement &m = data_.movements[i];
        const std::size_t in = lane_by_id_.at(m.in_lane);
        const std::size_t out = lane_by_id_.at(m.out_lane);
        out_of_[in].push_back(i);
        into_[out].push_back(i);
        mov_of_[intersection_by_id_.at(m.owner)].push_back(i);
        mov_by_lanes_[{in, out}] = i;
    }
    for (std::size_t i = 0; i < data_.phases.size(); ++i)
        phase_of_[intersection_by_id_.at(data_.phases[i].owner)].push_back(i);
    for (std::size_t i = 0; i < n_lanes; ++i) {
        const Lane &lane = data_.lanes[i];
        if (lane.downstream)
            in_lanes_[intersection_by_id_.at(*lane.downstream)].push_back(i);
        else
            sinks_.push_back(i);
        if (lane.upstream)
            out_lanes_[intersection_by_id_.at(*lane.upstream)].push_back(i);
        else
            sources_.push_back(i);
    }
    for (std::size_t v = 0; v < n_inter; ++v) {
        std::set<std::size_t> locals(in_lanes_[v].begin(), in_lanes_[v].end());
        locals.insert(out_lanes_[v].begin(), out_lanes_[v].end());
        local_lanes_[v].assign(locals.begin(), locals.end());
    }
}

namespace {

std::size_t lookup(const std::map<std::string, std::size_t> &index,
                   const std::string &id, const char *kind) {
    auto it = index.find(id);
    if (it == index.end())
        throw Error(std::string("unknown ") + kind + " id: " + id);
    return it->second;
}

} // namespace

std::size_t RoadNetwork::lane_index(const std::string &id) const {
    return lookup(lane_by_id_, id, "lane");
}
std::size_t RoadNetwork::intersection_index(const std::string &id) const {
    return lookup(intersection_by_id_, id, "intersection");
}
std::size_t RoadNetwork::movement_index(const std::string &id) const {
    return lookup(movement_by_id_, id, "movement");
}
std::size_t RoadNetwork::phase_index(const std::string &id) const {
    return lookup(phase_by_id_, id, "phase");
}

const std::vector<std::size_t> &RoadNetwork::movements_into(std::size_t lane) const {
    return into_.at(lane);
}
const std::vector<std::size_t> &RoadNetwork::movements_out_of(std::size_t lane) const {
    return out_of_.at(lane);
}

std::set<std::string> RoadNetwork::movements_into(const std::string &lane_id) const {
    std::set<std::string> ids;
    for (std::size_t m : movements_into(lane_index(lane_id)))
        ids.insert(data_.movements[m].id);
    return ids;
}

std::set<std::string> RoadNetwork::movements_out_of(const std::string &lane_id) const {
    std::set<std::string> ids;
    for (std::size_t m : movements_out_of(lane_index(lane_id)))
        ids.insert(data_.movements[m].id);
    return ids;
}

const std::vector<std::size_t> &RoadNetwork::movements_of(std::size_t intersection) const {
    return mov_of_.at(intersection);
}
const std::vector<std::size_t> &RoadNetwork::phases_of(std::size_t intersection) const {
    return phase_of_.at(intersection);
}
const std::vector<std::size_t> &RoadNetwork::in_lanes_of(std::size_t intersection) const {
    return in_lanes_.at(intersection);
}
const std::vector<std::size_t> &RoadNetwork::out_lanes_of(std::size_t intersection) const {
    return out_lanes_.at(intersection);
}
const std::vector<std::size_t> &RoadNetwork::local_lanes_of(std::size_t intersection) const {
    return local_lanes_.at(intersection);
}

std::optional<std::size_t> RoadNetwork::movement_between(std::size_t from, std::size_t to) const {
    auto it = mov_by_lanes_.find({from, to});
    if (it == mov_by_lanes_.end()) return std::nullopt;
    return it->second;
}

int RoadNetwork::gamma(std::size_t movement, std::size_t phase) const {
    const Phase &p = data_.phases.at(phase);
    const Movement &m = data_.movements.at(movement);
    return signal_code(p.signal.at(m.id));
}

// --- JSON ---

std::string network_to_json(const NetworkData &data) {
    nlohmann::ordered_json j;
    j["lanes"] = nlohmann::ordered_json::array();
    for (const Lane &lane : data.lanes) {
        nlohmann::ordered_json jl;
        jl["id"] = lane.id;
        jl["length_m"] = lane.length_m;
        jl["speed_limit"] = lane.speed_limit;
        jl["upstream"] = lane.upstream ? nlohmann::ordered_json(*lane.upstream)
                                       : nlohmann::ordered_json(nullptr);
        jl["downstream"] = lane.downstream ? nlohmann::ordered_json(*lane.downstream)
                                           : nlohmann::ordered_json(nullptr);
        j["lanes"].push_back(jl);
    }
    j["intersections"] = nlohmann::ordered_json::array();
    for (const Intersection &v : data.intersections)
        j["intersections"].push_back({{"id", v.id}});
    j["movements"] = nlohmann::ordered_json::array();
    for (const Movement &m : data.movements)
        j["movements"].push_back({{"id", m.id},
                                  {"in_lane", m.in_lane},
                                  {"out_lane", m.out_lane},
                                  {"owner", m.owner}});
    j["phases"] = nlohmann::ordered_json::array();
    for (const Phase &p : data.phases) {
        nlohmann::ordered_json sig;
        for (const auto &[mov_id, state] : p.signal)
            sig[mov_id] = signal_code(state);
        j["phases"].push_back({{"id", p.id}, {"owner", p.owner}, {"signal", sig}});
    }
    return j.dump(2) + "\n";
}

NetworkData network_from_json(const std::string &json_text) {
    NetworkData data;
    nlohmann::json j = nlohmann::json::parse(json_text);
    for (const auto &jl : j.at("lanes")) {
        Lane lane;
        lane.id = jl.at("id").get<std::string>();
        lane.length_m = jl.at("length_m").get<double>();
        lane.speed_limit = jl.at("speed_limit").get<double>();
        if (!jl.at("upstream").is_null())
            lane.upstream = jl.at("upstream").get<std::string>();
        if (!jl.at("downstream").is_null())
            lane.downstream = jl.at("downstream").get<std::string>();
        data.lanes.push_back(std::move(lane));
    }
    for (const auto &jv : j.at("intersections"))
        data.intersections.push_back({jv.at("id").get<std::string>()});
    for (const auto &jm : j.at("movements"))
        data.movements.push_back({jm.at("id").get<std::string>(),
                                  jm.at("in_lane").get<std::string>(),
                                  jm.at("out_lane").get<std::string>(),
                                  jm.at("owner").get<std::string>()});
    for (const auto &jp : j.at("phases")) {
        Phase p;
        p.id = jp.at("id").get<std::string>();
        p.owner = jp.at("owner").get<std::string>();
        for (const auto &[mov_id, code] : jp.at("signal").items())
            p.signal[mov_id] = signal_from_code(code.get<int>());
        data.phases.push_back(std::move(p));
    }
    return data;
}

void save_network(const NetworkData &data, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write network file: " + path);
    out << network_to_json(data);
}

RoadNetwork load_network(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read network file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return RoadNetwork(network_from_json(buf.str()));
}

} // namespace tsc
