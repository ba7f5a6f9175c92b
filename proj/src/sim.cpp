#include "tsc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "tsc/util.hpp"

namespace tsc {

void SignalController::apply_action(const RoadNetwork &net, std::size_t phase,
                                    double clock) {
    const Phase &p = net.phases().at(phase);
    if (net.intersection_index(p.owner) != intersection_)
        throw Error("phase " + p.id + " does not belong to intersection " +
                    net.intersections()[intersection_].id);
    if (pending_phase_)
        throw Error("action applied mid transition at intersection " +
                    net.intersections()[intersection_].id);
    if (last_action_time_ &&
        clock - *last_action_time_ < simconst::min_action_period_s - 1e-9)
        throw Error("action applied " + std::to_string(clock - *last_action_time_) +
                    " s after the previous one (minimum 10 s)");
    last_action_time_ = clock;
    if (phase == active_phase_) return;
    interval_ = Interval::Yellow;
    interval_elapsed_ = 0.0;
    pending_phase_ = phase;
}

void SignalController::advance(double dt) {
    interval_elapsed_ += dt;
    while (true) {
        if (interval_ == Interval::Yellow && interval_elapsed_ >= simconst::yellow_s - 1e-9) {
            interval_ = Interval::AllRed;
            interval_elapsed_ -= simconst::yellow_s;
        } else if (interval_ == Interval::AllRed &&
                   interval_elapsed_ >= simconst::all_red_s - 1e-9) {
            active_phase_ = *pending_phase_;
            pending_phase_.reset();
            interval_ = Interval::Green;
            interval_elapsed_ -= simconst::all_red_s;
        } else {
            break;
        }
    }
}

bool SignalController::passable(const RoadNetwork &net, std::size_t movement) const {
    const bool active_green = net.gamma(movement, active_phase_) != signal_code(SignalState::Prohibited);
    if (interval_ == Interval::Green) return active_green;
    const bool pending_green =
        net.gamma(movement, *pending_phase_) != signal_code(SignalState::Prohibited);
    return active_green && pending_green;
}

Simulation::Simulation(const RoadNetwork &net, std::vector<Vehicle> scheduled)
    : net_(&net), vehicles_(std::move(scheduled)) {
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
        Vehicle &v = vehicles_[i];
        v.id = i;
        v.route_index = 0;
        v.arrive_time.reset();
        if (v.route.empty()) throw Error("scheduled vehicle with empty route");
        for (std::size_t k = 0; k + 1 < v.route.size(); ++k)
            if (!net.movement_between(v.route[k], v.route[k + 1]))
                throw Error("route of vehicle " + std::to_string(i) +
                            " has no movement between consecutive lanes");
    }
    lane_vehicles_.resize(net.lanes().size());
    reserved_entry_.resize(net.lanes().size(), 0);
    for (std::size_t v = 0; v < net.intersections().size(); ++v) {
        if (net.phases_of(v).empty())
            throw Error("intersection " + net.intersections()[v].id + " has no phases");
        controllers_.emplace_back(v, net.phases_of(v).front());
    }
    schedule_.resize(vehicles_.size());
    for (std::size_t i = 0; i < schedule_.size(); ++i) schedule_[i] = i;
    std::stable_sort(schedule_.begin(), schedule_.end(), [&](std::size_t a, std::size_t b) {
        return vehicles_[a].depart_time < vehicles_[b].depart_time;
    });
}

void Simulation::apply_action(std::size_t intersection, std::size_t phase) {
    controllers_.at(intersection).apply_action(*net_, phase, clock_);
}

std::size_t Simulation::place_vehicle(std::vector<std::size_t> route,
                                      std::size_t route_index, double pos_m,
                                      double speed) {
    if (route_index >= route.size()) throw Error("place_vehicle: route index out of range");
    Vehicle v;
    v.id = vehicles_.size();
    v.route = std::move(route);
    v.route_index = route_index;
    v.pos_m = pos_m;
    v.speed = speed;
    v.depart_time = clock_;
    const std::size_t lane = v.lane();
    const Lane &l = net_->lanes().at(lane);
    if (!(pos_m > 0.0) || pos_m > l.length_m)
        throw Error("place_vehicle: position outside (0, length]");
    auto &queue = lane_vehicles_[lane];
    auto it = queue.begin();
    while (it != queue.end() && vehicles_[*it].pos_m < pos_m) ++it;
    queue.insert(it, v.id);
    vehicles_.push_back(std::move(v));
    ++injected_;
    return vehicles_.size() - 1;
}

bool Simulation::passable_next(const Vehicle &v) const {
    const std::size_t lane = v.lane();
    const std::size_t next = v.route[v.route_index + 1];
    const auto movement = net_->movement_between(lane, next);
    const Lane &l = net_->lanes()[lane];
    const std::size_t owner = net_->intersection_index(*l.downstream);
    return controllers_[owner].passable(*net_, *movement);
}

void Simulation::advance_signals(double dt) {
    for (SignalController &c : controllers_) c.advance(dt);
}

void Simulation::inject_departures() {
    // carry over previously blocked departures, then newly due ones
    std::deque<std::size_t> due = std::move(blocked_departures_);
    blocked_departures_.clear();
    while (schedule_head_ < schedule_.size() &&
           vehicles_[schedule_[schedule_head_]].depart_time <= clock_ + 1e-9) {
        due.push_back(schedule_[schedule_head_]);
        ++schedule_head_;
    }
    for (std::size_t id : due) {
        Vehicle &v = vehicles_[id];
        const std::size_t lane = v.route.front();
        const Lane &l = net_->lanes()[lane];
        const auto &occupants = lane_vehicles_[lane];
        double gap = l.length_m;
        if (!occupants.empty())
            gap = l.length_m - vehicles_[occupants.back()].pos_m;
        if (gap < simconst::jam_gap_m) {
            blocked_departures_.push_back(id);
            continue;
        }
        v.pos_m = l.length_m;
        v.speed = std::min(l.speed_limit, std::max(0.0, gap - simconst::jam_gap_m));
        lane_vehicles_[lane].push_back(id);
        ++injected_;
    }
}

void Simulation::move_vehicles(double dt) {
    constexpr double inf = std::numeric_limits<double>::infinity();

    // One lane entry per step: reserve target lanes for lead vehicles that
    // can reach the stop line, in lane order. Unreserved leads are held and
    // may not cross even if they coast to the line with residual speed.
    std::fill(reserved_entry_.begin(), reserved_entry_.end(), 0);
    entry_ok_.assign(vehicles_.size(), 0);
    for (std::size_t lane = 0; lane < lane_vehicles_.size(); ++lane) {
        if (lane_vehicles_[lane].empty()) continue;
        Vehicle &lead = vehicles_[lane_vehicles_[lane].front()];
        if (lead.on_final_lane()) continue;
        const double max_reach =
            lead.pos_m - (lead.speed + simconst::max_accel * dt) * dt;
        if (max_reach > simconst::stop_line_m) continue;
        if (!passable_next(lead)) continue;
        const std::size_t target = lead.route[lead.route_index + 1];
        if (reserved_entry_[target]) continue;
        const Lane &tl = net_->lanes()[target];
        double rear_gap = tl.length_m;
        if (!lane_vehicles_[target].empty())
            rear_gap = tl.length_m - vehicles_[lane_vehicles_[target].back()].pos_m;
        if (rear_gap < simconst::jam_gap_m) continue;
        reserved_entry_[target] = 1;
        entry_ok_[lead.id] = 1;
    }

    // Parallel update against step-start leader positions: the safe-gap rule
    // (gap - jam_gap)/dt keeps order and headway under any leader motion.
    for (std::size_t lane = 0; lane < lane_vehicles_.size(); ++lane) {
        const auto &queue = lane_vehicles_[lane];
        const Lane &l = net_->lanes()[lane];
        double leader_pos = -inf; // no leader
        for (std::size_t k = 0; k < queue.size(); ++k) {
            Vehicle &v = vehicles_[queue[k]];
            double hard = l.speed_limit;
            if (k > 0)
                hard = std::min(hard, (v.pos_m - leader_pos - simconst::jam_gap_m) / dt);
            const bool held = !v.on_final_lane() &&
                              (!passable_next(v) || (k == 0 && !entry_ok_[v.id]));
            if (held)
                hard = std::min(hard, (v.pos_m - simconst::stop_line_m) / dt);
            hard = std::max(0.0, hard);
            double desired = std::clamp(std::min(l.speed_limit, hard),
                                        v.speed - simconst::max_accel * dt,
                                        v.speed + simconst::max_accel * dt);
            leader_pos = v.pos_m;
            v.speed = std::max(0.0, std::min(desired, hard));
            v.pos_m -= v.speed * dt;
        }
    }
}

void Simulation::process_transfers() {
    last_transfers_.clear();
    for (std::size_t lane = 0; lane < lane_vehicles_.size(); ++lane) {
        if (lane_vehicles_[lane].empty()) continue;
        const std::size_t id = lane_vehicles_[lane].front();
        Vehicle &v = vehicles_[id];
        if (v.pos_m > simconst::stop_line_m || v.speed <= 0.0) continue;
        if (!v.on_final_lane() && !entry_ok_[id]) continue;
        if (v.on_final_lane()) {
            v.arrive_time = clock_;
            lane_vehicles_[lane].pop_front();
            ++arrived_;
            continue;
        }
        const std::size_t next = v.route[v.route_index + 1];
        const auto movement = net_->movement_between(lane, next);
        lane_vehicles_[lane].pop_front();
        v.route_index += 1;
        v.pos_m = net_->lanes()[next].length_m;
        v.speed = std::min(v.speed, net_->lanes()[next].speed_limit);
        lane_vehicles_[next].push_back(id);
        last_transfers_.push_back({id, *movement});
    }
}

void Simulation::step(double dt) {
    if (!(dt > 0.0)) throw Error("step requires dt > 0");
    clock_ += dt;
    advance_signals(dt);
    inject_departures();
    move_vehicles(dt);
    process_transfers();
    for (auto &queue : lane_vehicles_)
        for (std::size_t id : queue)
            if (vehicles_[id].speed < simconst::standing_speed)
                vehicles_[id].waiting_s += dt;
}

std::size_t Simulation::crossings_at(std::size_t intersection) const {
    std::size_t n = 0;
    for (const TransferEvent &e : last_transfers_)
        if (net_->intersection_index(net_->movements()[e.movement].owner) == intersection)
            ++n;
    return n;
}

std::uint64_t Simulation::state_hash() const {
    std::uint64_t h = fnv1a_init();
    h = fnv1a_add(h, clock_);
    for (std::size_t lane = 0; lane < lane_vehicles_.size(); ++lane) {
        h = fnv1a_add(h, static_cast<std::uint64_t>(lane));
        for (std::size_t id : lane_vehicles_[lane]) {
            const Vehicle &v = vehicles_[id];
            h = fnv1a_add(h, static_cast<std::uint64_t>(id));
            h = fnv1a_add(h, v.pos_m);
            h = fnv1a_add(h, v.speed);
        }
    }
    for (const SignalController &c : controllers_) {
        h = fnv1a_add(h, static_cast<std::uint64_t>(c.active_phase()));
        h = fnv1a_add(h, static_cast<std::uint64_t>(c.interval()));
        h = fnv1a_add(h, c.interval_elapsed());
        h = fnv1a_add(h, static_cast<std::uint64_t>(
                             c.pending_phase() ? *c.pending_phase() + 1 : 0));
    }
    h = fnv1a_add(h, static_cast<std::uint64_t>(injected_));
    h = fnv1a_add(h, static_cast<std::uint64_t>(arrived_));
    return h;
}

std::size_t standing_vehicle_count(const Simulation &sim) {
    std::size_t n = 0;
    for (std::size_t lane = 0; lane < sim.network().lanes().size(); ++lane)
        for (std::size_t id : sim.lane_vehicles(lane))
            if (sim.vehicles()[id].speed < simconst::standing_speed) ++n;
    return n;
}

std::vector<std::size_t> standing_per_lane(const Simulation &sim) {
    std::vector<std::size_t> counts(sim.network().lanes().size(), 0);
    for (std::size_t lane = 0; lane < counts.size(); ++lane)
        for (std::size_t id : sim.lane_vehicles(lane))
            if (sim.vehicles()[id].speed < simconst::standing_speed) ++counts[lane];
    return counts;
}

std::optional<std::vector<std::size_t>> shortest_path(const RoadNetwork &net,
                                                      std::size_t origin,
                                                      std::size_t destination) {
    const std::size_t n = net.lanes().size();
    if (origin >= n || destination >= n) throw Error("shortest_path: unknown lane index");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, inf);
    std::vector<std::size_t> parent(n, n);
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
    dist[origin] = 0.0;
    frontier.push({0.0, origin});
    while (!frontier.empty()) {
        auto [d, lane] = frontier.top();
        frontier.pop();
        if (d > dist[lane]) continue;
        if (lane == destination) break;
        for (std::size_t m : net.movements_out_of(lane)) {
            const std::size_t next = net.lane_index(net.movements()[m].out_lane);
            const double nd = d + net.lanes()[next].length_m;
            if (nd < dist[next]) {
                dist[next] = nd;
                parent[next] = lane;
                frontier.push({nd, next});
            }
        }
    }
    if (dist[destination] == inf) return std::nullopt;
    std::vector<std::size_t> path;
    for (std::size_t lane = destination;; lane = parent[lane]) {
        path.push_back(lane);
        if (lane == origin) break;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

void write_trajectory_header(std::ostream &out) {
    out << "time_s,vehicle_id,lane_id,pos_m,speed\n";
}

void append_trajectory(const Simulation &sim, std::ostream &out) {
    for (std::size_t lane = 0; lane < sim.network().lanes().size(); ++lane)
        for (std::size_t id : sim.lane_vehicles(lane)) {
            const Vehicle &v = sim.vehicles()[id];
            out << format_g6(sim.clock()) << ',' << id << ','
                << sim.network().lanes()[lane].id << ',' << format_g6(v.pos_m) << ','
                << format_g6(v.speed) << '\n';
        }
}

} // namespace tsc
