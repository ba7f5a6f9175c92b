#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <vector>

#include "tsc/net.hpp"

namespace tsc {

// Fixed simulation constants. Signal interval durations follow the standard
// 3 s yellow-change / 2 s red-clearance scheme with a 10 s action period.
namespace simconst {
inline constexpr double yellow_s = 3.0;
inline constexpr double all_red_s = 2.0;
inline constexpr double min_action_period_s = 10.0;
inline constexpr double jam_gap_m = 7.5;       // minimum bumper spacing
inline constexpr double max_accel = 3.0;       // m/s^2
inline constexpr double stop_line_m = 1.0;     // crossing threshold
inline constexpr double standing_speed = 0.1;  // m/s
} // namespace simconst

struct Vehicle {
    std::size_t id = 0;
    std::vector<std::size_t> route; // lane indices, in driving order
    std::size_t route_index = 0;
    double pos_m = 0.0;  // distance to the downstream intersection centre
    double speed = 0.0;  // m/s
    double depart_time = 0.0;
    std::optional<double> arrive_time;
    double waiting_s = 0.0; // cumulative time below the standing threshold

    std::size_t lane() const { return route[route_index]; }
    bool on_final_lane() const { return route_index + 1 == route.size(); }
};

class SignalController {
public:
    enum class Interval { Green, Yellow, AllRed };

    SignalController(std::size_t intersection, std::size_t active_phase)
        : intersection_(intersection), active_phase_(active_phase) {}

    std::size_t intersection() const { return intersection_; }
    std::size_t active_phase() const { return active_phase_; }
    Interval interval() const { return interval_; }
    double interval_elapsed() const { return interval_elapsed_; }
    std::optional<std::size_t> pending_phase() const { return pending_phase_; }
    std::optional<double> last_action_time() const { return last_action_time_; }

    // Schedules a phase switch. Same phase is a no-op; a different phase
    // enters Yellow (3 s) then AllRed (2 s) then Green on the new phase.
    // Errors on foreign phases and on actions closer than 10 s apart.
    void apply_action(const RoadNetwork &net, std::size_t phase, double clock);

    void advance(double dt);

    // Whether a movement may cross the stop line right now. During
    // Yellow/AllRed only movements green in both the old and the pending
    // phase stay passable.
    bool passable(const RoadNetwork &net, std::size_t movement) const;

private:
    std::size_t intersection_;
    std::size_t active_phase_;
    Interval interval_ = Interval::Green;
    double interval_elapsed_ = 0.0;
    std::optional<std::size_t> pending_phase_;
    std::optional<double> last_action_time_;
};

struct TransferEvent {
    std::size_t vehicle;
    std::size_t movement;
};

// Discrete-time point-vehicle simulator on the 1-D lane coordinate spaces.
// Single-threaded; independent instances may run concurrently.
class Simulation {
public:
    // Scheduled vehicles must carry route and depart_time; they are injected
    // once their departure is due and the entry lane has headway.
    Simulation(const RoadNetwork &net, std::vector<Vehicle> scheduled);

    void step(double dt);
    void apply_action(std::size_t intersection, std::size_t phase);

    // Drops a vehicle directly onto its current route lane, keeping the
    // per-lane ordering; counts as an injected departure. For building
    // states by hand.
    std::size_t place_vehicle(std::vector<std::size_t> route, std::size_t route_index,
                              double pos_m, double speed);

    double clock() const { return clock_; }
    const RoadNetwork &network() const { return *net_; }
    const std::vector<Vehicle> &vehicles() const { return vehicles_; }
    const std::vector<SignalController> &controllers() const { return controllers_; }
    const SignalController &controller(std::size_t intersection) const {
        return controllers_.at(intersection);
    }
    // vehicle ids on a lane ordered by position, closest to the centre first
    const std::deque<std::size_t> &lane_vehicles(std::size_t lane) const {
        return lane_vehicles_.at(lane);
    }

    std::size_t injected_count() const { return injected_; }
    std::size_t arrived_count() const { return arrived_; }
    std::size_t on_network_count() const { return injected_ - arrived_; }

    const std::vector<TransferEvent> &last_transfers() const { return last_transfers_; }
    std::size_t crossings_at(std::size_t intersection) const;

    std::uint64_t state_hash() const;

private:
    struct Plan {
        double new_speed = 0.0;
        bool may_cross = false;
    };

    bool passable_next(const Vehicle &v) const;
    void advance_signals(double dt);
    void inject_departures();
    void move_vehicles(double dt);
    void process_transfers();

    const RoadNetwork *net_;
    double clock_ = 0.0;
    std::vector<Vehicle> vehicles_;
    std::vector<std::deque<std::size_t>> lane_vehicles_;
    std::vector<SignalController> controllers_;
    std::vector<std::size_t> schedule_; // vehicle ids sorted by depart time
    std::size_t schedule_head_ = 0;
    std::deque<std::size_t> blocked_departures_;
    std::size_t injected_ = 0;
    std::size_t arrived_ = 0;
    std::vector<TransferEvent> last_transfers_;
    std::vector<char> reserved_entry_; // per lane, one admission per step
    std::vector<char> entry_ok_;       // per vehicle, holds this step's reservation
};

// standing = speed below simconst::standing_speed
std::size_t standing_vehicle_count(const Simulation &sim);
std::vector<std::size_t> standing_per_lane(const Simulation &sim);

// Minimum-total-length lane sequence from origin to destination respecting
// movement connectivity; the origin lane itself contributes no cost.
// Returns nullopt when unreachable.
std::optional<std::vector<std::size_t>> shortest_path(const RoadNetwork &net,
                                                      std::size_t origin,
                                                      std::size_t destination);

// trajectory CSV rows (time_s, vehicle_id, lane_id, pos_m, speed)
void write_trajectory_header(std::ostream &out);
void append_trajectory(const Simulation &sim, std::ostream &out);

} // namespace tsc
