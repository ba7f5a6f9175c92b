#pragma once

#include <string>
#include <vector>

#include "tsc/net.hpp"

namespace tsc::testfix {

// Single 4-way intersection "v": 8 boundary lanes (in/out per side), the
// twelve left/through/right movements, and the 4-phase scheme used across
// the tests. Lane length 100 m unless overridden.
inline NetworkData four_way(double lane_length = 100.0) {
    NetworkData net;
    net.intersections.push_back({"v"});
    const char *sides[4] = {"N", "E", "S", "W"};
    for (const char *side : sides) {
        net.lanes.push_back(
            {std::string("in_") + side, lane_length, 13.89, std::nullopt, "v"});
        net.lanes.push_back(
            {std::string("out_") + side, lane_length, 13.89, "v", std::nullopt});
    }
    // (from, to, turn): left exit is one step clockwise from the entry side
    struct Spec {
        const char *from;
        const char *to;
    };
    const Spec lefts[4] = {{"N", "E"}, {"E", "S"}, {"S", "W"}, {"W", "N"}};
    const Spec throughs[4] = {{"N", "S"}, {"E", "W"}, {"S", "N"}, {"W", "E"}};
    const Spec rights[4] = {{"N", "W"}, {"E", "N"}, {"S", "E"}, {"W", "S"}};
    auto add_movements = [&](const Spec *specs) {
        for (int i = 0; i < 4; ++i)
            net.movements.push_back({std::string("m_") + specs[i].from + "_" + specs[i].to,
                                     std::string("in_") + specs[i].from,
                                     std::string("out_") + specs[i].to, "v"});
    };
    add_movements(lefts);
    add_movements(throughs);
    add_movements(rights);

    auto make_phase = [&](const std::string &id,
                          const std::vector<std::pair<std::string, SignalState>> &greens) {
        Phase p;
        p.id = id;
        p.owner = "v";
        for (const Movement &m : net.movements) p.signal[m.id] = SignalState::Prohibited;
        for (const auto &[mov, state] : greens) p.signal[mov] = state;
        net.phases.push_back(std::move(p));
    };
    make_phase("p_ns", {{"m_N_S", SignalState::Protected},
                        {"m_S_N", SignalState::Protected},
                        {"m_N_W", SignalState::Permitted},
                        {"m_S_E", SignalState::Permitted}});
    make_phase("p_nsl", {{"m_N_E", SignalState::Protected},
                         {"m_S_W", SignalState::Protected}});
    make_phase("p_ew", {{"m_E_W", SignalState::Protected},
                        {"m_W_E", SignalState::Protected},
                        {"m_E_N", SignalState::Permitted},
                        {"m_W_S", SignalState::Permitted}});
    make_phase("p_ewl", {{"m_E_S", SignalState::Protected},
                         {"m_W_N", SignalState::Protected}});
    return net;
}

// Two signalized intersections A and B joined by a two-way link road.
// Each direction is one through movement per intersection.
inline NetworkData corridor(double lane_length = 100.0) {
    NetworkData net;
    net.intersections.push_back({"A"});
    net.intersections.push_back({"B"});
    auto lane = [&](const std::string &id, std::optional<std::string> up,
                    std::optional<std::string> down) {
        net.lanes.push_back({id, lane_length, 13.89, std::move(up), std::move(down)});
    };
    lane("src_A", std::nullopt, "A");
    lane("link_AB", "A", "B");
    lane("snk_B", "B", std::nullopt);
    lane("src_B", std::nullopt, "B");
    lane("link_BA", "B", "A");
    lane("snk_A", "A", std::nullopt);
    net.movements.push_back({"m_A_fwd", "src_A", "link_AB", "A"});
    net.movements.push_back({"m_A_rev", "link_BA", "snk_A", "A"});
    net.movements.push_back({"m_B_fwd", "link_AB", "snk_B", "B"});
    net.movements.push_back({"m_B_rev", "src_B", "link_BA", "B"});
    Phase pa{"p_A", "A", {{"m_A_fwd", SignalState::Protected},
                          {"m_A_rev", SignalState::Protected}}};
    Phase pb{"p_B", "B", {{"m_B_fwd", SignalState::Protected},
                          {"m_B_rev", SignalState::Protected}}};
    net.phases.push_back(pa);
    net.phases.push_back(pb);
    return net;
}

// A mid lane fed by two movements and drained by three.
inline NetworkData fan_2_in_3_out(double lane_length = 100.0) {
    NetworkData net;
    net.intersections.push_back({"A"});
    net.intersections.push_back({"B"});
    auto lane = [&](const std::string &id, std::optional<std::string> up,
                    std::optional<std::string> down) {
        net.lanes.push_back({id, lane_length, 13.89, std::move(up), std::move(down)});
    };
    lane("i1", std::nullopt, "A");
    lane("i2", std::nullopt, "A");
    lane("mid", "A", "B");
    lane("o1", "B", std::nullopt);
    lane("o2", "B", std::nullopt);
    lane("o3", "B", std::nullopt);
    net.movements.push_back({"mA1", "i1", "mid", "A"});
    net.movements.push_back({"mA2", "i2", "mid", "A"});
    net.movements.push_back({"mB1", "mid", "o1", "B"});
    net.movements.push_back({"mB2", "mid", "o2", "B"});
    net.movements.push_back({"mB3", "mid", "o3", "B"});
    Phase pa{"p_A", "A", {{"mA1", SignalState::Protected}, {"mA2", SignalState::Protected}}};
    Phase pb{"p_B", "B", {{"mB1", SignalState::Protected},
                          {"mB2", SignalState::Protected},
                          {"mB3", SignalState::Protected}}};
    net.phases.push_back(pa);
    net.phases.push_back(pb);
    return net;
}

} // namespace tsc::testfix
