#include <algorithm>

#include "doctest.h"
#include "fixtures.hpp"
#include "tsc/net.hpp"
#include "tsc/rng.hpp"
#include "tsc/util.hpp"

using namespace tsc;

namespace {

bool mentions(const std::vector<Violation> &violations, const std::string &entity) {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation &v) { return v.entity == entity; });
}

Phase phase_of(const std::string &id,
               const std::vector<std::pair<std::string, SignalState>> &signals) {
    Phase p;
    p.id = id;
    p.owner = "v";
    for (const auto &[m, s] : signals) p.signal[m] = s;
    return p;
}

} // namespace

TEST_CASE("validate accepts the well-formed 4-way fixture") {
    CHECK(validate(testfix::four_way()).empty());
    CHECK(validate(testfix::corridor()).empty());
}

TEST_CASE("validate flags a movement whose in_lane equals out_lane") {
    NetworkData net = testfix::four_way();
    net.movements.push_back({"m_bad", "in_N", "in_N", "v"});
    for (Phase &p : net.phases) p.signal["m_bad"] = SignalState::Prohibited;
    const auto violations = validate(net);
    CHECK(mentions(violations, "m_bad"));
}

TEST_CASE("validate flags a phase missing a signal entry") {
    NetworkData net = testfix::four_way();
    net.phases[0].signal.erase("m_N_S");
    const auto violations = validate(net);
    CHECK(mentions(violations, "p_ns"));
    bool names_movement = false;
    for (const auto &v : violations)
        if (v.entity == "p_ns" && v.message.find("m_N_S") != std::string::npos)
            names_movement = true;
    CHECK(names_movement);
}

TEST_CASE("validate flags unreachable lanes and unknown references") {
    NetworkData net = testfix::corridor();
    // cut the only movement feeding link_AB
    net.movements.erase(net.movements.begin()); // m_A_fwd
    net.phases[0].signal.erase("m_A_fwd");
    const auto violations = validate(net);
    CHECK(mentions(violations, "link_AB"));
}

TEST_CASE("green_set follows the non-Prohibited definition") {
    const Phase only_m1 = phase_of("p1", {{"m1", SignalState::Protected},
                                          {"m2", SignalState::Prohibited},
                                          {"m3", SignalState::Prohibited}});
    CHECK(green_set(only_m1) == std::set<std::string>{"m1"});

    const Phase all_red = phase_of("p2", {{"m1", SignalState::Prohibited},
                                          {"m2", SignalState::Prohibited}});
    CHECK(green_set(all_red).empty());

    const Phase mixed = phase_of("p3", {{"m1", SignalState::Permitted},
                                        {"m2", SignalState::Protected},
                                        {"m3", SignalState::Prohibited}});
    CHECK(green_set(mixed) == std::set<std::string>{"m1", "m2"});
}

TEST_CASE("jaccard on identical, disjoint and overlapping green sets") {
    const Phase a = phase_of("a", {{"m1", SignalState::Protected},
                                   {"m2", SignalState::Permitted},
                                   {"m3", SignalState::Prohibited}});
    CHECK(jaccard(a, a) == doctest::Approx(1.0));

    const Phase b = phase_of("b", {{"m1", SignalState::Prohibited},
                                   {"m2", SignalState::Prohibited},
                                   {"m3", SignalState::Protected}});
    CHECK(jaccard(a, b) == doctest::Approx(0.0));

    // greens {m1,m2} vs {m2,m3}: intersection 1, union 3
    const Phase c = phase_of("c", {{"m1", SignalState::Prohibited},
                                   {"m2", SignalState::Protected},
                                   {"m3", SignalState::Permitted}});
    CHECK(jaccard(a, c) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("jaccard rejects phases of different owners") {
    Phase a = phase_of("a", {{"m1", SignalState::Protected}});
    Phase b = phase_of("b", {{"m1", SignalState::Protected}});
    b.owner = "w";
    CHECK_THROWS_AS(jaccard(a, b), Error);
}

TEST_CASE("jaccard of two all-red phases degenerates to 1") {
    const Phase a = phase_of("a", {{"m1", SignalState::Prohibited}});
    const Phase b = phase_of("b", {{"m2", SignalState::Prohibited}});
    CHECK(jaccard(a, b) == doctest::Approx(1.0));
}

TEST_CASE("jaccard is symmetric over random phase pairs") {
    Rng rng(7);
    const char *movements[5] = {"m1", "m2", "m3", "m4", "m5"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::pair<std::string, SignalState>> sa, sb;
        for (const char *m : movements) {
            sa.push_back({m, signal_from_code(static_cast<int>(rng.uniform_int(-1, 1)))});
            sb.push_back({m, signal_from_code(static_cast<int>(rng.uniform_int(-1, 1)))});
        }
        const Phase a = phase_of("a", sa);
        const Phase b = phase_of("b", sb);
        CHECK(jaccard(a, b) == jaccard(b, a));
        if (!green_set(a).empty()) CHECK(jaccard(a, a) == doctest::Approx(1.0));
    }
}

TEST_CASE("movements_into and movements_out_of on the fixtures") {
    const RoadNetwork fan(testfix::fan_2_in_3_out());
    CHECK(fan.movements_into("mid") == std::set<std::string>{"mA1", "mA2"});
    CHECK(fan.movements_out_of("mid") == std::set<std::string>{"mB1", "mB2", "mB3"});

    // isolated source lane: nothing produces it
    CHECK(fan.movements_into("i1").empty());
    CHECK(fan.movements_out_of("i1") == std::set<std::string>{"mA1"});

    CHECK_THROWS_AS(fan.movements_into("nope"), Error);
}

TEST_CASE("single-intersection network: internal lane connectivity") {
    const RoadNetwork net(testfix::four_way());
    // every in lane is a source: fed by nothing, drained by its 3 turns
    for (const char *side : {"N", "E", "S", "W"}) {
        CHECK(net.movements_into(std::string("in_") + side).empty());
        CHECK(net.movements_out_of(std::string("in_") + side).size() == 3);
        CHECK(net.movements_into(std::string("out_") + side).size() == 3);
        CHECK(net.movements_out_of(std::string("out_") + side).empty());
    }
}

TEST_CASE("a movement never both feeds and drains one lane") {
    for (const NetworkData &data :
         {testfix::four_way(), testfix::corridor(), testfix::fan_2_in_3_out()}) {
        const RoadNetwork net(data);
        for (std::size_t lane = 0; lane < net.lanes().size(); ++lane) {
            const auto &in = net.movements_into(lane);
            const auto &out = net.movements_out_of(lane);
            for (std::size_t m : in)
                CHECK(std::find(out.begin(), out.end(), m) == out.end());
        }
    }
}

TEST_CASE("network JSON round-trips, gamma codes bit-exact") {
    const NetworkData net = testfix::four_way();
    const std::string text = network_to_json(net);
    const NetworkData back = network_from_json(text);
    REQUIRE(back.lanes.size() == net.lanes.size());
    REQUIRE(back.movements.size() == net.movements.size());
    REQUIRE(back.phases.size() == net.phases.size());
    for (std::size_t i = 0; i < net.phases.size(); ++i) {
        REQUIRE(back.phases[i].signal.size() == net.phases[i].signal.size());
        for (const auto &[m, s] : net.phases[i].signal)
            CHECK(signal_code(back.phases[i].signal.at(m)) == signal_code(s));
    }
    for (std::size_t i = 0; i < net.lanes.size(); ++i) {
        CHECK(back.lanes[i].id == net.lanes[i].id);
        CHECK(back.lanes[i].length_m == net.lanes[i].length_m);
        CHECK(back.lanes[i].upstream == net.lanes[i].upstream);
        CHECK(back.lanes[i].downstream == net.lanes[i].downstream);
    }
    // serialization is stable
    CHECK(network_to_json(back) == text);
}

TEST_CASE("RoadNetwork construction rejects invalid data") {
    NetworkData net = testfix::four_way();
    net.movements.push_back({"m_bad", "in_N", "in_N", "v"});
    for (Phase &p : net.phases) p.signal["m_bad"] = SignalState::Prohibited;
    CHECK_THROWS_AS(RoadNetwork{net}, Error);
}

TEST_CASE("signal codes are fixed and distinct") {
    CHECK(signal_code(SignalState::Prohibited) == -1);
    CHECK(signal_code(SignalState::Permitted) == 0);
    CHECK(signal_code(SignalState::Protected) == 1);
    for (int code : {-1, 0, 1}) CHECK(signal_code(signal_from_code(code)) == code);
    CHECK_THROWS_AS(signal_from_code(2), Error);
}
