#include "tsc/stategraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tsc/util.hpp"

namespace tsc {

std::size_t partition_count(const Lane &lane, double ds) {
    if (ds < simconst::jam_gap_m)
        throw Error("segment length " + std::to_string(ds) +
                    " below the minimum vehicle spacing");
    if (ds > lane.length_m + 1e-9)
        throw Error("segment length " + std::to_string(ds) + " exceeds lane " + lane.id +
                    " of length " + std::to_string(lane.length_m));
    return static_cast<std::size_t>(std::floor(lane.length_m / ds + 1e-9));
}

int segment_of(const Lane &lane, double pos_m, double ds) {
    const auto n = static_cast<long>(partition_count(lane, ds));
    const long idx = static_cast<long>(std::ceil(pos_m / ds - 1e-12)) - 1;
    if (idx < 0) return 0;
    if (idx >= n) return -1; // dropped remainder
    return static_cast<int>(idx);
}

double segment_density(const Simulation &sim, std::size_t lane, std::size_t segment,
                       double ds) {
    const Lane &l = sim.network().lanes().at(lane);
    if (segment >= partition_count(l, ds))
        throw Error("segment index out of range on lane " + l.id);
    std::size_t count = 0;
    for (std::size_t id : sim.lane_vehicles(lane))
        if (segment_of(l, sim.vehicles()[id].pos_m, ds) == static_cast<int>(segment))
            ++count;
    return static_cast<double>(count) / ds;
}

double transition_prior(const Simulation &sim, std::size_t lane, double ds) {
    const RoadNetwork &net = sim.network();
    double prior = 0.0;
    for (std::size_t m : net.movements_into(lane))
        prior += segment_density(sim, net.lane_index(net.movements()[m].in_lane), 0, ds);
    for (std::size_t m : net.movements_out_of(lane))
        prior -= segment_density(sim, net.lane_index(net.movements()[m].out_lane), 0, ds);
    return prior;
}

std::vector<double> positional_encoding(std::size_t segment_index,
                                        std::size_t lane_index, int d_pe) {
    if (d_pe <= 0 || d_pe % 2 != 0)
        throw Error("positional encoding width must be even and positive");
    const int half = d_pe / 2;
    std::vector<double> pe(static_cast<std::size_t>(d_pe));
    auto fill = [&](double pos, int offset) {
        for (int j = 0; j < half; ++j) {
            const double exponent = static_cast<double>(j - (j % 2)) / half;
            const double angle = pos / std::pow(10000.0, exponent);
            pe[static_cast<std::size_t>(offset + j)] =
                (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    };
    fill(static_cast<double>(segment_index), 0);
    fill(static_cast<double>(lane_index), half);
    return pe;
}

StateGraph build_state_graph(const Simulation &sim, std::size_t intersection,
                             const EncodingConfig &config) {
    const RoadNetwork &net = sim.network();
    if (intersection >= net.intersections().size())
        throw Error("unknown intersection index");

    StateGraph g;
    g.intersection = intersection;
    g.feature_dim = config.feature_dim();

    const auto &locals = net.local_lanes_of(intersection);
    g.n_lanes = static_cast<int>(locals.size());

    for (std::size_t li = 0; li < locals.size(); ++li) {
        const std::size_t lane = locals[li];
        const Lane &l = net.lanes()[lane];
        const std::size_t segments = partition_count(l, config.ds);
        const double prior =
            config.use_prior ? transition_prior(sim, lane, config.ds) : 0.0;
        for (std::size_t s = 0; s < segments; ++s) {
            g.seg_lane.push_back(static_cast<int>(li));
            g.seg_features.push_back(segment_density(sim, lane, s, config.ds));
            if (config.use_pe) {
                const auto pe = positional_encoding(s, li, config.d_pe);
                g.seg_features.insert(g.seg_features.end(), pe.begin(), pe.end());
            } else {
                g.seg_features.insert(g.seg_features.end(),
                                      static_cast<std::size_t>(config.d_pe), 0.0);
            }
            g.seg_features.push_back(prior);
        }
    }

    auto local_index = [&](std::size_t lane) {
        const auto it = std::lower_bound(locals.begin(), locals.end(), lane);
        return static_cast<int>(it - locals.begin());
    };
    for (std::size_t m : net.movements_of(intersection)) {
        const Movement &mov = net.movements()[m];
        g.movements.push_back({local_index(net.lane_index(mov.in_lane)),
                               local_index(net.lane_index(mov.out_lane))});
    }

    const auto &phases = net.phases_of(intersection);
    const std::size_t active = sim.controller(intersection).active_phase();
    for (std::size_t p : phases) {
        g.phase_globals.push_back(p);
        g.phase_active.push_back(p == active ? 1.0 : 0.0);
    }

    const auto &owned = net.movements_of(intersection);
    g.gamma.resize(owned.size() * phases.size(), 0.0);
    if (config.use_gamma)
        for (std::size_t mi = 0; mi < owned.size(); ++mi)
            for (std::size_t pi = 0; pi < phases.size(); ++pi)
                g.gamma[mi * phases.size() + pi] =
                    static_cast<double>(net.gamma(owned[mi], phases[pi]));

    g.jaccard.resize(phases.size() * phases.size(), 0.0);
    if (config.use_jaccard)
        for (std::size_t a = 0; a < phases.size(); ++a)
            for (std::size_t b = 0; b < phases.size(); ++b)
                g.jaccard[a * phases.size() + b] =
                    jaccard(net.phases()[phases[a]], net.phases()[phases[b]]);
    return g;
}

std::string dump_state_graph(const StateGraph &g) {
    std::ostringstream out;
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    out << "intersection " << g.intersection << "\n";
    out << "segments " << g.n_seg() << " dim " << g.feature_dim << "\n";
    for (std::size_t s = 0; s < g.n_seg(); ++s) {
        out << g.seg_lane[s];
        for (int j = 0; j < g.feature_dim; ++j)
            out << ' ' << num(g.seg_features[s * g.feature_dim + j]);
        out << "\n";
    }
    out << "movements " << g.n_mov() << "\n";
    for (const auto &m : g.movements)
        out << m.in_lane << ' ' << m.out_lane << "\n";
    out << "phases " << g.n_phase() << "\n";
    for (double flag : g.phase_active) out << num(flag) << ' ';
    out << "\ngamma\n";
    for (std::size_t m = 0; m < g.n_mov(); ++m) {
        for (std::size_t p = 0; p < g.n_phase(); ++p)
            out << num(g.gamma[m * g.n_phase() + p]) << ' ';
        out << "\n";
    }
    out << "jaccard\n";
    for (std::size_t a = 0; a < g.n_phase(); ++a) {
        for (std::size_t b = 0; b < g.n_phase(); ++b)
            out << num(g.jaccard[a * g.n_phase() + b]) << ' ';
        out << "\n";
    }
    return out.str();
}

} // namespace tsc
