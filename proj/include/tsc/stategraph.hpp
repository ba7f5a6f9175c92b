#pragma once

#include <string>
#include <vector>

#include "tsc/sim.hpp"

namespace tsc {

// Feature switches mirror the ablation study: disabled features are zeroed
// in the built graph, topology is never changed.
struct EncodingConfig {
    double ds = 10.0; // segment length, meters
    int d_pe = 16;    // positional encoding width, split between the
                      // within-lane and across-lane index
    bool use_pe = true;
    bool use_gamma = true;
    bool use_jaccard = true;
    bool use_prior = true;

    int feature_dim() const { return 2 + d_pe; } // density | pe | prior
};

// floor(length/ds) equal segments indexed from the intersection centre
// outward; the remainder at the far end is dropped. Segment k covers
// (k*ds, (k+1)*ds], so a boundary vehicle counts toward the centre.
std::size_t partition_count(const Lane &lane, double ds);

// segment index of a lane position, or -1 if the position falls into the
// dropped remainder
int segment_of(const Lane &lane, double pos_m, double ds);

// vehicles in the segment divided by ds
double segment_density(const Simulation &sim, std::size_t lane, std::size_t segment,
                       double ds);

// net density about to enter minus leave the lane, over the closest segments
// of the coordination-graph neighbour lanes
double transition_prior(const Simulation &sim, std::size_t lane, double ds);

// sinusoidal encoding of (segment index, lane index), d_pe/2 dims each
std::vector<double> positional_encoding(std::size_t segment_index,
                                        std::size_t lane_index, int d_pe);

// Hierarchical heterogeneous state graph of one intersection: segment nodes
// with features, movement nodes (implicitly zero-initialized), phase nodes
// with the active flag, and the gamma/Jaccard edge features.
struct StateGraph {
    struct MovementNode {
        int in_lane = 0;  // local lane index
        int out_lane = 0;
    };

    std::size_t intersection = 0;
    int n_lanes = 0;
    int feature_dim = 0;
    std::vector<double> seg_features; // n_seg x feature_dim, row-major
    std::vector<int> seg_lane;        // local lane index per segment
    std::vector<MovementNode> movements;
    std::vector<double> phase_active;  // one-hot over phases
    std::vector<double> gamma;         // n_mov x n_phase, row-major
    std::vector<double> jaccard;       // n_phase x n_phase, row-major
    std::vector<std::size_t> phase_globals; // global phase index per node

    std::size_t n_seg() const { return seg_lane.size(); }
    std::size_t n_mov() const { return movements.size(); }
    std::size_t n_phase() const { return phase_active.size(); }
};

StateGraph build_state_graph(const Simulation &sim, std::size_t intersection,
                             const EncodingConfig &config);

// deterministic structured-text rendering for golden-file tests
std::string dump_state_graph(const StateGraph &graph);

} // namespace tsc
