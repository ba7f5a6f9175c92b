#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsc/diff.hpp"
#include "tsc/stategraph.hpp"

namespace tsc {

struct EncoderConfig {
    int latent = 64;   // d'
    int heads = 8;     // attention heads; latent must divide evenly
    int feature_dim = 18; // segment feature width (density | pe | prior)
    double slope = 0.01;
    double dropout_p = 0.1;

    int head_width() const { return latent / heads; }
};

// two-layer perceptron with layer norm and dropout between the layers
void create_mlp(ad::ParamStore &store, const std::string &prefix, std::size_t in_dim,
                std::size_t hidden, std::size_t out_dim, Rng &rng);
ad::Var apply_mlp(ad::Tape &tape, ad::ParamStore &store, const std::string &prefix,
                  ad::Var x, double slope, double dropout_p, bool training, Rng *rng);

// Three-level heterogeneous graph-attention encoder producing one latent
// embedding per phase. One parameter set serves every intersection.
class Encoder {
public:
    // creates the encoder parameters in the store (names prefixed l1/l2/l3)
    static void create_params(ad::ParamStore &store, const EncoderConfig &config,
                              Rng &rng);

    Encoder(ad::ParamStore &store, const EncoderConfig &config)
        : store_(&store), config_(config) {}

    // Per-level attention weights and intermediate embeddings, for tests.
    struct Trace {
        ad::Matrix alpha_segments;   // n_seg x heads, per-lane groups
        ad::Matrix alpha_move_phase; // (n_mov*n_phase) x heads
        ad::Matrix alpha_phase;      // (n_phase*n_phase) x heads
        ad::Matrix movement_embeddings;
        ad::Matrix phase_embeddings_pre; // after level 2
    };

    // (n_phase x latent) phase embeddings
    ad::Var forward(ad::Tape &tape, const StateGraph &graph, bool training = false,
                    Rng *rng = nullptr, Trace *trace = nullptr) const;

    const EncoderConfig &config() const { return config_; }
    ad::ParamStore &store() const { return *store_; }

    // parameter counts keyed by level prefix, for the encoder-info command
    static std::vector<std::pair<std::string, std::size_t>>
    parameter_counts(const ad::ParamStore &store);

private:
    ad::ParamStore *store_;
    EncoderConfig config_;
};

} // namespace tsc
