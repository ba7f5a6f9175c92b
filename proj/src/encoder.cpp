#include "tsc/encoder.hpp"

#include <cmath>

#include "tsc/util.hpp"

namespace tsc {

using ad::Matrix;
using ad::ParamStore;
using ad::Tape;
using ad::Var;

void create_mlp(ParamStore &store, const std::string &prefix, std::size_t in_dim,
                std::size_t hidden, std::size_t out_dim, Rng &rng) {
    store.create_uniform(prefix + ".W1", in_dim, hidden, in_dim, rng);
    store.create_zeros(prefix + ".b1", 1, hidden);
    Matrix &gain = store.create_zeros(prefix + ".ln_g", 1, hidden).value;
    std::fill(gain.data.begin(), gain.data.end(), 1.0);
    store.create_zeros(prefix + ".ln_b", 1, hidden);
    store.create_uniform(prefix + ".W2", hidden, out_dim, hidden, rng);
    store.create_zeros(prefix + ".b2", 1, out_dim);
}

Var apply_mlp(Tape &tape, ParamStore &store, const std::string &prefix, Var x,
              double slope, double dropout_p, bool training, Rng *rng) {
    Var h = tape.add_rowvec(tape.matmul(x, tape.param(store.get(prefix + ".W1"))),
                            tape.param(store.get(prefix + ".b1")));
    h = tape.leaky_relu(h, slope);
    h = tape.layer_norm(h);
    h = tape.mul_rowvec(h, tape.param(store.get(prefix + ".ln_g")));
    h = tape.add_rowvec(h, tape.param(store.get(prefix + ".ln_b")));
    if (training && rng) h = tape.dropout(h, dropout_p, true, *rng);
    return tape.add_rowvec(tape.matmul(h, tape.param(store.get(prefix + ".W2"))),
                           tape.param(store.get(prefix + ".b2")));
}

namespace {

std::string head_name(const char *level, int head, const char *tensor) {
    return std::string(level) + ".h" + std::to_string(head) + "." + tensor;
}

} // namespace

void Encoder::create_params(ParamStore &store, const EncoderConfig &config, Rng &rng) {
    if (config.latent % config.heads != 0)
        throw Error("encoder latent width must be divisible by the head count");
    const auto d = static_cast<std::size_t>(config.feature_dim);
    const auto dl = static_cast<std::size_t>(config.latent);
    const auto w = static_cast<std::size_t>(config.head_width());

    for (int h = 0; h < config.heads; ++h) {
        store.create_uniform(head_name("l1", h, "W"), d, w, d, rng);
        store.create_uniform(head_name("l1", h, "Wres"), d, w, d, rng);
        store.create_uniform(head_name("l1", h, "a"), w, 1, w, rng);
    }
    store.create_zeros("l1.b", 1, dl);
    store.create_uniform("l1.proj", dl, dl, dl, rng);
    create_mlp(store, "l1.mlp", dl, dl, dl, rng);

    for (int h = 0; h < config.heads; ++h) {
        store.create_uniform(head_name("l2", h, "W"), dl, w, dl, rng);
        store.create_uniform(head_name("l2", h, "Wres"), dl, w, dl, rng);
        store.create_uniform(head_name("l2", h, "Wflag"), 1, w, 1, rng);
        store.create_uniform(head_name("l2", h, "Wgamma"), 1, w, 1, rng);
        store.create_uniform(head_name("l2", h, "a"), w, 1, w, rng);
    }
    store.create_zeros("l2.b", 1, dl);
    store.create_uniform("l2.proj", dl, dl, dl, rng);
    create_mlp(store, "l2.mlp", dl, dl, dl, rng);

    for (int h = 0; h < config.heads; ++h) {
        store.create_uniform(head_name("l3", h, "W"), dl, w, dl, rng);
        store.create_uniform(head_name("l3", h, "Wres"), dl, w, dl, rng);
        store.create_uniform(head_name("l3", h, "WJ"), 1, w, 1, rng);
        store.create_uniform(head_name("l3", h, "a"), w, 1, w, rng);
    }
    store.create_zeros("l3.b", 1, dl);
    store.create_uniform("l3.proj", dl, dl, dl, rng);
    create_mlp(store, "l3.mlp", dl, dl, dl, rng);
}

Var Encoder::forward(Tape &tape, const StateGraph &graph, bool training, Rng *rng,
                     Trace *trace) const {
    if (graph.n_seg() == 0 || graph.n_mov() == 0 || graph.n_phase() == 0)
        throw Error("state graph with empty node level");
    if (graph.feature_dim != config_.feature_dim)
        throw Error("state graph feature width " + std::to_string(graph.feature_dim) +
                    " does not match encoder width " +
                    std::to_string(config_.feature_dim));
    ParamStore &ps = *store_;
    const int heads = config_.heads;
    const double slope = config_.slope;
    const auto n_seg = graph.n_seg();
    const auto n_mov = graph.n_mov();
    const auto n_phase = graph.n_phase();

    // ---- level 1: segments -> movements, attention grouped per lane ----
    Matrix seg(n_seg, static_cast<std::size_t>(graph.feature_dim));
    seg.data = graph.seg_features;
    Var hs = tape.constant(std::move(seg));

    std::vector<int> in_lane_of_move(n_mov), out_lane_of_move(n_mov);
    for (std::size_t m = 0; m < n_mov; ++m) {
        in_lane_of_move[m] = graph.movements[m].in_lane;
        out_lane_of_move[m] = graph.movements[m].out_lane;
    }
    // target-node features are zero-initialized, which neutralizes the
    // residual term on this level; the matmul keeps Wres on the tape
    Var zeros_mov = tape.constant(Matrix(n_mov, static_cast<std::size_t>(graph.feature_dim)));

    if (trace) trace->alpha_segments = Matrix(n_seg, static_cast<std::size_t>(heads));
    std::vector<Var> l1_blocks;
    for (int h = 0; h < heads; ++h) {
        Var p = tape.matmul(hs, tape.param(ps.get(head_name("l1", h, "W"))));
        Var u = tape.matmul(tape.leaky_relu(p, slope),
                            tape.param(ps.get(head_name("l1", h, "a"))));
        Var alpha = tape.grouped_softmax(u, graph.seg_lane);
        if (trace)
            for (std::size_t s = 0; s < n_seg; ++s)
                trace->alpha_segments.at(s, static_cast<std::size_t>(h)) =
                    alpha.value().data[s];
        Var weighted = tape.mul_colvec(p, alpha);
        Var lane_sums = tape.scatter_sum_rows(weighted, graph.seg_lane,
                                              static_cast<std::size_t>(graph.n_lanes));
        Var agg = tape.add(tape.gather_rows(lane_sums, in_lane_of_move),
                           tape.gather_rows(lane_sums, out_lane_of_move));
        agg = tape.add(agg, tape.matmul(zeros_mov,
                                        tape.param(ps.get(head_name("l1", h, "Wres")))));
        l1_blocks.push_back(agg);
    }
    Var hm = tape.leaky_relu(
        tape.add_rowvec(tape.concat_cols(l1_blocks), tape.param(ps.get("l1.b"))), slope);
    hm = tape.matmul(hm, tape.param(ps.get("l1.proj")));
    hm = apply_mlp(tape, ps, "l1.mlp", hm, slope, config_.dropout_p, training, rng);
    if (trace) trace->movement_embeddings = hm.value();

    // ---- level 2: movements -> phases, fully bipartite, normalized over
    // movements; gamma and the active flag enter scores only ----
    std::vector<int> edge_m(n_mov * n_phase), edge_p(n_mov * n_phase);
    for (std::size_t m = 0; m < n_mov; ++m)
        for (std::size_t p = 0; p < n_phase; ++p) {
            edge_m[m * n_phase + p] = static_cast<int>(m);
            edge_p[m * n_phase + p] = static_cast<int>(p);
        }
    Matrix gamma_col(n_mov * n_phase, 1);
    gamma_col.data = graph.gamma;
    Var gamma_feats = tape.constant(std::move(gamma_col));
    Matrix flag_col(n_phase, 1);
    flag_col.data = graph.phase_active;
    Var flags = tape.constant(std::move(flag_col));

    if (trace)
        trace->alpha_move_phase = Matrix(n_mov * n_phase, static_cast<std::size_t>(heads));
    std::vector<Var> l2_blocks;
    Var hm_mean = tape.mean_rows(hm);
    for (int h = 0; h < heads; ++h) {
        Var p = tape.matmul(hm, tape.param(ps.get(head_name("l2", h, "W"))));
        Var flag_emb = tape.matmul(flags, tape.param(ps.get(head_name("l2", h, "Wflag"))));
        Var gamma_emb =
            tape.matmul(gamma_feats, tape.param(ps.get(head_name("l2", h, "Wgamma"))));
        Var edge = tape.add(tape.gather_rows(p, edge_m), tape.gather_rows(flag_emb, edge_p));
        edge = tape.add(edge, gamma_emb);
        Var u = tape.matmul(tape.leaky_relu(edge, slope),
                            tape.param(ps.get(head_name("l2", h, "a"))));
        Var alpha = tape.grouped_softmax(u, edge_p);
        if (trace)
            for (std::size_t e = 0; e < n_mov * n_phase; ++e)
                trace->alpha_move_phase.at(e, static_cast<std::size_t>(h)) =
                    alpha.value().data[e];
        Var contrib = tape.mul_colvec(tape.gather_rows(p, edge_m), alpha);
        Var agg = tape.scatter_sum_rows(contrib, edge_p, n_phase);
        Var res = tape.matmul(hm_mean, tape.param(ps.get(head_name("l2", h, "Wres"))));
        agg = tape.add_rowvec(agg, res);
        l2_blocks.push_back(agg);
    }
    Var hp = tape.leaky_relu(
        tape.add_rowvec(tape.concat_cols(l2_blocks), tape.param(ps.get("l2.b"))), slope);
    hp = tape.matmul(hp, tape.param(ps.get("l2.proj")));
    hp = apply_mlp(tape, ps, "l2.mlp", hp, slope, config_.dropout_p, training, rng);
    if (trace) trace->phase_embeddings_pre = hp.value();

    // ---- level 3: one round of fully-connected intra-level propagation,
    // self-edges included, Jaccard as the score edge feature ----
    std::vector<int> edge_t(n_phase * n_phase), edge_s(n_phase * n_phase);
    for (std::size_t t = 0; t < n_phase; ++t)
        for (std::size_t s = 0; s < n_phase; ++s) {
            edge_t[t * n_phase + s] = static_cast<int>(t);
            edge_s[t * n_phase + s] = static_cast<int>(s);
        }
    Matrix j_col(n_phase * n_phase, 1);
    j_col.data = graph.jaccard;
    Var j_feats = tape.constant(std::move(j_col));

    if (trace)
        trace->alpha_phase = Matrix(n_phase * n_phase, static_cast<std::size_t>(heads));
    std::vector<Var> l3_blocks;
    for (int h = 0; h < heads; ++h) {
        Var p = tape.matmul(hp, tape.param(ps.get(head_name("l3", h, "W"))));
        Var j_emb = tape.matmul(j_feats, tape.param(ps.get(head_name("l3", h, "WJ"))));
        Var edge = tape.add(tape.gather_rows(p, edge_t), tape.gather_rows(p, edge_s));
        edge = tape.add(edge, j_emb);
        Var u = tape.matmul(tape.leaky_relu(edge, slope),
                            tape.param(ps.get(head_name("l3", h, "a"))));
        Var alpha = tape.grouped_softmax(u, edge_t);
        if (trace)
            for (std::size_t e = 0; e < n_phase * n_phase; ++e)
                trace->alpha_phase.at(e, static_cast<std::size_t>(h)) =
                    alpha.value().data[e];
        Var contrib = tape.mul_colvec(tape.gather_rows(p, edge_s), alpha);
        Var agg = tape.scatter_sum_rows(contrib, edge_t, n_phase);
        Var res = tape.matmul(hp, tape.param(ps.get(head_name("l3", h, "Wres"))));
        agg = tape.add(agg, res);
        l3_blocks.push_back(agg);
    }
    Var out = tape.leaky_relu(
        tape.add_rowvec(tape.concat_cols(l3_blocks), tape.param(ps.get("l3.b"))), slope);
    out = tape.matmul(out, tape.param(ps.get("l3.proj")));
    out = apply_mlp(tape, ps, "l3.mlp", out, slope, config_.dropout_p, training, rng);
    return out;
}

std::vector<std::pair<std::string, std::size_t>>
Encoder::parameter_counts(const ad::ParamStore &store) {
    std::vector<std::pair<std::string, std::size_t>> counts{
        {"l1", 0}, {"l2", 0}, {"l3", 0}, {"other", 0}};
    store.for_each([&](const ad::Parameter &p) {
        for (auto &[prefix, count] : counts) {
            if (prefix != "other" && p.name.rfind(prefix + ".", 0) == 0) {
                count += p.value.size();
                return;
            }
        }
        counts.back().second += p.value.size();
    });
    return counts;
}

} // namespace tsc
