#include "tsc/diff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "tsc/util.hpp"

namespace tsc::ad {

// --- ParamStore ---

Parameter &ParamStore::create_zeros(const std::string &name, std::size_t rows,
                                    std::size_t cols) {
    if (params_.count(name)) throw Error("duplicate parameter name: " + name);
    Parameter p;
    p.name = name;
    p.value = Matrix(rows, cols);
    p.grad = Matrix(rows, cols);
    p.adam_m = Matrix(rows, cols);
    p.adam_v = Matrix(rows, cols);
    return params_.emplace(name, std::move(p)).first->second;
}

Parameter &ParamStore::create_uniform(const std::string &name, std::size_t rows,
                                      std::size_t cols, std::size_t fan_in, Rng &rng) {
    Parameter &p = create_zeros(name, rows, cols);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double &v : p.value.data) v = rng.uniform(-bound, bound);
    return p;
}

Parameter &ParamStore::get(const std::string &name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter: " + name);
    return it->second;
}

const Parameter &ParamStore::get(const std::string &name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto &[name, p] : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto &[name, p] : params_)
        std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
}

void ParamStore::adamw_step(const AdamWConfig &c) {
    for (auto &[name, p] : params_) {
        p.adam_step += 1;
        const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(p.adam_step));
        const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(p.adam_step));
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad.data[i];
            p.adam_m.data[i] = c.beta1 * p.adam_m.data[i] + (1.0 - c.beta1) * g;
            p.adam_v.data[i] = c.beta2 * p.adam_v.data[i] + (1.0 - c.beta2) * g * g;
            const double m_hat = p.adam_m.data[i] / bc1;
            const double v_hat = p.adam_v.data[i] / bc2;
            p.value.data[i] -= c.lr * (m_hat / (std::sqrt(v_hat) + c.eps) +
                                       c.weight_decay * p.value.data[i]);
        }
        std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
    }
}

void ParamStore::copy_values_from(const ParamStore &other) {
    if (params_.size() != other.params_.size())
        throw Error("parameter store mismatch in copy_values_from");
    auto it = params_.begin();
    auto jt = other.params_.begin();
    for (; it != params_.end(); ++it, ++jt) {
        if (it->first != jt->first || !it->second.value.same_shape(jt->second.value))
            throw Error("parameter mismatch at " + it->first);
        it->second.value.data = jt->second.value.data;
    }
}

// --- checkpoint ---

namespace {

constexpr std::uint64_t kMagic = 0x54534343'4B505431ULL; // "TSCCKPT1"
constexpr std::uint32_t kVersion = 1;

template <typename T> void put(std::ofstream &out, const T &v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(v));
}

template <typename T> T take(std::ifstream &in) {
    T v{};
    in.read(reinterpret_cast<char *>(&v), sizeof(v));
    if (!in) throw Error("truncated checkpoint file");
    return v;
}

void put_string(std::ofstream &out, const std::string &s) {
    put(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_string(std::ifstream &in) {
    const auto n = take<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw Error("truncated checkpoint file");
    return s;
}

void put_doubles(std::ofstream &out, const std::vector<double> &v) {
    out.write(reinterpret_cast<const char *>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void take_doubles(std::ifstream &in, std::vector<double> &v) {
    in.read(reinterpret_cast<char *>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw Error("truncated checkpoint file");
}

} // namespace

void save_checkpoint(const std::string &path,
                     const std::vector<std::pair<std::string, const ParamStore *>> &stores) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    put(out, kMagic);
    put(out, kVersion);
    put(out, static_cast<std::uint64_t>(stores.size()));
    for (const auto &[store_name, store] : stores) {
        put_string(out, store_name);
        put(out, static_cast<std::uint64_t>(store->tensor_count()));
        store->for_each([&](const Parameter &p) {
            put_string(out, p.name);
            put(out, static_cast<std::uint64_t>(p.value.rows));
            put(out, static_cast<std::uint64_t>(p.value.cols));
            put_doubles(out, p.value.data);
            put(out, p.adam_step);
            put_doubles(out, p.adam_m.data);
            put_doubles(out, p.adam_v.data);
        });
    }
}

void load_checkpoint(const std::string &path,
                     const std::vector<std::pair<std::string, ParamStore *>> &stores) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read checkpoint: " + path);
    if (take<std::uint64_t>(in) != kMagic) throw Error("not a checkpoint file: " + path);
    if (take<std::uint32_t>(in) != kVersion)
        throw Error("unsupported checkpoint version in " + path);
    const auto store_count = take<std::uint64_t>(in);
    if (store_count != stores.size())
        throw Error("checkpoint holds " + std::to_string(store_count) + " stores, expected " +
                    std::to_string(stores.size()));
    for (const auto &[expected_name, store] : stores) {
        const std::string store_name = take_string(in);
        if (store_name != expected_name)
            throw Error("checkpoint store " + store_name + ", expected " + expected_name);
        const auto tensor_count = take<std::uint64_t>(in);
        if (tensor_count != store->tensor_count())
            throw Error("checkpoint shape mismatch in store " + store_name);
        for (std::uint64_t i = 0; i < tensor_count; ++i) {
            const std::string name = take_string(in);
            if (!store->contains(name))
                throw Error("checkpoint parameter " + name + " unknown in store " + store_name);
            Parameter &p = store->get(name);
            const auto rows = take<std::uint64_t>(in);
            const auto cols = take<std::uint64_t>(in);
            if (rows != p.value.rows || cols != p.value.cols)
                throw Error("checkpoint shape mismatch for parameter " + name);
            take_doubles(in, p.value.data);
            p.adam_step = take<std::uint64_t>(in);
            take_doubles(in, p.adam_m.data);
            take_doubles(in, p.adam_v.data);
        }
    }
}

// --- matmul kernel ---

void matmul_into(const Matrix &a, const Matrix &b, Matrix &out, bool transpose_a,
                 bool transpose_b, bool accumulate) {
    const std::size_t n = transpose_a ? a.cols : a.rows;
    const std::size_t k = transpose_a ? a.rows : a.cols;
    const std::size_t kb = transpose_b ? b.cols : b.rows;
    const std::size_t m = transpose_b ? b.rows : b.cols;
    if (k != kb)
        throw Error("matmul shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    if (out.rows != n || out.cols != m) out = Matrix(n, m);
    if (!accumulate) std::fill(out.data.begin(), out.data.end(), 0.0);
    if (!transpose_a && !transpose_b) {
        for (std::size_t i = 0; i < n; ++i) {
            double *dst = &out.data[i * m];
            const double *ai = &a.data[i * k];
            for (std::size_t p = 0; p < k; ++p) {
                const double av = ai[p];
                if (av == 0.0) continue;
                const double *bp = &b.data[p * m];
                for (std::size_t j = 0; j < m; ++j) dst[j] += av * bp[j];
            }
        }
    } else if (transpose_a && !transpose_b) {
        for (std::size_t p = 0; p < k; ++p) {
            const double *ap = &a.data[p * n];
            const double *bp = &b.data[p * m];
            for (std::size_t i = 0; i < n; ++i) {
                const double av = ap[i];
                if (av == 0.0) continue;
                double *dst = &out.data[i * m];
                for (std::size_t j = 0; j < m; ++j) dst[j] += av * bp[j];
            }
        }
    } else if (!transpose_a && transpose_b) {
        for (std::size_t i = 0; i < n; ++i) {
            const double *ai = &a.data[i * k];
            double *dst = &out.data[i * m];
            for (std::size_t j = 0; j < m; ++j) {
                const double *bj = &b.data[j * k];
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
                dst[j] += acc;
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p)
                    acc += a.data[p * a.cols + i] * b.data[j * b.cols + p];
                out.data[i * m + j] += acc;
            }
    }
}

// --- Tape ---

const Matrix &Var::value() const { return tape_->value(node_); }

Var Tape::make(Matrix value, std::function<void(Tape &)> back) {
    Node node;
    node.value = std::move(value);
    if (grad_enabled_) {
        node.grad = Matrix(node.value.rows, node.value.cols);
        node.back = std::move(back);
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Tape::check_same_shape(const Var &a, const Var &b, const char *op) const {
    if (!a.value().same_shape(b.value()))
        throw Error(std::string(op) + " shape mismatch: " + a.value().shape_str() + " vs " +
                    b.value().shape_str());
}

Var Tape::constant(Matrix value) { return make(std::move(value), {}); }

Var Tape::scalar(double value) {
    Matrix m(1, 1);
    m.data[0] = value;
    return constant(std::move(m));
}

Var Tape::param(Parameter &p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var(this, it->second);
    Parameter *ptr = &p;
    Var v = make(p.value, {});
    if (grad_enabled_) {
        const std::size_t node = v.node();
        nodes_[node].back = [node, ptr](Tape &t) {
            const Matrix &g = t.nodes_[node].grad;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ptr->grad.data[i] += g.data[i];
        };
    }
    param_nodes_[&p] = v.node();
    return v;
}

Var Tape::matmul(Var a, Var b) {
    Matrix out;
    matmul_into(a.value(), b.value(), out);
    const std::size_t an = a.node(), bn = b.node();
    return make(std::move(out), [an, bn](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        matmul_into(g, t.nodes_[bn].value, t.nodes_[an].grad, false, true, true);
        matmul_into(t.nodes_[an].value, g, t.nodes_[bn].grad, true, false, true);
    });
}

Var Tape::add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Matrix out = a.value();
    const Matrix &bv = b.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    const std::size_t an = a.node(), bn = b.node();
    return make(std::move(out), [an, bn](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            t.nodes_[an].grad.data[i] += g.data[i];
            t.nodes_[bn].grad.data[i] += g.data[i];
        }
    });
}

Var Tape::sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Matrix out = a.value();
    const Matrix &bv = b.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
    const std::size_t an = a.node(), bn = b.node();
    return make(std::move(out), [an, bn](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            t.nodes_[an].grad.data[i] += g.data[i];
            t.nodes_[bn].grad.data[i] -= g.data[i];
        }
    });
}

Var Tape::mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Matrix out = a.value();
    const Matrix &bv = b.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    const std::size_t an = a.node(), bn = b.node();
    return make(std::move(out), [an, bn](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        const Matrix &av = t.nodes_[an].value;
        const Matrix &bv2 = t.nodes_[bn].value;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            t.nodes_[an].grad.data[i] += g.data[i] * bv2.data[i];
            t.nodes_[bn].grad.data[i] += g.data[i] * av.data[i];
        }
    });
}

Var Tape::scale(Var a, double factor) {
    Matrix out = a.value();
    for (double &v : out.data) v *= factor;
    const std::size_t an = a.node();
    return make(std::move(out), [an, factor](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            t.nodes_[an].grad.data[i] += factor * g.data[i];
    });
}

Var Tape::add_rowvec(Var a, Var row) {
    const Matrix &av = a.value();
    const Matrix &rv = row.value();
    if (rv.rows != 1 || rv.cols != av.cols)
        throw Error("add_rowvec shape mismatch: " + av.shape_str() + " vs " + rv.shape_str());
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) += rv.data[c];
    const std::size_t an = a.node(), rn = row.node();
    return make(std::move(out), [an, rn](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        for (std::size_t r = 0; r < g.rows; ++r)
            for (std::size_t c = 0; c < g.cols; ++c) {
                t.nodes_[an].grad.at(r, c) += g.at(r, c);
                t.nodes_[rn].grad.data[c] += g.at(r, c);
            }
    });
}

Var Tape::mul_rowvec(Var a, Var row) {
    const Matrix &av = a.value();
    const Matrix &rv = row.value();
    if (rv.rows != 1 || rv.cols != av.cols)
        throw Error("mul_rowvec shape mismatch: " + av.shape_str() + " vs " + rv.shape_str());
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) *= rv.data[c];
    const std::size_t an = a.node(), rn = row.node();
    return make(std::move(out), [an, rn](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        const Matrix &av2 = t.nodes_[an].value;
        const Matrix &rv2 = t.nodes_[rn].value;
        for (std::size_t r = 0; r < g.rows; ++r)
            for (std::size_t c = 0; c < g.cols; ++c) {
                t.nodes_[an].grad.at(r, c) += g.at(r, c) * rv2.data[c];
                t.nodes_[rn].grad.data[c] += g.at(r, c) * av2.at(r, c);
            }
    });
}

Var Tape::mul_colvec(Var a, Var col) {
    const Matrix &av = a.value();
    const Matrix &cv = col.value();
    if (cv.cols != 1 || cv.rows != av.rows)
        throw Error("mul_colvec shape mismatch: " + av.shape_str() + " vs " + cv.shape_str());
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) *= cv.data[r];
    const std::size_t an = a.node(), cn = col.node();
    return make(std::move(out), [an, cn](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        const Matrix &av2 = t.nodes_[an].value;
        const Matrix &cv2 = t.nodes_[cn].value;
        for (std::size_t r = 0; r < g.rows; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < g.cols; ++c) {
                t.nodes_[an].grad.at(r, c) += g.at(r, c) * cv2.data[r];
                acc += g.at(r, c) * av2.at(r, c);
            }
            t.nodes_[cn].grad.data[r] += acc;
        }
    });
}

Var Tape::concat_cols(const std::vector<Var> &parts) {
    if (parts.empty()) throw Error("concat_cols of no parts");
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    for (const Var &p : parts) {
        if (p.rows() != rows)
            throw Error("concat_cols row mismatch: " + p.value().shape_str());
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const Var &p : parts) {
        const Matrix &pv = p.value();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pv.cols; ++c) out.at(r, offset + c) = pv.at(r, c);
        offset += pv.cols;
    }
    std::vector<std::size_t> part_nodes;
    for (const Var &p : parts) part_nodes.push_back(p.node());
    return make(std::move(out), [part_nodes](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        std::size_t offset = 0;
        for (std::size_t pn : part_nodes) {
            Matrix &pg = t.nodes_[pn].grad;
            for (std::size_t r = 0; r < pg.rows; ++r)
                for (std::size_t c = 0; c < pg.cols; ++c)
                    pg.at(r, c) += g.at(r, offset + c);
            offset += pg.cols;
        }
    });
}

Var Tape::leaky_relu(Var a, double slope) {
    Matrix out = a.value();
    for (double &v : out.data) v = v >= 0.0 ? v : slope * v;
    const std::size_t an = a.node();
    return make(std::move(out), [an, slope](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        const Matrix &av = t.nodes_[an].value;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            t.nodes_[an].grad.data[i] += g.data[i] * (av.data[i] >= 0.0 ? 1.0 : slope);
    });
}

Var Tape::layer_norm(Var a) {
    constexpr double eps = 1e-12;
    const Matrix &av = a.value();
    Matrix out(av.rows, av.cols);
    std::vector<double> inv_std(av.rows);
    for (std::size_t r = 0; r < av.rows; ++r) {
        double mean = 0.0;
        for (std::size_t c = 0; c < av.cols; ++c) mean += av.at(r, c);
        mean /= static_cast<double>(av.cols);
        double var = 0.0;
        for (std::size_t c = 0; c < av.cols; ++c) {
            const double d = av.at(r, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(av.cols);
        const double r_std = 1.0 / std::sqrt(var + eps);
        inv_std[r] = r_std;
        for (std::size_t c = 0; c < av.cols; ++c)
            out.at(r, c) = (av.at(r, c) - mean) * r_std;
    }
    const std::size_t an = a.node();
    return make(std::move(out), [an, inv_std](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        const Matrix &y = t.nodes_[t.current_].value;
        const auto n = static_cast<double>(g.cols);
        for (std::size_t r = 0; r < g.rows; ++r) {
            double g_mean = 0.0, gy_mean = 0.0;
            for (std::size_t c = 0; c < g.cols; ++c) {
                g_mean += g.at(r, c);
                gy_mean += g.at(r, c) * y.at(r, c);
            }
            g_mean /= n;
            gy_mean /= n;
            for (std::size_t c = 0; c < g.cols; ++c)
                t.nodes_[an].grad.at(r, c) +=
                    inv_std[r] * (g.at(r, c) - g_mean - y.at(r, c) * gy_mean);
        }
    });
}

Var Tape::dropout(Var a, double p, bool training, Rng &rng) {
    if (p < 0.0 || p >= 1.0) throw Error("dropout probability must be in [0, 1)");
    if (!training || p == 0.0) return a;
    const Matrix &av = a.value();
    Matrix out = av;
    std::vector<char> mask(av.data.size());
    const double inv_keep = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        mask[i] = rng.bernoulli(p) ? 0 : 1;
        out.data[i] = mask[i] ? out.data[i] * inv_keep : 0.0;
    }
    const std::size_t an = a.node();
    return make(std::move(out), [an, mask, inv_keep](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            if (mask[i]) t.nodes_[an].grad.data[i] += g.data[i] * inv_keep;
    });
}

Var Tape::grouped_softmax(Var a, const std::vector<int> &groups) {
    const Matrix &av = a.value();
    if (av.cols != 1) throw Error("grouped_softmax expects a column vector");
    if (groups.size() != av.rows)
        throw Error("grouped_softmax group ids must cover every row");
    int n_groups = 0;
    for (int gid : groups) n_groups = std::max(n_groups, gid + 1);
    std::vector<double> group_max(static_cast<std::size_t>(n_groups),
                                  -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < groups.size(); ++i)
        group_max[groups[i]] = std::max(group_max[groups[i]], av.data[i]);
    std::vector<double> group_sum(static_cast<std::size_t>(n_groups), 0.0);
    Matrix out(av.rows, 1);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        out.data[i] = std::exp(av.data[i] - group_max[groups[i]]);
        group_sum[groups[i]] += out.data[i];
    }
    for (std::size_t i = 0; i < groups.size(); ++i) out.data[i] /= group_sum[groups[i]];
    const std::size_t an = a.node();
    const std::size_t ng = static_cast<std::size_t>(n_groups);
    return make(std::move(out), [an, groups, ng](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        const Matrix &y = t.nodes_[t.current_].value;
        std::vector<double> dot(ng, 0.0);
        for (std::size_t i = 0; i < groups.size(); ++i)
            dot[groups[i]] += g.data[i] * y.data[i];
        for (std::size_t i = 0; i < groups.size(); ++i)
            t.nodes_[an].grad.data[i] += y.data[i] * (g.data[i] - dot[groups[i]]);
    });
}

Var Tape::gather_rows(Var a, const std::vector<int> &indices) {
    const Matrix &av = a.value();
    Matrix out(indices.size(), av.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= av.rows)
            throw Error("gather_rows index out of range");
        for (std::size_t c = 0; c < av.cols; ++c)
            out.at(i, c) = av.at(static_cast<std::size_t>(indices[i]), c);
    }
    const std::size_t an = a.node();
    return make(std::move(out), [an, indices](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t c = 0; c < g.cols; ++c)
                t.nodes_[an].grad.at(static_cast<std::size_t>(indices[i]), c) += g.at(i, c);
    });
}

Var Tape::scatter_sum_rows(Var a, const std::vector<int> &indices, std::size_t out_rows) {
    const Matrix &av = a.value();
    if (indices.size() != av.rows)
        throw Error("scatter_sum_rows needs one index per row");
    Matrix out(out_rows, av.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= out_rows)
            throw Error("scatter_sum_rows index out of range");
        for (std::size_t c = 0; c < av.cols; ++c)
            out.at(static_cast<std::size_t>(indices[i]), c) += av.at(i, c);
    }
    const std::size_t an = a.node();
    return make(std::move(out), [an, indices](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t c = 0; c < g.cols; ++c)
                t.nodes_[an].grad.at(i, c) += g.at(static_cast<std::size_t>(indices[i]), c);
    });
}

Var Tape::mean_rows(Var a) {
    const Matrix &av = a.value();
    if (av.rows == 0) throw Error("mean_rows of an empty matrix");
    Matrix out(1, av.cols);
    for (std::size_t r = 0; r < av.rows; ++r)
        for (std::size_t c = 0; c < av.cols; ++c) out.data[c] += av.at(r, c);
    const double inv = 1.0 / static_cast<double>(av.rows);
    for (double &v : out.data) v *= inv;
    const std::size_t an = a.node();
    return make(std::move(out), [an, inv](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        Matrix &ag = t.nodes_[an].grad;
        for (std::size_t r = 0; r < ag.rows; ++r)
            for (std::size_t c = 0; c < ag.cols; ++c) ag.at(r, c) += g.data[c] * inv;
    });
}

Var Tape::sum(Var a) {
    const Matrix &av = a.value();
    Matrix out(1, 1);
    for (double v : av.data) out.data[0] += v;
    const std::size_t an = a.node();
    return make(std::move(out), [an](Tape &t) {
        const double g = t.nodes_[t.current_].grad.data[0];
        for (double &v : t.nodes_[an].grad.data) v += g;
    });
}

Var Tape::log(Var a) {
    Matrix out = a.value();
    for (double &v : out.data) v = std::log(v);
    const std::size_t an = a.node();
    return make(std::move(out), [an](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        const Matrix &av = t.nodes_[an].value;
        for (std::size_t i = 0; i < g.data.size(); ++i)
            t.nodes_[an].grad.data[i] += g.data[i] / av.data[i];
    });
}

Var Tape::huber(Var a, const Matrix &target, double delta) {
    const Matrix &av = a.value();
    if (!av.same_shape(target))
        throw Error("huber shape mismatch: " + av.shape_str() + " vs " + target.shape_str());
    Matrix out(av.rows, av.cols);
    for (std::size_t i = 0; i < av.data.size(); ++i) {
        const double d = av.data[i] - target.data[i];
        out.data[i] = std::fabs(d) <= delta ? 0.5 * d * d
                                            : delta * (std::fabs(d) - 0.5 * delta);
    }
    const std::size_t an = a.node();
    return make(std::move(out), [an, target, delta](Tape &t) {
        const Matrix &g = t.nodes_[t.current_].grad;
        const Matrix &av2 = t.nodes_[an].value;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double d = av2.data[i] - target.data[i];
            t.nodes_[an].grad.data[i] += g.data[i] * std::clamp(d, -delta, delta);
        }
    });
}

void Tape::backward(Var loss) {
    if (!grad_enabled_) throw Error("backward on a no-grad tape");
    if (backward_done_) throw Error("backward already ran on this tape");
    const Matrix &lv = loss.value();
    if (lv.rows != 1 || lv.cols != 1) throw Error("backward requires a scalar loss");
    backward_done_ = true;
    nodes_[loss.node()].grad.data[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        if (!nodes_[i].back) continue;
        current_ = i;
        nodes_[i].back(*this);
    }
}

} // namespace tsc::ad
