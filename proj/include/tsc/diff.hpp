#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tsc/rng.hpp"

namespace tsc::ad {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double &at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix &other) const {
        return rows == other.rows && cols == other.cols;
    }
    std::string shape_str() const {
        return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
    }
};

// Named learnable array with gradient accumulator and AdamW state.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;
    std::uint64_t adam_step = 0;
};

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Ordered collection of parameters. References returned by create()/get()
// stay valid for the store's lifetime.
class ParamStore {
public:
    Parameter &create_zeros(const std::string &name, std::size_t rows, std::size_t cols);
    // uniform in [-sqrt(6/fan_in), +sqrt(6/fan_in)]
    Parameter &create_uniform(const std::string &name, std::size_t rows,
                              std::size_t cols, std::size_t fan_in, Rng &rng);
    Parameter &get(const std::string &name);
    const Parameter &get(const std::string &name) const;
    bool contains(const std::string &name) const { return params_.count(name) > 0; }

    std::size_t parameter_count() const; // total scalar count
    std::size_t tensor_count() const { return params_.size(); }
    void zero_grad();
    // decoupled-weight-decay Adam with bias correction; zeroes grads after
    void adamw_step(const AdamWConfig &config);
    void copy_values_from(const ParamStore &other); // shapes must match

    template <typename Fn> void for_each(Fn &&fn) {
        for (auto &[name, p] : params_) fn(p);
    }
    template <typename Fn> void for_each(Fn &&fn) const {
        for (const auto &[name, p] : params_) fn(p);
    }

private:
    std::map<std::string, Parameter> params_;
};

// Bit-exact binary checkpoint of several named stores, optimizer state
// included. Loading requires matching names and shapes.
void save_checkpoint(const std::string &path,
                     const std::vector<std::pair<std::string, const ParamStore *>> &stores);
void load_checkpoint(const std::string &path,
                     const std::vector<std::pair<std::string, ParamStore *>> &stores);

class Tape;

// Handle to a tape node.
class Var {
public:
    Var() = default;
    Var(Tape *tape, std::size_t node) : tape_(tape), node_(node) {}
    const Matrix &value() const;
    std::size_t rows() const { return value().rows; }
    std::size_t cols() const { return value().cols; }
    std::size_t node() const { return node_; }
    Tape *tape() const { return tape_; }

private:
    Tape *tape_ = nullptr;
    std::size_t node_ = 0;
};

// Reverse-mode tape over dense matrices. Nodes are created in topological
// order; backward() visits them exactly once in reverse.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Var constant(Matrix value);
    Var scalar(double value);
    // leaf for a parameter; memoized per Parameter pointer
    Var param(Parameter &p);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double factor);
    Var add_rowvec(Var a, Var row);   // (n x m) + (1 x m)
    Var mul_rowvec(Var a, Var row);   // (n x m) * (1 x m)
    Var mul_colvec(Var a, Var col);   // (n x m) * (n x 1)
    Var concat_cols(const std::vector<Var> &parts);
    Var leaky_relu(Var a, double slope = 0.01);
    Var layer_norm(Var a); // per-row standardization, no affine
    Var dropout(Var a, double p, bool training, Rng &rng);
    // softmax within groups; a must be (n x 1), group ids in [0, n_groups)
    Var grouped_softmax(Var a, const std::vector<int> &groups);
    Var gather_rows(Var a, const std::vector<int> &indices);
    Var scatter_sum_rows(Var a, const std::vector<int> &indices, std::size_t out_rows);
    Var mean_rows(Var a); // (n x m) -> (1 x m)
    Var sum(Var a);       // -> (1 x 1)
    Var log(Var a);
    // elementwise Huber of (a - target)
    Var huber(Var a, const Matrix &target, double delta = 1.0);

    // scalar loss only; fills parameter grads
    void backward(Var loss);

    const Matrix &value(std::size_t node) const { return nodes_[node].value; }
    Matrix &grad(std::size_t node) { return nodes_[node].grad; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(Tape &)> back; // empty for leaves/constants
    };

    Var make(Matrix value, std::function<void(Tape &)> back);
    void check_same_shape(const Var &a, const Var &b, const char *op) const;

    std::vector<Node> nodes_;
    std::map<const Parameter *, std::size_t> param_nodes_;
    std::size_t current_ = 0; // node whose closure is running during backward
    bool grad_enabled_ = true;
    bool backward_done_ = false;
};

// plain matrix product helper shared by forward and backward paths
void matmul_into(const Matrix &a, const Matrix &b, Matrix &out, bool transpose_a = false,
                 bool transpose_b = false, bool accumulate = false);

} // namespace tsc::ad
