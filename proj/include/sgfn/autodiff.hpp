#pragma once

// Define-by-run reverse-mode automatic differentiation over dense 2-D tensors.
//
// A Tape records every operation applied to its Vars. Calling backward() on a
// scalar Var walks the tape in reverse and accumulates gradients into every
// Parameter that took part. Tapes are cheap to build and are meant to be
// discarded after each minibatch.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace sgfn::ad {

using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_str(const Tensor& t);

// Trainable tensor with a gradient accumulator that persists across tapes.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v);

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

class Tape;

class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Tensor& grad() const;
    Tape* tape() const { return tape_; }
    int id() const { return id_; }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

class Tape {
public:
    using Backprop = std::function<void(Tape&, int self)>;

    Var constant(Tensor value);
    Var constant(double value);
    Var param(Parameter& p);

    // Records a new node. `inputs` decides whether the node needs a gradient.
    Var record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop);

    // Reverse pass from a 1x1 root. Node gradients are zeroed first;
    // parameter gradients are accumulated (call Parameter::zero_grad yourself).
    void backward(Var root);

    const Tensor& value(int id) const;
    const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    Tensor& grad_mut(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        const Tensor* ref = nullptr;
        Parameter* param = nullptr;
        Tensor grad;
        Backprop backprop;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
};

// ---- primitives -----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var square(Var a);
Var scale(Var a, double k);
Var add_const(Var a, const Tensor& c);
Var mul_const(Var a, const Tensor& c);
Var sum(Var a);
Var mean(Var a);

Var matmul(Var a, Var b);
// x [N x in] * w [in x out] + b [1 x out], bias broadcast over rows.
Var affine(Var w, Var b, Var x);
// Elementwise max(x, lo); gradient passes only where x > lo.
Var clamp_min(Var x, double lo);
Var relu(Var x);
Var leaky_relu(Var x, double slope = 0.01);

// Row-wise log-softmax. The masked variant normalises over the true entries
// of each row only; false entries produce 0 and receive no gradient. Rows
// with no true entry are all-zero.
Var log_softmax(Var x);
Var masked_log_softmax(Var x, const Mask& mask);

Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count);
Var slice_cols(Var x, Eigen::Index begin, Eigen::Index count);
Var gather_rows(Var x, const std::vector<int>& rows);
// out[i] = x(i, cols[i]); result is [N x 1].
Var gather_cols(Var x, const std::vector<int>& cols);
// out[seg[i]] += x[i]; x is a column vector, result [nseg x 1].
Var segment_sum(Var x, const std::vector<int>& seg, int nseg);
// Repeats a 1x1 value into [rows x cols].
Var broadcast(Var s, Eigen::Index rows, Eigen::Index cols);

}  // namespace sgfn::ad
