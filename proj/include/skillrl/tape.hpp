#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "skillrl/tensor.hpp"

namespace skillrl::ad {

// Reverse-mode tape over a fixed primitive set:
//   matmul, add, mul, tanh, relu, softplus, exp, log, sum, mean,
//   slice, concat, gaussian_logpdf, lstm_cell
// Ops execute eagerly and record what backward() needs. There is no general
// broadcasting; add/mul/gaussian_logpdf accept exactly three shape forms
// (equal shapes, rank-1 row against rank-2 rows, single-element scalar),
// validated eagerly with the op name in the error.
//
// A tape is single-threaded. Parameter values are copied in as leaves, so
// snapshots are plain values.

enum class OpKind {
    Leaf,
    Matmul,
    Add,
    Mul,
    Tanh,
    Relu,
    Softplus,
    Exp,
    Log,
    Sum,
    Mean,
    Slice,
    Concat,
    GaussianLogPdf,
    LstmCell,
};

const char* op_name(OpKind k);

// Handle to a tape node output. LstmCell has two outputs (slot 0 = hidden,
// slot 1 = cell); every other op uses slot 0.
struct Var {
    int id = -1;
    int slot = 0;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    Var leaf(Tensor t);
    Var constant(Tensor t);         // leaf with requires_grad forced off
    Var constant_scalar(double v);  // shorthand for scalar constants

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var tanh(Var x);
    Var relu(Var x);
    Var softplus(Var x);
    Var exp(Var x);
    Var log(Var x);
    Var sum(Var x);   // full reduction -> scalar
    Var mean(Var x);  // full reduction -> scalar
    // rank-2: column range [c0, c1) over all rows; rank-1: element range
    Var slice(Var x, int c0, int c1);
    // rank-2: same row count, columns appended; rank-1: concatenation
    Var concat(Var a, Var b);
    // elementwise log N(x; mu, sigma^2); x and mu share a shape, sigma may
    // additionally be a per-column row or a scalar
    Var gaussian_logpdf(Var x, Var mu, Var sigma);
    // fused cell: x (B,I), h/c (B,H), w_ih (I,4H), w_hh (H,4H), b (4H);
    // gate packing order is [input, forget, candidate, output]
    std::pair<Var, Var> lstm_cell(Var x, Var h_prev, Var c_prev, Var w_ih, Var w_hh, Var b);

    // seeds d(loss)/d(loss) = 1 and accumulates gradients (sum over paths)
    // into every node that transitively depends on a requires_grad leaf
    void backward(Var loss);

    const Tensor& value(Var v) const;
    // valid only after backward(); shaped like value(v)
    const std::vector<double>& grad(Var v) const;

    size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }
    // drops all nodes, keeps allocated capacity
    void reset();

private:
    struct Node {
        OpKind kind = OpKind::Leaf;
        std::vector<Var> inputs;
        Tensor value;   // slot 0
        Tensor value2;  // slot 1 (LstmCell only)
        std::vector<double> grad;
        std::vector<double> grad2;
        bool needs_grad = false;
        int aux0 = 0, aux1 = 0;      // slice range / broadcast mode
        std::vector<Tensor> saved;   // lstm gate activations
    };

    int push(Node n);
    const Node& node(Var v) const { return nodes_[static_cast<size_t>(v.id)]; }
    Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }
    bool input_needs_grad(const Node& n) const;
    void check_finite(const Node& n, OpKind kind) const;
    void backward_node(int id);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// ---- helpers composed from the primitive set ----

// a - b  (add with a (-1)-scaled copy)
Var sub(Tape& t, Var a, Var b);
// elementwise negation
Var neg(Tape& t, Var x);
// x * c for a plain double
Var scale(Tape& t, Var x, double c);
// x + c for a plain double
Var shift(Tape& t, Var x, double c);
// elementwise square
Var square(Tape& t, Var x);

}  // namespace skillrl::ad
