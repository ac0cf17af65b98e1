#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "nesycl/tensor.hpp"

namespace nesycl {

// Floor applied to probabilities before taking logs; keeps losses finite
// when a replayed label becomes knowledge-inconsistent mid-training.
inline constexpr double kLogEps = 1e-12;

inline double floored_log(double p) { return std::log(p > kLogEps ? p : kLogEps); }

// -log p with the kLogEps floor.
inline double nll_scalar(double prob_of_truth) { return -floored_log(prob_of_truth); }

// KL(p || q) = sum p_i (log p_i - log q_i), with 0*log0 := 0 and q floored.
double kl_divergence(std::span<const double> p, std::span<const double> q);

double l1_distance(std::span<const double> p, std::span<const double> q);

class Tape;

// Handle to a node on a tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so parents
// always precede children and the backward sweep is a single reverse pass
// that visits each node exactly once.
class Tape {
  public:
    enum class Op {
        kLeaf,
        kConst,
        kAdd,
        kSub,
        kMul,
        kScale,
        kMatmul,
        kAddRowVec,
        kRelu,
        kSoftmaxRows,
        kLogFloored,
        kSum,
        kMean,
        kPick,
        kNll,
        kKlToConst,
        kMseToConst,
        kMulConst,
        kSubConst,
        kBilinear,
        kCustom,
    };

    struct Node {
        Op op;
        std::array<int, 3> parent{-1, -1, -1};
        std::vector<int> custom_parents;  // kCustom only; arbitrary arity
        Tensor value;
        std::vector<double> grad;
        bool needs_grad = false;
        Tensor* bound = nullptr;  // leaf target
        double scalar = 0.0;
        std::size_t index = 0;
        std::vector<double> payload;  // constants for *_to_const ops
        std::function<void(Tape&, int)> custom_backward;
    };

    // Leaf borrowing a parameter tensor; backward accumulates into its grad.
    Var leaf(Tensor* param);
    // Constant value owned by the tape; never receives gradient.
    Var constant(Tensor value);
    Var constant_row(std::span<const double> values);
    Var scalar(double v);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var matmul(Var a, Var b);
    Var add_rowvec(Var m, Var bias);
    Var relu(Var a);
    Var softmax_rows(Var logits);
    Var log_floored(Var a);
    Var sum(Var a);
    Var mean(Var a);
    Var pick(Var a, std::size_t index);
    Var nll(Var prob_scalar);
    // Scalar KL(p || q) for a probability row p against a fixed q.
    Var kl_to_const(Var p, std::span<const double> q);
    // Mean over elements of (x_i - q_i)^2 against a fixed q.
    Var mse_to_const(Var x, std::span<const double> q);
    Var mul_const(Var a, std::span<const double> w);
    Var sub_const(Var a, std::span<const double> w);
    // z1 (1 x d1), z2 (1 x d2), w flat (classes x d1 x d2) -> scores (1 x classes)
    Var bilinear(Var z1, Var z2, Var w);
    Var custom(Tensor value, std::vector<Var> parents, std::function<void(Tape&, int)> backward);

    // Reverse sweep seeding d loss / d loss = 1. Loss must be scalar.
    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    std::vector<double>& grad(Var v) { return nodes_[v.id].grad; }
    const Node& node(int id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

  private:
    int push(Node n);
    Var unary(Op op, Var a, Tensor value);
    Var binary(Op op, Var a, Var b, Tensor value);
    void backward_node(int id);

    std::vector<Node> nodes_;
};

}  // namespace nesycl
