#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include "lwal/tensor.hpp"

namespace lwal {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only meaningful
// together with the tape that issued it.
struct Var {
    std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
};

// Reverse-mode autodiff tape.
//
// Forward ops append nodes in topological order; backward() walks the node
// list once in reverse, accumulating gradients into every node that
// requires them. A tape is single-use: after backward() the recorded graph
// is consumed and only values/gradients remain readable. Build a fresh tape
// per training step.
//
// A tape is confined to one thread. Tensors passed into leaf() are copied,
// so the originals stay immutable and shareable.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Record an input. Parameters pass requires_grad=true; data and other
    // constants (e.g. label centroids under the stop-gradient rule) leave it
    // false. Rejects non-finite values.
    Var leaf(Tensor value, bool requires_grad = false);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);          // elementwise
    Var scale(Var a, double c);
    Var add_rowvec(Var a, Var bias); // bias (shape {n}) added to every row of a (m x n)
    Var relu(Var a);                // subgradient at 0 is 0
    Var log(Var a);                 // requires strictly positive input
    Var exp(Var a);
    Var sum(Var a);                 // scalar

    // Numerically stable softmax over each row (per-row max subtraction).
    Var row_softmax(Var logits);

    // Entry (i,j) = sqrt(sum_k (z[i,k]-c[j,k])^2 + kDistanceEps). The epsilon
    // keeps the gradient defined when a row coincides with a center.
    Var row_l2_distance(Var z, Var centers);

    // Cosine similarity of two vectors (shape {d}); both norms must exceed
    // kDegenerateNorm.
    Var cosine_sim(Var u, Var v);

    // Mean over rows of -log(probs[i, labels[i]]). Rows of probs must be
    // probability distributions; a non-positive picked entry is a domain error.
    Var nll_mean(Var probs, std::vector<int> labels);

    // Sum of cosine similarities over unordered row pairs (i<j) with
    // different labels. Rows with norm <= kDegenerateNorm are skipped; the
    // number of skipped rows is written to *skipped_rows when non-null.
    Var repel_sum(Var z, std::vector<int> labels, std::size_t* skipped_rows = nullptr);

    // Seeds d(root)=1 and accumulates gradients through the recorded graph.
    // Root must be scalar. Consumes the tape.
    void backward(Var root);

    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;

    static constexpr double kDistanceEps = 1e-12;
    static constexpr double kDegenerateNorm = 1e-12;

  private:
    struct Node {
        Tensor value;
        Tensor grad; // same shape, zero until backward
        bool requires_grad = false;
        std::function<void(Tape&)> backprop; // empty for leaves
    };

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop,
             const char* op_name);
    const Node& node(Var v) const;
    Node& node(Var v);

    // deque keeps value()/grad() references stable while ops keep recording
    std::deque<Node> nodes_;
    bool consumed_ = false;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued function of one tensor. `fn` must rebuild the graph on
// the tape it is given and return the scalar output for the supplied input.
double grad_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& x, double h = 1e-6);

} // namespace lwal
