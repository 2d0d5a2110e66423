#pragma once

#include <cstdint>
#include <vector>

#include "braingnn/matrix.hpp"

namespace braingnn {

using NodeId = std::int32_t;

/// Record of primitive matrix operations supporting one reverse sweep.
///
/// Nodes are appended in construction order, so ids are already a topological
/// order; backward() walks them in exact reverse, which means every consumer
/// of a value has pushed its gradient contribution before that value's own
/// node is processed. A Tape is confined to a single execution context.
class Tape {
public:
    /// Leaf whose gradient is not tracked (graph data, fixed operators).
    NodeId constant(Matrix value);
    /// Leaf with a tracked gradient (parameters, checked inputs).
    NodeId leaf(Matrix value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId hadamard(NodeId a, NodeId b);
    /// Entrywise mul*x + shift.
    NodeId affine(NodeId a, double mul, double shift);
    NodeId scale(NodeId a, double c) { return affine(a, c, 0.0); }
    NodeId sigmoid(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId transpose(NodeId a);
    /// Entrywise natural log; rejects non-positive entries.
    NodeId log(NodeId a);
    /// Entrywise square root; entries at exactly 0 get subgradient 0.
    NodeId sqrt(NodeId a);
    /// Entrywise clamp to [lo, hi]; gradient passes through unclipped entries.
    NodeId clamp(NodeId a, double lo, double hi);
    /// Sum of all entries -> 1x1.
    NodeId sum(NodeId a);

    /// Reverse sweep from a scalar root with seed gradient `seed` (default 1).
    /// Throws std::invalid_argument if the root is not 1x1.
    void backward(NodeId root, double seed = 1.0);

    const Matrix& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    /// Accumulated gradient; valid after backward(). Untracked or unreached
    /// nodes report an all-zero matrix of the value's shape.
    const Matrix& grad(NodeId id);
    bool tracked(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        kConstant,
        kLeaf,
        kMatmul,
        kAdd,
        kSub,
        kHadamard,
        kAffine,
        kSigmoid,
        kSoftmaxRows,
        kTranspose,
        kLog,
        kSqrt,
        kClamp,
        kSum,
    };

    struct Node {
        Op op;
        bool needs_grad;
        NodeId a = -1;
        NodeId b = -1;
        double c0 = 0.0;
        double c1 = 0.0;
        Matrix value;
        Matrix grad;  // allocated lazily during backward
    };

    NodeId push(Node node);
    Matrix& grad_buffer(NodeId id);
    void accumulate(NodeId id, const Matrix& contribution);

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

}  // namespace braingnn
