#pragma once

#include <vector>

#include "braingnn/matrix.hpp"
#include "braingnn/tape.hpp"

namespace braingnn {

/// Whether the propagation operator adds a self-loop on top of whatever the
/// adjacency already carries. Correlation adjacencies have a unit diagonal,
/// so `add` gives the self-edge weight 2.
enum class SelfLoop { add, keep };

/// Â = A + I (or A unchanged under SelfLoop::keep).
Matrix add_self_loops(const Matrix& adjacency, SelfLoop mode = SelfLoop::add);

/// Row-normalized operator D̂⁻¹Â where D̂ is the diagonal of Â's row sums.
/// Rows of the result sum to 1. Throws if a row sum is near zero.
Matrix propagation_operator(const Matrix& adjacency, SelfLoop mode = SelfLoop::add);

/// Mean-pool propagation D̂⁻¹Â · X · Θ on plain matrices.
Matrix mean_pool_propagate(const Matrix& adjacency, const Matrix& x, const Matrix& theta,
                           SelfLoop mode = SelfLoop::add);

/// Per-graph constants reused by every forward pass on that graph.
struct GraphOps {
    Matrix prop;   // D̂⁻¹Â
    Matrix a_hat;  // Â
};
GraphOps make_graph_ops(const Matrix& adjacency, SelfLoop mode = SelfLoop::add);

struct EncoderWeights {
    std::vector<Matrix> theta;  // theta[l]: w_{l-1} x w_l, with w_0 = input dim
    Matrix skip;                // input dim x w_1, the Â·X·W shortcut into layers >= 2
    void validate(std::size_t in_dim) const;
};

/// Layer-wise forward on the tape:
///   H_1 = sigmoid(P X Θ_1)
///   H_l = sigmoid(P (H_{l-1} + ... + H_1 + Â X W) Θ_l)   for l >= 2
/// Returns the final layer's node-embedding node. `theta` and `skip` are
/// tape leaves so gradients reach the encoder weights.
NodeId encode(Tape& tape, NodeId x, const GraphOps& ops, const std::vector<NodeId>& theta,
              NodeId skip);

/// Same forward pass on plain matrices (inference path).
Matrix encode_plain(const Matrix& x, const GraphOps& ops, const EncoderWeights& w);

}  // namespace braingnn
