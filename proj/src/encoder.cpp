#include "braingnn/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace braingnn {

Matrix add_self_loops(const Matrix& adjacency, SelfLoop mode) {
    if (adjacency.rows() != adjacency.cols())
        throw std::invalid_argument("add_self_loops: adjacency not square, " +
                                    adjacency.shape_str());
    Matrix a_hat = adjacency;
    if (mode == SelfLoop::add)
        for (std::size_t i = 0; i < a_hat.rows(); ++i) a_hat(i, i) += 1.0;
    return a_hat;
}

Matrix propagation_operator(const Matrix& adjacency, SelfLoop mode) {
    Matrix a_hat = add_self_loops(adjacency, mode);
    const std::size_t n = a_hat.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < n; ++j) d += a_hat(i, j);
        if (std::abs(d) < 1e-8)
            throw std::runtime_error("propagation_operator: degenerate degree " +
                                     std::to_string(d) + " at row " + std::to_string(i));
        const double inv = 1.0 / d;
        for (std::size_t j = 0; j < n; ++j) a_hat(i, j) *= inv;
    }
    return a_hat;
}

Matrix mean_pool_propagate(const Matrix& adjacency, const Matrix& x, const Matrix& theta,
                           SelfLoop mode) {
    return matmul(matmul(propagation_operator(adjacency, mode), x), theta);
}

GraphOps make_graph_ops(const Matrix& adjacency, SelfLoop mode) {
    return GraphOps{propagation_operator(adjacency, mode), add_self_loops(adjacency, mode)};
}

void EncoderWeights::validate(std::size_t in_dim) const {
    if (theta.empty()) throw std::invalid_argument("encoder needs at least one layer");
    std::size_t prev = in_dim;
    for (std::size_t l = 0; l < theta.size(); ++l) {
        if (theta[l].rows() != prev)
            throw std::invalid_argument("encoder layer " + std::to_string(l + 1) +
                                        " expects input width " + std::to_string(prev) +
                                        ", weight is " + theta[l].shape_str());
        prev = theta[l].cols();
    }
    if (theta.size() >= 2) {
        const std::size_t w1 = theta[0].cols();
        // The skip-sum H_{l-1} + ... + H_1 requires every pre-final layer to
        // share one width.
        for (std::size_t l = 0; l + 1 < theta.size(); ++l)
            if (theta[l].cols() != w1)
                throw std::invalid_argument("encoder hidden widths must match for the skip sum");
        if (skip.rows() != in_dim || skip.cols() != w1)
            throw std::invalid_argument("encoder skip weight must be " + std::to_string(in_dim) +
                                        "x" + std::to_string(w1) + ", got " + skip.shape_str());
    }
}

NodeId encode(Tape& tape, NodeId x, const GraphOps& ops, const std::vector<NodeId>& theta,
              NodeId skip) {
    if (theta.empty()) throw std::invalid_argument("encode: no layers");
    const NodeId prop = tape.constant(ops.prop);
    NodeId h = tape.sigmoid(tape.matmul(tape.matmul(prop, x), theta[0]));
    if (theta.size() == 1) return h;
    const NodeId axw = tape.matmul(tape.matmul(tape.constant(ops.a_hat), x), skip);
    NodeId sum_h = h;
    for (std::size_t l = 1; l < theta.size(); ++l) {
        const NodeId input = tape.add(sum_h, axw);
        h = tape.sigmoid(tape.matmul(tape.matmul(prop, input), theta[l]));
        if (l + 1 < theta.size()) sum_h = tape.add(sum_h, h);
    }
    return h;
}

Matrix encode_plain(const Matrix& x, const GraphOps& ops, const EncoderWeights& w) {
    w.validate(x.cols());
    Matrix h = sigmoid(matmul(matmul(ops.prop, x), w.theta[0]));
    if (w.theta.size() == 1) return h;
    const Matrix axw = matmul(matmul(ops.a_hat, x), w.skip);
    Matrix sum_h = h;
    for (std::size_t l = 1; l < w.theta.size(); ++l) {
        h = sigmoid(matmul(matmul(ops.prop, add(sum_h, axw)), w.theta[l]));
        if (l + 1 < w.theta.size()) sum_h = add(sum_h, h);
    }
    return h;
}

}  // namespace braingnn
