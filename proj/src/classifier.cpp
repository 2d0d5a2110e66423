#include "braingnn/classifier.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace braingnn {

Matrix assignment_matrix(const Matrix& adjacency, const Matrix& h, const Matrix& theta_pool,
                         SelfLoop mode) {
    return softmax_rows(mean_pool_propagate(adjacency, h, theta_pool, mode));
}

Pooled pool(const Matrix& assignment, const Matrix& h, const Matrix& adjacency) {
    if (assignment.rows() != h.rows())
        throw std::invalid_argument("pool: assignment " + assignment.shape_str() +
                                    " does not match embeddings " + h.shape_str());
    const Matrix ft = transpose(assignment);
    return Pooled{matmul(ft, h), matmul(matmul(ft, adjacency), assignment)};
}

Matrix readout(const Matrix& m) {
    if (m.rows() == 0) throw std::invalid_argument("readout: empty matrix");
    Matrix r(1, m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j);
        r(0, j) = s / static_cast<double>(m.rows());
    }
    return r;
}

double link_reg_loss(const Matrix& adjacency, const Matrix& assignment) {
    return frobenius_norm(sub(adjacency, matmul(assignment, transpose(assignment))));
}

void ClassifierWeights::validate(std::size_t embed_dim) const {
    if (theta_pool.rows() != embed_dim || theta_pool.cols() == 0)
        throw std::invalid_argument("theta_pool must be " + std::to_string(embed_dim) +
                                    "xK, got " + theta_pool.shape_str());
    if (w1.rows() != embed_dim || w1.cols() == 0)
        throw std::invalid_argument("classifier w1 must be " + std::to_string(embed_dim) +
                                    "xH, got " + w1.shape_str());
    if (b1.rows() != 1 || b1.cols() != w1.cols())
        throw std::invalid_argument("classifier b1 must be 1x" + std::to_string(w1.cols()) +
                                    ", got " + b1.shape_str());
    if (w2.rows() != w1.cols() || w2.cols() != 1)
        throw std::invalid_argument("classifier w2 must be " + std::to_string(w1.cols()) +
                                    "x1, got " + w2.shape_str());
    if (b2.rows() != 1 || b2.cols() != 1)
        throw std::invalid_argument("classifier b2 must be 1x1, got " + b2.shape_str());
}

ClassifierNodes classify(Tape& tape, NodeId h, const Matrix& adjacency, const GraphOps& ops,
                         const ClassifierLeaves& leaves) {
    const NodeId prop = tape.constant(ops.prop);
    const NodeId a = tape.constant(adjacency);
    ClassifierNodes out;
    out.assignment =
        tape.softmax_rows(tape.matmul(tape.matmul(prop, h), leaves.theta_pool));
    const NodeId ft = tape.transpose(out.assignment);
    out.pooled_h = tape.matmul(ft, h);
    const std::size_t k = tape.value(out.assignment).cols();
    out.summary_in = tape.affine(
        tape.matmul(tape.constant(Matrix(1, k, 1.0)), out.pooled_h), 1.0 / static_cast<double>(k),
        0.0);
    const NodeId z1 =
        tape.sigmoid(tape.add(tape.matmul(out.summary_in, leaves.w1), leaves.b1));
    out.prob = tape.sigmoid(tape.add(tape.matmul(z1, leaves.w2), leaves.b2));
    const NodeId diff = tape.sub(a, tape.matmul(out.assignment, ft));
    out.link_reg = tape.sqrt(tape.sum(tape.hadamard(diff, diff)));
    return out;
}

ClassifierOutput classify_plain(const Matrix& h, const Matrix& adjacency, const GraphOps& ops,
                                const ClassifierWeights& w) {
    w.validate(h.cols());
    ClassifierOutput out;
    out.assignment = softmax_rows(matmul(matmul(ops.prop, h), w.theta_pool));
    out.pooled_h = matmul(transpose(out.assignment), h);
    out.summary_in = readout(out.pooled_h);
    const Matrix z1 = sigmoid(add(matmul(out.summary_in, w.w1), w.b1));
    out.prob = sigmoid(add(matmul(z1, w.w2), w.b2))(0, 0);
    out.link_reg = link_reg_loss(adjacency, out.assignment);
    return out;
}

}  // namespace braingnn
