#pragma once

#include "braingnn/encoder.hpp"
#include "braingnn/matrix.hpp"
#include "braingnn/tape.hpp"

namespace braingnn {

/// Cluster-assignment matrix: rows of softmax(D̂⁻¹Â H Θ_pool), one
/// distribution over clusters per node.
Matrix assignment_matrix(const Matrix& adjacency, const Matrix& h, const Matrix& theta_pool,
                         SelfLoop mode = SelfLoop::add);

/// Pooled node embeddings ϜᵀH and pooled adjacency ϜᵀAϜ.
struct Pooled {
    Matrix h;  // K x w
    Matrix a;  // K x K
};
Pooled pool(const Matrix& assignment, const Matrix& h, const Matrix& adjacency);

/// Column means as a 1 x w row vector.
Matrix readout(const Matrix& m);

/// ‖A − ϜϜᵀ‖_F against the pre-pooling adjacency.
double link_reg_loss(const Matrix& adjacency, const Matrix& assignment);

struct ClassifierWeights {
    Matrix theta_pool;  // w x K
    Matrix w1;          // w x hidden
    Matrix b1;          // 1 x hidden
    Matrix w2;          // hidden x 1
    Matrix b2;          // 1 x 1
    void validate(std::size_t embed_dim) const;
};

/// Tape nodes for the classifier head built on node embeddings `h`.
struct ClassifierNodes {
    NodeId assignment;  // N x K
    NodeId pooled_h;    // K x w
    NodeId summary_in;  // 1 x w readout r
    NodeId prob;        // 1 x 1 class-1 probability
    NodeId link_reg;    // 1 x 1 ‖A − ϜϜᵀ‖_F
};

struct ClassifierLeaves {
    NodeId theta_pool, w1, b1, w2, b2;
};

/// Builds assignment → pooling → readout → sigmoid MLP on the tape.
/// `adjacency` is the raw graph adjacency (constants); `ops` supplies the
/// propagation operator for the assignment scores.
ClassifierNodes classify(Tape& tape, NodeId h, const Matrix& adjacency, const GraphOps& ops,
                         const ClassifierLeaves& leaves);

/// Inference path on plain matrices; returns the class-1 probability.
struct ClassifierOutput {
    Matrix assignment;
    Matrix pooled_h;
    Matrix summary_in;  // readout r
    double prob = 0.0;
    double link_reg = 0.0;
};
ClassifierOutput classify_plain(const Matrix& h, const Matrix& adjacency, const GraphOps& ops,
                                const ClassifierWeights& w);

}  // namespace braingnn
