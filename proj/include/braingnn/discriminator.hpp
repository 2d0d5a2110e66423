#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "braingnn/matrix.hpp"
#include "braingnn/tape.hpp"

namespace braingnn {

/// Graph summary s = σ(r) for a 1 x w readout r.
Matrix summarize(const Matrix& r);

/// Bilinear scores σ(h_i M sᵀ) for every node embedding row, as N x 1.
Matrix score(const Matrix& h, const Matrix& m, const Matrix& s);

/// Taped versions; `r` is a tape node so gradients reach the summary.
NodeId summarize(Tape& tape, NodeId r);
NodeId score(Tape& tape, NodeId h, NodeId m, NodeId s);

/// Mutual-information loss over positive scores (this graph's nodes against
/// its own summary) and negative scores (an opposite-class graph's nodes
/// against the same summary):
///   L2 = -(1/2N) [ Σ log D(h_i, s) + Σ log(1 - D(h'_i, s)) ]
/// Scores are clamped to [1e-7, 1-1e-7] before the logs. With
/// `literal_form`, the second sum is Σ (1 - log D(h'_i, s)) and the leading
/// sign flips to +, reproducing the printed variant.
NodeId infomax_loss(Tape& tape, NodeId pos_scores, NodeId neg_scores, bool literal_form = false);

/// Picks a graph of the opposite class uniformly at random. `candidates`
/// holds cohort graph indices, `labels` is indexed by graph index; returns
/// the chosen graph index. Throws if no opposite-class candidate exists.
std::size_t sample_negative(const std::vector<std::size_t>& candidates,
                            const std::vector<int>& labels, int current_label,
                            std::mt19937_64& rng);

}  // namespace braingnn
