#include "braingnn/discriminator.hpp"

#include <stdexcept>

namespace braingnn {

namespace {
constexpr double kProbClamp = 1e-7;
}

Matrix summarize(const Matrix& r) { return sigmoid(r); }

Matrix score(const Matrix& h, const Matrix& m, const Matrix& s) {
    if (s.rows() != 1)
        throw std::invalid_argument("score: summary must be a row vector, got " + s.shape_str());
    return sigmoid(matmul(matmul(h, m), transpose(s)));
}

NodeId summarize(Tape& tape, NodeId r) { return tape.sigmoid(r); }

NodeId score(Tape& tape, NodeId h, NodeId m, NodeId s) {
    return tape.sigmoid(tape.matmul(tape.matmul(h, m), tape.transpose(s)));
}

NodeId infomax_loss(Tape& tape, NodeId pos_scores, NodeId neg_scores, bool literal_form) {
    const std::size_t n_pos = tape.value(pos_scores).rows();
    const std::size_t n_neg = tape.value(neg_scores).rows();
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("infomax_loss: empty scores");
    const double denom = static_cast<double>(n_pos + n_neg);
    const NodeId pos_term =
        tape.sum(tape.log(tape.clamp(pos_scores, kProbClamp, 1.0 - kProbClamp)));
    const NodeId neg_clamped = tape.clamp(neg_scores, kProbClamp, 1.0 - kProbClamp);
    if (literal_form) {
        const NodeId neg_term = tape.sum(tape.affine(tape.log(neg_clamped), -1.0, 1.0));
        return tape.affine(tape.add(pos_term, neg_term), 1.0 / denom, 0.0);
    }
    const NodeId neg_term = tape.sum(tape.log(tape.affine(neg_clamped, -1.0, 1.0)));
    return tape.affine(tape.add(pos_term, neg_term), -1.0 / denom, 0.0);
}

std::size_t sample_negative(const std::vector<std::size_t>& candidates,
                            const std::vector<int>& labels, int current_label,
                            std::mt19937_64& rng) {
    std::vector<std::size_t> pool;
    for (std::size_t idx : candidates) {
        if (idx >= labels.size())
            throw std::out_of_range("sample_negative: candidate index out of range");
        if (labels[idx] != current_label) pool.push_back(idx);
    }
    if (pool.empty())
        throw std::runtime_error("sample_negative: no opposite-class graph available");
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
}

}  // namespace braingnn
