#include "braingnn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace braingnn {

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Matrix value) {
    return push({Op::kConstant, false, -1, -1, 0.0, 0.0, std::move(value), {}});
}

NodeId Tape::leaf(Matrix value) {
    return push({Op::kLeaf, true, -1, -1, 0.0, 0.0, std::move(value), {}});
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    Matrix v = braingnn::matmul(value(a), value(b));
    bool ng = tracked(a) || tracked(b);
    return push({Op::kMatmul, ng, a, b, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::add(NodeId a, NodeId b) {
    Matrix v = braingnn::add(value(a), value(b));
    bool ng = tracked(a) || tracked(b);
    return push({Op::kAdd, ng, a, b, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::sub(NodeId a, NodeId b) {
    Matrix v = braingnn::sub(value(a), value(b));
    bool ng = tracked(a) || tracked(b);
    return push({Op::kSub, ng, a, b, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
    Matrix v = braingnn::hadamard(value(a), value(b));
    bool ng = tracked(a) || tracked(b);
    return push({Op::kHadamard, ng, a, b, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::affine(NodeId a, double mul, double shift) {
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = mul * v.data()[i] + shift;
    v.require_finite("affine result");
    return push({Op::kAffine, tracked(a), a, -1, mul, shift, std::move(v), {}});
}

NodeId Tape::sigmoid(NodeId a) {
    Matrix v = braingnn::sigmoid(value(a));
    return push({Op::kSigmoid, tracked(a), a, -1, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::softmax_rows(NodeId a) {
    Matrix v = braingnn::softmax_rows(value(a));
    return push({Op::kSoftmaxRows, tracked(a), a, -1, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::transpose(NodeId a) {
    Matrix v = braingnn::transpose(value(a));
    return push({Op::kTranspose, tracked(a), a, -1, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::log(NodeId a) {
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v.data()[i] > 0.0)) {
            throw std::domain_error("log: non-positive entry " + std::to_string(v.data()[i]));
        }
        v.data()[i] = std::log(v.data()[i]);
    }
    return push({Op::kLog, tracked(a), a, -1, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::sqrt(NodeId a) {
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v.data()[i] < 0.0) {
            throw std::domain_error("sqrt: negative entry " + std::to_string(v.data()[i]));
        }
        v.data()[i] = std::sqrt(v.data()[i]);
    }
    return push({Op::kSqrt, tracked(a), a, -1, 0.0, 0.0, std::move(v), {}});
}

NodeId Tape::clamp(NodeId a, double lo, double hi) {
    Matrix v = value(a);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v.data()[i] < lo) v.data()[i] = lo;
        if (v.data()[i] > hi) v.data()[i] = hi;
    }
    return push({Op::kClamp, tracked(a), a, -1, lo, hi, std::move(v), {}});
}

NodeId Tape::sum(NodeId a) {
    Matrix v(1, 1, sum_all(value(a)));
    v.require_finite("sum result");
    return push({Op::kSum, tracked(a), a, -1, 0.0, 0.0, std::move(v), {}});
}

Matrix& Tape::grad_buffer(NodeId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() && n.value.size() > 0) {
        n.grad = Matrix(n.value.rows(), n.value.cols());
    }
    return n.grad;
}

void Tape::accumulate(NodeId id, const Matrix& contribution) {
    if (!tracked(id)) return;
    Matrix& g = grad_buffer(id);
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += contribution.data()[i];
}

const Matrix& Tape::grad(NodeId id) {
    if (!ran_backward_) {
        throw std::logic_error("Tape::grad called before backward");
    }
    return grad_buffer(id);
}

void Tape::backward(NodeId root, double seed) {
    const Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.value.rows() != 1 || r.value.cols() != 1) {
        throw std::invalid_argument("backward: root must be a 1x1 scalar, got " +
                                    r.value.shape_str());
    }
    ran_backward_ = true;
    grad_buffer(root)(0, 0) += seed;

    for (NodeId id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad || n.grad.empty()) continue;
        const Matrix& g = n.grad;
        switch (n.op) {
            case Op::kConstant:
            case Op::kLeaf:
                break;
            case Op::kMatmul: {
                if (tracked(n.a)) {
                    accumulate(n.a, braingnn::matmul(g, braingnn::transpose(value(n.b))));
                }
                if (tracked(n.b)) {
                    accumulate(n.b, braingnn::matmul(braingnn::transpose(value(n.a)), g));
                }
                break;
            }
            case Op::kAdd:
                accumulate(n.a, g);
                accumulate(n.b, g);
                break;
            case Op::kSub:
                accumulate(n.a, g);
                if (tracked(n.b)) accumulate(n.b, braingnn::scale(g, -1.0));
                break;
            case Op::kHadamard:
                if (tracked(n.a)) accumulate(n.a, braingnn::hadamard(g, value(n.b)));
                if (tracked(n.b)) accumulate(n.b, braingnn::hadamard(g, value(n.a)));
                break;
            case Op::kAffine:
                if (tracked(n.a)) accumulate(n.a, braingnn::scale(g, n.c0));
                break;
            case Op::kSigmoid: {
                if (!tracked(n.a)) break;
                Matrix d = n.value;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d.data()[i] = g.data()[i] * d.data()[i] * (1.0 - d.data()[i]);
                }
                accumulate(n.a, d);
                break;
            }
            case Op::kSoftmaxRows: {
                if (!tracked(n.a)) break;
                // Per row: dx_j = y_j * (g_j - sum_k g_k y_k).
                Matrix d(n.value.rows(), n.value.cols());
                for (std::size_t i = 0; i < n.value.rows(); ++i) {
                    const double* y = n.value.row(i);
                    const double* gr = g.row(i);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n.value.cols(); ++j) dot += gr[j] * y[j];
                    double* out = d.row(i);
                    for (std::size_t j = 0; j < n.value.cols(); ++j) {
                        out[j] = y[j] * (gr[j] - dot);
                    }
                }
                accumulate(n.a, d);
                break;
            }
            case Op::kTranspose:
                if (tracked(n.a)) accumulate(n.a, braingnn::transpose(g));
                break;
            case Op::kLog: {
                if (!tracked(n.a)) break;
                const Matrix& x = value(n.a);
                Matrix d = g;
                for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] /= x.data()[i];
                accumulate(n.a, d);
                break;
            }
            case Op::kSqrt: {
                if (!tracked(n.a)) break;
                Matrix d = g;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double y = n.value.data()[i];
                    d.data()[i] = y > 0.0 ? d.data()[i] * 0.5 / y : 0.0;
                }
                accumulate(n.a, d);
                break;
            }
            case Op::kClamp: {
                if (!tracked(n.a)) break;
                const Matrix& x = value(n.a);
                Matrix d = g;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    if (x.data()[i] < n.c0 || x.data()[i] > n.c1) d.data()[i] = 0.0;
                }
                accumulate(n.a, d);
                break;
            }
            case Op::kSum: {
                if (!tracked(n.a)) break;
                const Matrix& x = value(n.a);
                accumulate(n.a, Matrix(x.rows(), x.cols(), g(0, 0)));
                break;
            }
        }
    }
}

}  // namespace braingnn
