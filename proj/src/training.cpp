#include "braingnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <stdexcept>

#include "braingnn/rng.hpp"
#include "json.hpp"

namespace braingnn {

Adam::Adam(std::vector<Matrix*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Matrix* p : params_) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
    }
}

void Adam::step(const std::vector<const Matrix*>& grads, double lr) {
    if (grads.size() != params_.size())
        throw std::invalid_argument("adam: gradient count does not match parameter count");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Matrix& p = *params_[i];
        const Matrix& g = *grads[i];
        if (!p.same_shape(g))
            throw std::invalid_argument("adam: gradient shape " + g.shape_str() +
                                        " does not match parameter " + p.shape_str());
        Matrix& m = m_[i];
        Matrix& v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g.data()[k];
            m.data()[k] = cfg_.beta1 * m.data()[k] + (1.0 - cfg_.beta1) * gk;
            v.data()[k] = cfg_.beta2 * v.data()[k] + (1.0 - cfg_.beta2) * gk * gk;
            const double mhat = m.data()[k] / bc1;
            const double vhat = v.data()[k] / bc2;
            p.data()[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p.require_finite("parameter after adam step");
    }
}

double lr_at(int epoch, double lr0, int halve_every) {
    if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
    if (halve_every <= 0) throw std::invalid_argument("lr_at: halving period must be positive");
    return std::ldexp(lr0, -(epoch / halve_every));
}

double f_score(const std::vector<int>& labels, const std::vector<double>& probs,
               double threshold) {
    if (labels.size() != probs.size())
        throw std::invalid_argument("f_score: labels and probabilities differ in length");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred = probs[i] >= threshold;
        if (pred && labels[i] == 1) ++tp;
        if (pred && labels[i] == 0) ++fp;
        if (!pred && labels[i] == 1) ++fn;
    }
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

namespace {

double fold_f(const ModelParams& params, const ModelConfig& cfg, const Cohort& cohort,
              const std::vector<std::size_t>& indices) {
    std::vector<int> labels;
    std::vector<double> probs;
    labels.reserve(indices.size());
    probs.reserve(indices.size());
    for (std::size_t i : indices) {
        labels.push_back(cohort.graphs[i].label);
        probs.push_back(predict(params, cfg, cohort.graphs[i]).cls.prob);
    }
    return f_score(labels, probs);
}

}  // namespace

FoldResult train_fold(const Cohort& cohort, const std::vector<std::size_t>& train_idx,
                      const std::vector<std::size_t>& test_idx, const TrainConfig& cfg,
                      int fold) {
    if (train_idx.empty() || test_idx.empty())
        throw std::invalid_argument("train_fold: empty train or test set");
    std::vector<int> labels(cohort.graphs.size());
    for (std::size_t i = 0; i < cohort.graphs.size(); ++i) labels[i] = cohort.graphs[i].label;
    const bool with_infomax = cfg.loss.lambda_infomax != 0.0;
    if (with_infomax) {
        bool has[2] = {false, false};
        for (std::size_t i : train_idx) has[labels[i]] = true;
        if (!has[0] || !has[1])
            throw std::invalid_argument("train_fold: infomax term needs both classes in train");
    }

    auto rng_init = make_rng(cfg.seed, "init", static_cast<std::uint64_t>(fold));
    auto rng_shuffle = make_rng(cfg.seed, "shuffle", static_cast<std::uint64_t>(fold));
    auto rng_neg = make_rng(cfg.seed, "negsample", static_cast<std::uint64_t>(fold));

    FoldResult result;
    result.params = init_params(cfg.model, rng_init);
    Adam adam(parameter_list(result.params));

    // Per-graph propagation operators never change; build them once.
    std::vector<GraphOps> ops(cohort.graphs.size());
    std::vector<bool> has_ops(cohort.graphs.size(), false);
    auto ops_for = [&](std::size_t i) -> const GraphOps& {
        if (!has_ops[i]) {
            ops[i] = make_graph_ops(cohort.graphs[i].adjacency, cfg.model.self_loop);
            has_ops[i] = true;
        }
        return ops[i];
    };

    std::vector<std::size_t> order(train_idx);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg.lr0, cfg.lr_halve_every);
        std::shuffle(order.begin(), order.end(), rng_shuffle);
        double sum_l1 = 0, sum_l2 = 0, sum_lreg = 0, sum_total = 0;
        for (std::size_t g : order) {
            const BrainGraph& graph = cohort.graphs[g];
            const BrainGraph* neg = nullptr;
            const GraphOps* neg_ops = nullptr;
            if (with_infomax) {
                const std::size_t ni = sample_negative(train_idx, labels, graph.label, rng_neg);
                neg = &cohort.graphs[ni];
                neg_ops = &ops_for(ni);
            }
            Tape tape;
            const ModelLeaves leaves = register_leaves(tape, result.params);
            const StepNodes step =
                build_step(tape, leaves, graph, ops_for(g), neg, neg_ops, cfg.loss);
            const double total = tape.value(step.total)(0, 0);
            if (!std::isfinite(total))
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         " on subject " + graph.subject_id);
            sum_l1 += tape.value(step.l1)(0, 0);
            if (step.l2 >= 0) sum_l2 += tape.value(step.l2)(0, 0);
            sum_lreg += tape.value(step.link_reg)(0, 0);
            sum_total += total;
            tape.backward(step.total);
            std::vector<const Matrix*> grads;
            grads.reserve(leaves.all.size());
            for (NodeId id : leaves.all) grads.push_back(&tape.grad(id));
            adam.step(grads, lr);
        }
        const double steps = static_cast<double>(order.size());
        EpochMetrics em;
        em.epoch = epoch;
        em.lr = lr;
        em.l1 = sum_l1 / steps;
        em.l2 = sum_l2 / steps;
        em.lreg = sum_lreg / steps;
        em.total = sum_total / steps;
        em.train_f = fold_f(result.params, cfg.model, cohort, train_idx);
        em.test_f = fold_f(result.params, cfg.model, cohort, test_idx);
        result.history.push_back(em);
    }
    result.train_f = result.history.back().train_f;
    result.test_f = result.history.back().test_f;
    return result;
}

CvResult cross_validate(const Cohort& cohort, const TrainConfig& cfg) {
    CvResult cv;
    cv.split = split_folds(cohort, cfg.folds, cfg.seed);
    std::vector<std::future<FoldResult>> tasks;
    tasks.reserve(static_cast<std::size_t>(cfg.folds));
    for (int fold = 0; fold < cfg.folds; ++fold) {
        tasks.push_back(std::async(std::launch::async, [&, fold] {
            return train_fold(cohort, cv.split.train_indices(cohort, fold),
                              cv.split.test_indices(cohort, fold), cfg, fold);
        }));
    }
    for (auto& t : tasks) cv.folds.push_back(t.get());
    for (const auto& f : cv.folds) {
        cv.mean_train_f += f.train_f;
        cv.mean_test_f += f.test_f;
    }
    cv.mean_train_f /= static_cast<double>(cfg.folds);
    cv.mean_test_f /= static_cast<double>(cfg.folds);
    return cv;
}

std::string metrics_line(const EpochMetrics& m) {
    nlohmann::json j{{"epoch", m.epoch}, {"lr", m.lr},           {"l1", m.l1},
                     {"l2", m.l2},       {"lreg", m.lreg},       {"total", m.total},
                     {"train_f", m.train_f}, {"test_f", m.test_f}};
    return j.dump();
}

void write_metrics(const std::vector<EpochMetrics>& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& m : history) out << metrics_line(m) << "\n";
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace braingnn
