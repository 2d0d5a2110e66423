#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "braingnn/graph_data.hpp"
#include "braingnn/model.hpp"

namespace braingnn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction over a fixed set of parameter matrices.
/// One step() call is one optimizer step.
class Adam {
public:
    explicit Adam(std::vector<Matrix*> params, AdamConfig cfg = {});
    void step(const std::vector<const Matrix*>& grads, double lr);
    std::size_t steps() const { return t_; }

private:
    std::vector<Matrix*> params_;
    std::vector<Matrix> m_, v_;
    AdamConfig cfg_;
    std::size_t t_ = 0;
};

/// Stepwise-halved schedule: lr0 / 2^floor(epoch / halve_every).
double lr_at(int epoch, double lr0, int halve_every = 20);

/// F-score with label 1 as the positive class; probabilities at or above the
/// threshold predict positive. Returns 0 when precision + recall is 0.
double f_score(const std::vector<int>& labels, const std::vector<double>& probs,
               double threshold = 0.5);

struct TrainConfig {
    ModelConfig model;
    LossWeights loss;
    int epochs = 100;
    double lr0 = 0.001;
    int lr_halve_every = 20;
    int folds = 5;
    std::uint64_t seed = 0;
};

struct EpochMetrics {
    int epoch = 0;
    double lr = 0, l1 = 0, l2 = 0, lreg = 0, total = 0, train_f = 0, test_f = 0;
};

struct FoldResult {
    ModelParams params;
    std::vector<EpochMetrics> history;
    double train_f = 0, test_f = 0;  // final epoch
};

/// Trains one fold: per-graph Adam updates, fresh shuffle and fresh negative
/// samples every epoch, train/test F-score after each epoch. Aborts with a
/// descriptive error if the loss goes non-finite.
FoldResult train_fold(const Cohort& cohort, const std::vector<std::size_t>& train_idx,
                      const std::vector<std::size_t>& test_idx, const TrainConfig& cfg, int fold);

struct CvResult {
    FoldSplit split;
    std::vector<FoldResult> folds;
    double mean_train_f = 0, mean_test_f = 0;
};

/// Stratified subject-level k-fold cross-validation; folds run as
/// independent tasks and results are gathered in fold order.
CvResult cross_validate(const Cohort& cohort, const TrainConfig& cfg);

/// One JSON object per line, keys sorted, one line per epoch.
void write_metrics(const std::vector<EpochMetrics>& history, const std::string& path);
std::string metrics_line(const EpochMetrics& m);

}  // namespace braingnn
