#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "braingnn/model.hpp"
#include "braingnn/training.hpp"

namespace braingnn {

/// Node embeddings regrouped by ROI: per_roi[k] holds one row per selected
/// graph (S x w), row order following `indices`.
struct EmbeddingSet {
    std::vector<Matrix> per_roi;
    std::vector<int> labels;
    std::vector<std::string> subject_ids;
    std::vector<std::string> roi_names;
};
EmbeddingSet extract_embeddings(const ModelParams& params, const ModelConfig& cfg,
                                const Cohort& cohort, const std::vector<std::size_t>& indices);

struct TsneConfig {
    double perplexity = 5.0;
    int iters = 1000;
    double exaggeration = 12.0;
    int exaggeration_iters = 250;
    double step = 200.0;
    double momentum_early = 0.5;
    double momentum_late = 0.8;
    int momentum_switch = 250;
    std::uint64_t seed = 0;
};

struct TsneResult {
    Matrix coords;  // S x 2
    double kl = 0.0;
};

/// Exact t-SNE to two dimensions. Requires at least 4 points and
/// 3 * perplexity < S - 1.
TsneResult tsne(const Matrix& x, const TsneConfig& cfg);

/// Mean silhouette over points with Euclidean distances. A point in a
/// singleton cluster scores 0, as does a point with max(a, b) = 0.
double silhouette(const Matrix& coords, const std::vector<int>& labels);

struct RegionScore {
    std::size_t roi = 0;
    std::string name;
    double silhouette = 0.0;
    double kl = 0.0;
    bool marked = false;
};

struct RegionReport {
    std::vector<RegionScore> scores;
    std::vector<std::size_t> marked;
    double threshold = 0.0;
    std::vector<Matrix> coords;  // per ROI, S x 2
    std::vector<int> labels;
};

/// Embeds every ROI's node-embedding cloud with t-SNE, scores class
/// separation with the silhouette, and marks ROIs strictly above the
/// threshold.
RegionReport mark_regions(const ModelParams& params, const ModelConfig& cfg,
                          const Cohort& cohort, const std::vector<std::size_t>& indices,
                          double threshold, const TsneConfig& tsne_cfg);

/// Writes regions.tsv, summary.json, and an roi_<k>.svg scatter for each
/// marked ROI into `dir` (created if missing).
void emit_report(const RegionReport& report, const std::string& dir);

}  // namespace braingnn
