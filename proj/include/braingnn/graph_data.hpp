#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "braingnn/matrix.hpp"

namespace braingnn {

inline constexpr std::size_t kNodeFeatureDim = 10;

/// One subject's graph: z-scored node features (N x 10), correlation
/// adjacency (N x N, symmetric, unit diagonal), binary label
/// (1 = case class, 0 = control class).
struct BrainGraph {
    std::string subject_id;
    int label = 0;
    Matrix features;
    Matrix adjacency;
    std::vector<std::string> roi_names;

    std::size_t num_nodes() const { return adjacency.rows(); }
    /// Checks the structural invariants; throws std::runtime_error on violation.
    void validate() const;
};

/// Generator-known ground truth: which ROIs carry a planted group difference.
struct PlantedTruth {
    std::vector<std::size_t> separable_rois;
    double effect_size = 0.0;
};

struct GeneratorConfig {
    std::size_t subjects_per_class = 60;
    std::size_t rois = 148;
    std::size_t timesteps = 150;
    std::vector<std::size_t> separable_rois;
    double effect_size = 0.0;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;
    /// Extra jittered copies per subject; replicas keep the subject id so
    /// fold splitting stays subject-level.
    std::size_t augment_replicas = 0;
    double jitter_sd = 0.05;
};

struct Cohort {
    std::vector<BrainGraph> graphs;
    std::size_t parcellation_size = 0;
    std::optional<GeneratorConfig> generator;
    std::optional<PlantedTruth> planted_truth;

    void validate() const;
    /// Subject ids in order of first appearance, with their labels.
    std::vector<std::pair<std::string, int>> subjects() const;
};

struct FoldSplit {
    int k = 0;
    std::map<std::string, int> assignment;  // subject_id -> fold index

    std::vector<std::size_t> graph_indices(const Cohort& cohort, int fold, bool test) const;
    std::vector<std::size_t> test_indices(const Cohort& cohort, int fold) const {
        return graph_indices(cohort, fold, true);
    }
    std::vector<std::size_t> train_indices(const Cohort& cohort, int fold) const {
        return graph_indices(cohort, fold, false);
    }
};

/// Pearson correlation between all row pairs of an N x T time-series matrix.
/// Symmetric, unit diagonal, entries clamped to [-1, 1]. A zero-variance row
/// yields 0 off-diagonal (1 on the diagonal) and a warning on stderr.
Matrix correlation_adjacency(const Matrix& timeseries);

/// Concatenates the node attribute columns in the order
/// [degree, beta1..beta4, mean, std, x, y, z]. Degree is the row sum of
/// |adjacency| minus the self-loop. With zscore set, each column is
/// standardized across nodes (zero-variance columns become all zero).
Matrix build_node_features(const Matrix& timeseries, const Matrix& glm_betas,
                           const Matrix& centroids, const Matrix& adjacency,
                           bool zscore = true);

/// Deterministic synthetic cohort with a planted group difference on the
/// GLM-beta block of the configured ROIs. The result carries its generator
/// config and planted truth.
Cohort generate_synthetic(const GeneratorConfig& cfg);

/// Stratified subject-level k-fold assignment; deterministic given seed.
FoldSplit split_folds(const Cohort& cohort, int k, std::uint64_t seed);

void save_cohort(const Cohort& cohort, const std::string& path);
Cohort load_cohort(const std::string& path);

}  // namespace braingnn
