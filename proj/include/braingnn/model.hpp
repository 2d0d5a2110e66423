#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "braingnn/classifier.hpp"
#include "braingnn/discriminator.hpp"
#include "braingnn/encoder.hpp"
#include "braingnn/graph_data.hpp"

namespace braingnn {

struct ModelConfig {
    std::size_t in_dim = kNodeFeatureDim;
    std::vector<std::size_t> widths = {8, 8};  // encoder layer widths
    double pooling_ratio = 0.5;                // pooled size as a fraction of N
    std::size_t clusters = 8;                  // pooled graph size Q, see resolve_clusters
    std::size_t mlp_hidden = 16;
    SelfLoop self_loop = SelfLoop::add;

    std::size_t embed_dim() const { return widths.back(); }
    /// Sets clusters to ceil(pooling_ratio * nodes) for a given graph size.
    void resolve_clusters(std::size_t nodes);
};

struct ModelParams {
    EncoderWeights encoder;
    ClassifierWeights classifier;
    Matrix m;  // w x w bilinear form of the discriminator

    void validate(const ModelConfig& cfg) const;
};

/// All trainable matrices in one canonical order (encoder layers, skip,
/// pooling, MLP, discriminator). The optimizer, the tape leaves, and the
/// checkpoint format all rely on this order.
std::vector<Matrix*> parameter_list(ModelParams& p);
std::vector<const Matrix*> parameter_list(const ModelParams& p);

/// Fan-in uniform init U(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights,
/// zeros for biases, identity plus small uniform noise for the bilinear form.
ModelParams init_params(const ModelConfig& cfg, std::mt19937_64& rng);

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg, const std::string& path);
std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path);

/// Tape leaves for every parameter, in parameter_list order.
struct ModelLeaves {
    std::vector<NodeId> all;
    std::vector<NodeId> enc_theta;
    NodeId enc_skip;
    ClassifierLeaves cls;
    NodeId m;
};
ModelLeaves register_leaves(Tape& tape, const ModelParams& params);

struct LossWeights {
    double lambda_infomax = 1.0;
    double lambda_reg = 0.1;
    bool literal_infomax = false;
};

/// One training step's graph: everything from node embeddings to the joint
/// loss. When lambda_infomax is 0 the discriminator path (and the negative
/// graph) is skipped and `l2` stays -1.
struct StepNodes {
    NodeId h = -1;
    NodeId prob = -1;
    NodeId summary = -1;
    NodeId pos_scores = -1;
    NodeId neg_scores = -1;
    NodeId link_reg = -1;
    NodeId l1 = -1;
    NodeId l2 = -1;
    NodeId total = -1;
};

/// Binary cross-entropy of a 1x1 probability node against a 0/1 label,
/// with the probability clamped away from {0,1}.
NodeId bce_loss(Tape& tape, NodeId prob, int label);

StepNodes build_step(Tape& tape, const ModelLeaves& leaves, const BrainGraph& graph,
                     const GraphOps& ops, const BrainGraph* negative, const GraphOps* neg_ops,
                     const LossWeights& weights);

/// Inference forward pass on plain matrices.
struct Prediction {
    Matrix h;  // node embeddings
    ClassifierOutput cls;
};
Prediction predict(const ModelParams& params, const ModelConfig& cfg, const BrainGraph& graph);

}  // namespace braingnn
