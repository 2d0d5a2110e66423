#include "braingnn/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace braingnn {

using nlohmann::json;

void ModelConfig::resolve_clusters(std::size_t nodes) {
    if (pooling_ratio <= 0.0 || pooling_ratio > 1.0)
        throw std::invalid_argument("pooling ratio must be in (0, 1]");
    if (nodes == 0) throw std::invalid_argument("cannot pool an empty graph");
    clusters = static_cast<std::size_t>(
        std::ceil(pooling_ratio * static_cast<double>(nodes)));
}

void ModelParams::validate(const ModelConfig& cfg) const {
    encoder.validate(cfg.in_dim);
    if (encoder.theta.size() != cfg.widths.size())
        throw std::invalid_argument("encoder layer count does not match config");
    for (std::size_t l = 0; l < cfg.widths.size(); ++l)
        if (encoder.theta[l].cols() != cfg.widths[l])
            throw std::invalid_argument("encoder layer " + std::to_string(l + 1) +
                                        " width does not match config");
    classifier.validate(cfg.embed_dim());
    if (classifier.theta_pool.cols() != cfg.clusters)
        throw std::invalid_argument("theta_pool cluster count does not match config");
    if (classifier.w1.cols() != cfg.mlp_hidden)
        throw std::invalid_argument("mlp hidden width does not match config");
    if (m.rows() != cfg.embed_dim() || m.cols() != cfg.embed_dim())
        throw std::invalid_argument("bilinear form must be " + std::to_string(cfg.embed_dim()) +
                                    "x" + std::to_string(cfg.embed_dim()) + ", got " +
                                    m.shape_str());
}

std::vector<Matrix*> parameter_list(ModelParams& p) {
    std::vector<Matrix*> out;
    for (auto& t : p.encoder.theta) out.push_back(&t);
    out.push_back(&p.encoder.skip);
    out.push_back(&p.classifier.theta_pool);
    out.push_back(&p.classifier.w1);
    out.push_back(&p.classifier.b1);
    out.push_back(&p.classifier.w2);
    out.push_back(&p.classifier.b2);
    out.push_back(&p.m);
    return out;
}

std::vector<const Matrix*> parameter_list(const ModelParams& p) {
    auto mutable_list = parameter_list(const_cast<ModelParams&>(p));
    return {mutable_list.begin(), mutable_list.end()};
}

namespace {

Matrix fan_in_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::mt19937_64& rng) {
    if (cfg.widths.empty()) throw std::invalid_argument("config needs at least one layer width");
    ModelParams p;
    std::size_t prev = cfg.in_dim;
    for (std::size_t w : cfg.widths) {
        p.encoder.theta.push_back(fan_in_uniform(prev, w, rng));
        prev = w;
    }
    p.encoder.skip = fan_in_uniform(cfg.in_dim, cfg.widths.front(), rng);
    const std::size_t w = cfg.embed_dim();
    p.classifier.theta_pool = fan_in_uniform(w, cfg.clusters, rng);
    p.classifier.w1 = fan_in_uniform(w, cfg.mlp_hidden, rng);
    p.classifier.b1 = Matrix(1, cfg.mlp_hidden);
    p.classifier.w2 = fan_in_uniform(cfg.mlp_hidden, 1, rng);
    p.classifier.b2 = Matrix(1, 1);
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    p.m = Matrix::identity(w);
    for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < w; ++j) p.m(i, j) += noise(rng);
    p.validate(cfg);
    return p;
}

namespace {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::runtime_error(what + ": expected a non-empty array of arrays");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw std::runtime_error(what + ": ragged row " + std::to_string(i));
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg, const std::string& path) {
    params.validate(cfg);
    json j;
    j["schema_version"] = 1;
    j["kind"] = "checkpoint";
    j["config"] = json{{"in_dim", cfg.in_dim},
                       {"widths", cfg.widths},
                       {"pooling_ratio", cfg.pooling_ratio},
                       {"clusters", cfg.clusters},
                       {"mlp_hidden", cfg.mlp_hidden},
                       {"self_loop", cfg.self_loop == SelfLoop::add ? "add" : "keep"}};
    json enc_theta = json::array();
    for (const auto& t : params.encoder.theta) enc_theta.push_back(matrix_to_json(t));
    j["params"] = json{{"enc_theta", std::move(enc_theta)},
                       {"enc_skip", matrix_to_json(params.encoder.skip)},
                       {"theta_pool", matrix_to_json(params.classifier.theta_pool)},
                       {"w1", matrix_to_json(params.classifier.w1)},
                       {"b1", matrix_to_json(params.classifier.b1)},
                       {"w2", matrix_to_json(params.classifier.w2)},
                       {"b2", matrix_to_json(params.classifier.b2)},
                       {"m", matrix_to_json(params.m)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(1, '\t') << "\n";
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("failed to parse " + path + ": " + e.what());
    }
    try {
        if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
            throw std::runtime_error("missing schema_version");
        const int version = j["schema_version"].get<int>();
        if (version != 1)
            throw std::runtime_error("unsupported schema_version " + std::to_string(version));
        if (j.value("kind", "") != "checkpoint")
            throw std::runtime_error("kind is not \"checkpoint\"");
        ModelConfig cfg;
        const json& cj = j.at("config");
        cfg.in_dim = cj.at("in_dim").get<std::size_t>();
        cfg.widths = cj.at("widths").get<std::vector<std::size_t>>();
        cfg.pooling_ratio = cj.at("pooling_ratio").get<double>();
        cfg.clusters = cj.at("clusters").get<std::size_t>();
        cfg.mlp_hidden = cj.at("mlp_hidden").get<std::size_t>();
        const std::string mode = cj.at("self_loop").get<std::string>();
        if (mode == "add") {
            cfg.self_loop = SelfLoop::add;
        } else if (mode == "keep") {
            cfg.self_loop = SelfLoop::keep;
        } else {
            throw std::runtime_error("unknown self_loop mode \"" + mode + "\"");
        }
        ModelParams p;
        const json& pj = j.at("params");
        for (const auto& t : pj.at("enc_theta"))
            p.encoder.theta.push_back(matrix_from_json(t, "enc_theta"));
        p.encoder.skip = matrix_from_json(pj.at("enc_skip"), "enc_skip");
        p.classifier.theta_pool = matrix_from_json(pj.at("theta_pool"), "theta_pool");
        p.classifier.w1 = matrix_from_json(pj.at("w1"), "w1");
        p.classifier.b1 = matrix_from_json(pj.at("b1"), "b1");
        p.classifier.w2 = matrix_from_json(pj.at("w2"), "w2");
        p.classifier.b2 = matrix_from_json(pj.at("b2"), "b2");
        p.m = matrix_from_json(pj.at("m"), "m");
        p.validate(cfg);
        return {std::move(p), cfg};
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed checkpoint file " + path + ": " + e.what());
    }
}

ModelLeaves register_leaves(Tape& tape, const ModelParams& params) {
    ModelLeaves leaves;
    for (const auto& t : params.encoder.theta) {
        leaves.enc_theta.push_back(tape.leaf(t));
        leaves.all.push_back(leaves.enc_theta.back());
    }
    leaves.enc_skip = tape.leaf(params.encoder.skip);
    leaves.cls.theta_pool = tape.leaf(params.classifier.theta_pool);
    leaves.cls.w1 = tape.leaf(params.classifier.w1);
    leaves.cls.b1 = tape.leaf(params.classifier.b1);
    leaves.cls.w2 = tape.leaf(params.classifier.w2);
    leaves.cls.b2 = tape.leaf(params.classifier.b2);
    leaves.m = tape.leaf(params.m);
    leaves.all.push_back(leaves.enc_skip);
    leaves.all.push_back(leaves.cls.theta_pool);
    leaves.all.push_back(leaves.cls.w1);
    leaves.all.push_back(leaves.cls.b1);
    leaves.all.push_back(leaves.cls.w2);
    leaves.all.push_back(leaves.cls.b2);
    leaves.all.push_back(leaves.m);
    return leaves;
}

NodeId bce_loss(Tape& tape, NodeId prob, int label) {
    if (label != 0 && label != 1) throw std::invalid_argument("bce_loss: label must be 0 or 1");
    const NodeId clamped = tape.clamp(prob, 1e-7, 1.0 - 1e-7);
    if (label == 1) return tape.affine(tape.log(clamped), -1.0, 0.0);
    return tape.affine(tape.log(tape.affine(clamped, -1.0, 1.0)), -1.0, 0.0);
}

StepNodes build_step(Tape& tape, const ModelLeaves& leaves, const BrainGraph& graph,
                     const GraphOps& ops, const BrainGraph* negative, const GraphOps* neg_ops,
                     const LossWeights& weights) {
    StepNodes step;
    const NodeId x = tape.constant(graph.features);
    step.h = encode(tape, x, ops, leaves.enc_theta, leaves.enc_skip);
    const ClassifierNodes cls = classify(tape, step.h, graph.adjacency, ops, leaves.cls);
    step.prob = cls.prob;
    step.link_reg = cls.link_reg;
    step.l1 = bce_loss(tape, step.prob, graph.label);
    step.total = tape.add(step.l1, tape.affine(step.link_reg, weights.lambda_reg, 0.0));
    if (weights.lambda_infomax != 0.0) {
        if (negative == nullptr || neg_ops == nullptr)
            throw std::invalid_argument("build_step: infomax term needs a negative graph");
        step.summary = summarize(tape, cls.summary_in);
        step.pos_scores = score(tape, step.h, leaves.m, step.summary);
        const NodeId x_neg = tape.constant(negative->features);
        const NodeId h_neg = encode(tape, x_neg, *neg_ops, leaves.enc_theta, leaves.enc_skip);
        step.neg_scores = score(tape, h_neg, leaves.m, step.summary);
        step.l2 = infomax_loss(tape, step.pos_scores, step.neg_scores, weights.literal_infomax);
        step.total = tape.add(step.total, tape.affine(step.l2, weights.lambda_infomax, 0.0));
    }
    return step;
}

Prediction predict(const ModelParams& params, const ModelConfig& cfg, const BrainGraph& graph) {
    const GraphOps ops = make_graph_ops(graph.adjacency, cfg.self_loop);
    Prediction pred;
    pred.h = encode_plain(graph.features, ops, params.encoder);
    pred.cls = classify_plain(pred.h, graph.adjacency, ops, params.classifier);
    return pred;
}

}  // namespace braingnn
