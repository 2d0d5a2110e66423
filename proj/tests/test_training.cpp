#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "braingnn/rng.hpp"
#include "braingnn/training.hpp"
#include "doctest.h"
#include "finite_diff.hpp"
#include "json.hpp"

using namespace braingnn;
using braingnn::testing::max_rel_err;
namespace fs = std::filesystem;

namespace {

Cohort tiny_cohort(std::uint64_t seed = 1, std::size_t per_class = 4) {
    GeneratorConfig cfg;
    cfg.subjects_per_class = per_class;
    cfg.rois = 8;
    cfg.timesteps = 24;
    cfg.separable_rois = {1, 4};
    cfg.effect_size = 2.5;
    cfg.seed = seed;
    return generate_synthetic(cfg);
}

ModelConfig tiny_model() {
    ModelConfig m;
    m.widths = {4, 4};
    m.clusters = 3;
    m.mlp_hidden = 4;
    return m;
}

}  // namespace

TEST_CASE("learning rate halves every twenty epochs") {
    CHECK(lr_at(0, 0.001) == 0.001);
    CHECK(lr_at(19, 0.001) == 0.001);
    CHECK(lr_at(20, 0.001) == 0.0005);
    CHECK(lr_at(39, 0.001) == 0.0005);
    CHECK(lr_at(40, 0.001) == 0.00025);
    CHECK(lr_at(99, 0.001) == doctest::Approx(6.25e-5).epsilon(1e-15));
    CHECK(lr_at(39, 0.001, 40) == 0.001);
    CHECK(lr_at(40, 0.001, 40) == 0.0005);
    CHECK_THROWS_AS(lr_at(-1, 0.001), std::invalid_argument);
    CHECK_THROWS_AS(lr_at(0, 0.001, 0), std::invalid_argument);
}

TEST_CASE("adam's first unit-gradient step moves by about the learning rate") {
    Matrix p(1, 1, 1.0);
    Adam adam({&p});
    const Matrix g(1, 1, 1.0);
    adam.step({&g}, 0.1);
    CHECK(p(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(adam.steps() == 1);
}

TEST_CASE("adam follows a scalar reference implementation") {
    Matrix p(1, 2, 0.5);
    Adam adam({&p});
    double ref[2] = {0.5, 0.5};
    double m[2] = {0, 0}, v[2] = {0, 0};
    const double grads[5][2] = {{1.0, -0.5}, {0.2, 0.8}, {-1.2, 0.1}, {0.6, 0.6}, {0.0, -2.0}};
    for (int t = 1; t <= 5; ++t) {
        Matrix g(1, 2);
        g(0, 0) = grads[t - 1][0];
        g(0, 1) = grads[t - 1][1];
        adam.step({&g}, 0.01);
        for (int j = 0; j < 2; ++j) {
            m[j] = 0.9 * m[j] + 0.1 * grads[t - 1][j];
            v[j] = 0.999 * v[j] + 0.001 * grads[t - 1][j] * grads[t - 1][j];
            const double mhat = m[j] / (1.0 - std::pow(0.9, t));
            const double vhat = v[j] / (1.0 - std::pow(0.999, t));
            ref[j] -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
        }
    }
    CHECK(p(0, 0) == doctest::Approx(ref[0]).epsilon(1e-12));
    CHECK(p(0, 1) == doctest::Approx(ref[1]).epsilon(1e-12));
}

TEST_CASE("f-score conventions") {
    CHECK(f_score({1, 1, 0, 0}, {0.9, 0.8, 0.1, 0.2}) == doctest::Approx(1.0));
    CHECK(f_score({1, 1, 0, 0}, {0.9, 0.4, 0.6, 0.1}) == doctest::Approx(0.5));
    CHECK(f_score({1, 1}, {0.1, 0.2}) == 0.0);          // nothing predicted positive
    CHECK(f_score({0, 0}, {0.9, 0.8}) == 0.0);          // no true positives possible
    CHECK(f_score({1, 0}, {0.5, 0.4}) == doctest::Approx(1.0));  // 0.5 predicts positive
    CHECK_THROWS_AS(f_score({1}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("fan-in init respects bounds and the bilinear form starts near identity") {
    const ModelConfig cfg = tiny_model();
    auto rng = make_rng(3, "init");
    const ModelParams p = init_params(cfg, rng);
    p.validate(cfg);
    const double bound0 = 1.0 / std::sqrt(10.0);
    for (std::size_t i = 0; i < p.encoder.theta[0].size(); ++i)
        CHECK(std::abs(p.encoder.theta[0].data()[i]) <= bound0);
    for (std::size_t i = 0; i < p.classifier.b1.size(); ++i)
        CHECK(p.classifier.b1.data()[i] == 0.0);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double expect = i == j ? 1.0 : 0.0;
            CHECK(std::abs(p.m(i, j) - expect) <= 0.01);
        }
    auto rng2 = make_rng(3, "init");
    const ModelParams q = init_params(cfg, rng2);
    CHECK(q.encoder.skip == p.encoder.skip);
}

TEST_CASE("pooled size is the ceiling of ratio times nodes") {
    ModelConfig cfg;
    cfg.resolve_clusters(148);
    CHECK(cfg.clusters == 74);
    cfg.resolve_clusters(5);
    CHECK(cfg.clusters == 3);
    cfg.pooling_ratio = 0.375;
    cfg.resolve_clusters(8);
    CHECK(cfg.clusters == 3);
    cfg.pooling_ratio = 1.0;
    cfg.resolve_clusters(7);
    CHECK(cfg.clusters == 7);
    cfg.pooling_ratio = 0.0;
    CHECK_THROWS_AS(cfg.resolve_clusters(7), std::invalid_argument);
    cfg.pooling_ratio = 1.5;
    CHECK_THROWS_AS(cfg.resolve_clusters(7), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip exactly") {
    const ModelConfig cfg = tiny_model();
    auto rng = make_rng(7, "init");
    const ModelParams p = init_params(cfg, rng);
    const fs::path dir = fs::temp_directory_path() / "braingnn_ckpt_test";
    fs::create_directories(dir);
    const std::string path = (dir / "ckpt.json").string();
    save_checkpoint(p, cfg, path);
    const auto [loaded, loaded_cfg] = load_checkpoint(path);
    CHECK(loaded_cfg.widths == cfg.widths);
    CHECK(loaded_cfg.clusters == cfg.clusters);
    CHECK(loaded_cfg.pooling_ratio == cfg.pooling_ratio);
    CHECK(loaded_cfg.mlp_hidden == cfg.mlp_hidden);
    const auto a = parameter_list(p);
    const auto b = parameter_list(loaded);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);

    std::ofstream(dir / "bad.json") << R"({"schema_version": 1, "kind": "cohort"})";
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "bad.json").string()),
                         doctest::Contains("checkpoint"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("bce matches the worked value at one half") {
    Tape t;
    const NodeId p = t.constant(Matrix(1, 1, 0.5));
    CHECK(t.value(bce_loss(t, p, 1))(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(t.value(bce_loss(t, p, 0))(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const NodeId sure = t.constant(Matrix(1, 1, 0.9));
    CHECK(t.value(bce_loss(t, sure, 1))(0, 0) ==
          doctest::Approx(-std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("the joint step composes its loss terms") {
    const Cohort cohort = tiny_cohort();
    const ModelConfig mcfg = tiny_model();
    auto rng = make_rng(5, "init");
    ModelParams params = init_params(mcfg, rng);
    const GraphOps ops0 = make_graph_ops(cohort.graphs[0].adjacency);
    const GraphOps ops4 = make_graph_ops(cohort.graphs[4].adjacency);
    LossWeights weights;
    weights.lambda_infomax = 0.7;
    weights.lambda_reg = 0.3;

    Tape t;
    const ModelLeaves leaves = register_leaves(t, params);
    const StepNodes step =
        build_step(t, leaves, cohort.graphs[0], ops0, &cohort.graphs[4], &ops4, weights);
    const double total = t.value(step.total)(0, 0);
    const double l1 = t.value(step.l1)(0, 0);
    const double l2 = t.value(step.l2)(0, 0);
    const double lreg = t.value(step.link_reg)(0, 0);
    CHECK(std::isfinite(total));
    CHECK(total == doctest::Approx(l1 + 0.7 * l2 + 0.3 * lreg).epsilon(1e-12));

    // Without the infomax term no negative graph is needed.
    LossWeights plain;
    plain.lambda_infomax = 0.0;
    plain.lambda_reg = 0.3;
    Tape t2;
    const ModelLeaves leaves2 = register_leaves(t2, params);
    const StepNodes s2 =
        build_step(t2, leaves2, cohort.graphs[0], ops0, nullptr, nullptr, plain);
    CHECK(s2.l2 == -1);
    CHECK(t2.value(s2.total)(0, 0) ==
          doctest::Approx(t2.value(s2.l1)(0, 0) + 0.3 * t2.value(s2.link_reg)(0, 0))
              .epsilon(1e-12));
    CHECK_THROWS_AS(
        build_step(t2, leaves2, cohort.graphs[0], ops0, nullptr, nullptr, weights),
        std::invalid_argument);
}

TEST_CASE("joint-loss gradients match finite differences across every parameter") {
    const Cohort cohort = tiny_cohort();
    const ModelConfig mcfg = tiny_model();
    auto rng = make_rng(9, "init");
    ModelParams params = init_params(mcfg, rng);
    const GraphOps ops1 = make_graph_ops(cohort.graphs[1].adjacency);
    const GraphOps ops6 = make_graph_ops(cohort.graphs[6].adjacency);
    LossWeights weights;
    weights.lambda_infomax = 1.0;
    weights.lambda_reg = 0.5;

    auto eval = [&] {
        Tape t;
        const ModelLeaves leaves = register_leaves(t, params);
        const StepNodes step =
            build_step(t, leaves, cohort.graphs[1], ops1, &cohort.graphs[6], &ops6, weights);
        return t.value(step.total)(0, 0);
    };
    Tape t;
    const ModelLeaves leaves = register_leaves(t, params);
    const StepNodes step =
        build_step(t, leaves, cohort.graphs[1], ops1, &cohort.graphs[6], &ops6, weights);
    t.backward(step.total);
    std::vector<Matrix> grads;
    for (NodeId id : leaves.all) grads.push_back(t.grad(id));
    CHECK(max_rel_err(parameter_list(params), grads, eval) < 1e-4);
}

TEST_CASE("predict composes the inference path") {
    const Cohort cohort = tiny_cohort();
    const ModelConfig mcfg = tiny_model();
    auto rng = make_rng(11, "init");
    const ModelParams params = init_params(mcfg, rng);
    const Prediction pred = predict(params, mcfg, cohort.graphs[2]);
    const GraphOps ops = make_graph_ops(cohort.graphs[2].adjacency);
    const Matrix h = encode_plain(cohort.graphs[2].features, ops, params.encoder);
    CHECK(max_abs_diff(pred.h, h) == 0.0);
    const ClassifierOutput cls =
        classify_plain(h, cohort.graphs[2].adjacency, ops, params.classifier);
    CHECK(pred.cls.prob == cls.prob);
}

TEST_CASE("fold training is deterministic and tracks the schedule") {
    const Cohort cohort = tiny_cohort(2);
    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.epochs = 21;
    cfg.lr0 = 0.01;
    cfg.seed = 13;
    const FoldSplit split = split_folds(cohort, 2, cfg.seed);
    const auto train_idx = split.train_indices(cohort, 0);
    const auto test_idx = split.test_indices(cohort, 0);

    const FoldResult a = train_fold(cohort, train_idx, test_idx, cfg, 0);
    const FoldResult b = train_fold(cohort, train_idx, test_idx, cfg, 0);
    REQUIRE(a.history.size() == 21);
    CHECK(a.history[0].lr == 0.01);
    CHECK(a.history[19].lr == 0.01);
    CHECK(a.history[20].lr == 0.005);
    for (const auto& em : a.history) {
        CHECK(std::isfinite(em.total));
        CHECK(em.test_f >= 0.0);
        CHECK(em.test_f <= 1.0);
    }
    const auto pa = parameter_list(a.params);
    const auto pb = parameter_list(b.params);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].total == b.history[i].total);
        CHECK(a.history[i].test_f == b.history[i].test_f);
    }

    TrainConfig reseeded = cfg;
    reseeded.seed = 14;
    const FoldResult c = train_fold(cohort, train_idx, test_idx, reseeded, 0);
    CHECK(c.history.back().total != a.history.back().total);
}

TEST_CASE("ablated training runs without negatives") {
    const Cohort cohort = tiny_cohort(3);
    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.epochs = 3;
    cfg.loss.lambda_infomax = 0.0;
    cfg.seed = 1;
    const FoldSplit split = split_folds(cohort, 2, cfg.seed);
    const FoldResult r = train_fold(cohort, split.train_indices(cohort, 0),
                                    split.test_indices(cohort, 0), cfg, 0);
    for (const auto& em : r.history) CHECK(em.l2 == 0.0);
}

TEST_CASE("cross validation aggregates folds deterministically") {
    const Cohort cohort = tiny_cohort(4, 4);
    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.epochs = 2;
    cfg.folds = 2;
    cfg.seed = 21;
    const CvResult cv = cross_validate(cohort, cfg);
    REQUIRE(cv.folds.size() == 2);
    CHECK(cv.mean_test_f ==
          doctest::Approx((cv.folds[0].test_f + cv.folds[1].test_f) / 2.0).epsilon(1e-15));
    const CvResult again = cross_validate(cohort, cfg);
    CHECK(again.mean_test_f == cv.mean_test_f);
    CHECK(again.folds[1].history.back().total == cv.folds[1].history.back().total);
}

TEST_CASE("metrics serialize as one json object per epoch") {
    EpochMetrics em;
    em.epoch = 3;
    em.lr = 0.0005;
    em.l1 = 0.6;
    em.l2 = 1.2;
    em.lreg = 11.0;
    em.total = 13.3;
    em.train_f = 0.75;
    em.test_f = 0.5;
    const auto j = nlohmann::json::parse(metrics_line(em));
    CHECK(j.at("epoch") == 3);
    CHECK(j.at("lr") == 0.0005);
    CHECK(j.at("test_f") == 0.5);

    const fs::path dir = fs::temp_directory_path() / "braingnn_metrics_test";
    fs::create_directories(dir);
    write_metrics({em, em, em}, (dir / "m.jsonl").string());
    std::ifstream in(dir / "m.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        CHECK(nlohmann::json::parse(line).at("epoch") == 3);
        ++lines;
    }
    CHECK(lines == 3);
    fs::remove_all(dir);
}
