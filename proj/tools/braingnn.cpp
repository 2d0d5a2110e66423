#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "braingnn/analysis.hpp"
#include "braingnn/graph_data.hpp"
#include "braingnn/model.hpp"
#include "braingnn/training.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Bad input that should exit with the usage code rather than the failure
/// code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Lets a JSON config file supply any option the command line left at its
/// default; explicit flags win.
class ConfigBinder {
public:
    template <typename T>
    void bind(CLI::Option* opt, const std::string& key, T& target) {
        known_.insert(key);
        appliers_.push_back([opt, key, &target](const json& j) {
            if (opt->count() == 0 && j.contains(key)) {
                try {
                    target = j.at(key).get<T>();
                } catch (const json::exception& e) {
                    throw UsageError("config key \"" + key + "\": " + e.what());
                }
            }
        });
    }

    void apply(const std::string& path) const {
        if (path.empty()) return;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw UsageError("cannot open config file " + path);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw UsageError("failed to parse config file " + path + ": " + e.what());
        }
        if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
        for (const auto& [key, _] : j.items())
            if (!known_.count(key))
                throw UsageError("unknown config key \"" + key + "\" in " + path);
        for (const auto& f : appliers_) f(j);
    }

private:
    std::set<std::string> known_;
    std::vector<std::function<void(const json&)>> appliers_;
};

braingnn::SelfLoop parse_self_loop(const std::string& s) {
    if (s == "add") return braingnn::SelfLoop::add;
    if (s == "keep") return braingnn::SelfLoop::keep;
    throw UsageError("--self-loop must be \"add\" or \"keep\", got \"" + s + "\"");
}

struct GenerateArgs {
    std::string out, config;
    braingnn::GeneratorConfig g;
};

struct TrainArgs {
    std::string cohort, out_dir, config, self_loop = "add";
    std::vector<std::size_t> widths = {8, 8};
    std::size_t mlp_hidden = 16;
    int folds = 5, epochs = 100;
    double pooling_ratio = 0.5;
    double lr = 0.001, lambda_infomax = 1.0, lambda_reg = 0.1;
    int lr_halve_every = 20;
    bool literal_infomax = false;
    std::uint64_t seed = 0;
};

struct EvalArgs {
    std::string cohort, checkpoint, probs_out, config;
};

struct AnalyzeArgs {
    std::string cohort, checkpoint, out_dir, config;
    double threshold = 0.1, perplexity = 5.0;
    std::uint64_t seed = 0;
};

int run_generate(const GenerateArgs& a) {
    const braingnn::Cohort cohort = braingnn::generate_synthetic(a.g);
    braingnn::save_cohort(cohort, a.out);
    std::cout << "wrote " << a.out << ": " << cohort.graphs.size() << " graphs, "
              << cohort.subjects().size() << " subjects, " << cohort.parcellation_size
              << " rois\n";
    return 0;
}

int run_train(const TrainArgs& a) {
    const braingnn::Cohort cohort = braingnn::load_cohort(a.cohort);
    braingnn::TrainConfig tc;
    tc.model.in_dim = cohort.graphs.front().features.cols();
    tc.model.widths = a.widths;
    tc.model.pooling_ratio = a.pooling_ratio;
    tc.model.resolve_clusters(cohort.parcellation_size);
    tc.model.mlp_hidden = a.mlp_hidden;
    tc.model.self_loop = parse_self_loop(a.self_loop);
    tc.loss.lambda_infomax = a.lambda_infomax;
    tc.loss.lambda_reg = a.lambda_reg;
    tc.loss.literal_infomax = a.literal_infomax;
    tc.epochs = a.epochs;
    tc.lr0 = a.lr;
    tc.lr_halve_every = a.lr_halve_every;
    tc.folds = a.folds;
    tc.seed = a.seed;
    const braingnn::CvResult cv = braingnn::cross_validate(cohort, tc);
    fs::create_directories(a.out_dir);
    json folds = json::array();
    char buf[160];
    for (int f = 0; f < tc.folds; ++f) {
        std::snprintf(buf, sizeof(buf), "checkpoint_fold%d.json", f);
        braingnn::save_checkpoint(cv.folds[f].params, tc.model, (fs::path(a.out_dir) / buf).string());
        std::snprintf(buf, sizeof(buf), "metrics_fold%d.jsonl", f);
        braingnn::write_metrics(cv.folds[f].history, (fs::path(a.out_dir) / buf).string());
        folds.push_back(json{{"fold", f},
                             {"train_f", cv.folds[f].train_f},
                             {"test_f", cv.folds[f].test_f}});
        std::snprintf(buf, sizeof(buf), "fold %d: train_f=%.4f test_f=%.4f\n", f,
                      cv.folds[f].train_f, cv.folds[f].test_f);
        std::cout << buf;
    }
    json summary{{"schema_version", 1},
                 {"kind", "cv_summary"},
                 {"folds", std::move(folds)},
                 {"mean_train_f", cv.mean_train_f},
                 {"mean_test_f", cv.mean_test_f}};
    std::ofstream out(fs::path(a.out_dir) / "cv_summary.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open cv_summary.json in " + a.out_dir);
    out << summary.dump(1, '\t') << "\n";
    if (!out) throw std::runtime_error("failed writing cv_summary.json in " + a.out_dir);
    std::snprintf(buf, sizeof(buf), "mean: train_f=%.4f test_f=%.4f\n", cv.mean_train_f,
                  cv.mean_test_f);
    std::cout << buf;
    return 0;
}

int run_eval(const EvalArgs& a) {
    const auto [params, mcfg] = braingnn::load_checkpoint(a.checkpoint);
    const braingnn::Cohort cohort = braingnn::load_cohort(a.cohort);
    std::vector<int> labels;
    std::vector<double> probs;
    for (const auto& g : cohort.graphs) {
        labels.push_back(g.label);
        probs.push_back(braingnn::predict(params, mcfg, g).cls.prob);
    }
    if (!a.probs_out.empty()) {
        std::ofstream out(a.probs_out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + a.probs_out + " for writing");
        out << "subject_id\tlabel\tprob\n";
        char buf[160];
        for (std::size_t i = 0; i < cohort.graphs.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%s\t%d\t%.6f\n",
                          cohort.graphs[i].subject_id.c_str(), labels[i], probs[i]);
            out << buf;
        }
        if (!out) throw std::runtime_error("failed writing " + a.probs_out);
    }
    const json result{{"f_score", braingnn::f_score(labels, probs)},
                      {"n_graphs", cohort.graphs.size()}};
    std::cout << result.dump() << "\n";
    return 0;
}

int run_analyze(const AnalyzeArgs& a) {
    const auto [params, mcfg] = braingnn::load_checkpoint(a.checkpoint);
    const braingnn::Cohort cohort = braingnn::load_cohort(a.cohort);
    std::vector<std::size_t> indices(cohort.graphs.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    braingnn::TsneConfig tc;
    tc.perplexity = a.perplexity;
    tc.seed = a.seed;
    const braingnn::RegionReport report =
        braingnn::mark_regions(params, mcfg, cohort, indices, a.threshold, tc);
    braingnn::emit_report(report, a.out_dir);
    std::cout << "marked " << report.marked.size() << " of " << report.scores.size()
              << " regions; report in " << a.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph classification toolkit for functional brain networks"};
    app.require_subcommand(1);

    GenerateArgs gen;
    ConfigBinder gen_cfg;
    CLI::App* gen_cmd = app.add_subcommand("generate", "emit a synthetic cohort");
    gen_cmd->add_option("--out", gen.out, "output cohort JSON path")->required();
    gen_cfg.bind(gen_cmd->add_option("--subjects-per-class", gen.g.subjects_per_class,
                                     "subjects in each class"),
                 "subjects_per_class", gen.g.subjects_per_class);
    gen_cfg.bind(gen_cmd->add_option("--rois", gen.g.rois, "parcellation size"), "rois",
                 gen.g.rois);
    gen_cfg.bind(gen_cmd->add_option("--timesteps", gen.g.timesteps, "time series length"),
                 "timesteps", gen.g.timesteps);
    gen_cfg.bind(gen_cmd->add_option("--separable", gen.g.separable_rois,
                                     "comma-separated ROI indices carrying the effect")
                     ->delimiter(','),
                 "separable_rois", gen.g.separable_rois);
    gen_cfg.bind(gen_cmd->add_option("--effect", gen.g.effect_size, "planted effect size"),
                 "effect_size", gen.g.effect_size);
    gen_cfg.bind(gen_cmd->add_option("--noise-sd", gen.g.noise_sd, "per-subject beta noise"),
                 "noise_sd", gen.g.noise_sd);
    gen_cfg.bind(gen_cmd->add_option("--seed", gen.g.seed, "generator seed"), "seed", gen.g.seed);
    gen_cfg.bind(gen_cmd->add_option("--augment-replicas", gen.g.augment_replicas,
                                     "jittered copies per subject"),
                 "augment_replicas", gen.g.augment_replicas);
    gen_cfg.bind(gen_cmd->add_option("--jitter-sd", gen.g.jitter_sd, "augmentation jitter"),
                 "jitter_sd", gen.g.jitter_sd);
    gen_cmd->add_option("--config", gen.config, "JSON config; explicit flags override");

    TrainArgs tr;
    ConfigBinder tr_cfg;
    CLI::App* tr_cmd = app.add_subcommand("train", "cross-validated training");
    tr_cmd->add_option("--cohort", tr.cohort, "cohort JSON path")->required();
    tr_cmd->add_option("--out-dir", tr.out_dir, "directory for checkpoints and metrics")
        ->required();
    tr_cfg.bind(tr_cmd->add_option("--folds", tr.folds, "cross-validation folds"), "folds",
                tr.folds);
    tr_cfg.bind(tr_cmd->add_option("--epochs", tr.epochs, "training epochs"), "epochs",
                tr.epochs);
    tr_cfg.bind(tr_cmd->add_option("--widths", tr.widths, "encoder layer widths")
                    ->delimiter(','),
                "widths", tr.widths);
    tr_cfg.bind(tr_cmd->add_option("--pooling-ratio", tr.pooling_ratio,
                                   "pooled size as a fraction of the parcellation"),
                "pooling_ratio", tr.pooling_ratio);
    tr_cfg.bind(tr_cmd->add_option("--mlp-hidden", tr.mlp_hidden, "classifier hidden width"),
                "mlp_hidden", tr.mlp_hidden);
    tr_cfg.bind(tr_cmd->add_option("--lr", tr.lr, "initial learning rate"), "lr", tr.lr);
    tr_cfg.bind(tr_cmd->add_option("--lr-halve-every", tr.lr_halve_every,
                                   "epochs between learning-rate halvings"),
                "lr_halve_every", tr.lr_halve_every);
    tr_cfg.bind(tr_cmd->add_option("--lambda-infomax", tr.lambda_infomax,
                                   "mutual-information loss weight"),
                "lambda_infomax", tr.lambda_infomax);
    tr_cfg.bind(tr_cmd->add_option("--lambda-reg", tr.lambda_reg, "link reconstruction weight"),
                "lambda_reg", tr.lambda_reg);
    tr_cfg.bind(tr_cmd->add_flag("--literal-infomax", tr.literal_infomax,
                                 "use the printed sign variant of the infomax loss"),
                "literal_infomax", tr.literal_infomax);
    tr_cfg.bind(tr_cmd->add_option("--self-loop", tr.self_loop, "add|keep"), "self_loop",
                tr.self_loop);
    tr_cfg.bind(tr_cmd->add_option("--seed", tr.seed, "training seed"), "seed", tr.seed);
    tr_cmd->add_option("--config", tr.config, "JSON config; explicit flags override");

    EvalArgs ev;
    CLI::App* ev_cmd = app.add_subcommand("eval", "score a cohort with a checkpoint");
    ev_cmd->add_option("--cohort", ev.cohort, "cohort JSON path")->required();
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint JSON path")->required();
    ev_cmd->add_option("--probs", ev.probs_out, "optional per-graph probability TSV");

    AnalyzeArgs an;
    ConfigBinder an_cfg;
    CLI::App* an_cmd = app.add_subcommand("analyze", "per-region separability report");
    an_cmd->add_option("--cohort", an.cohort, "cohort JSON path")->required();
    an_cmd->add_option("--checkpoint", an.checkpoint, "checkpoint JSON path")->required();
    an_cmd->add_option("--out-dir", an.out_dir, "report directory")->required();
    an_cfg.bind(an_cmd->add_option("--threshold", an.threshold, "silhouette mark threshold"),
                "threshold", an.threshold);
    an_cfg.bind(an_cmd->add_option("--perplexity", an.perplexity, "t-SNE perplexity"),
                "perplexity", an.perplexity);
    an_cfg.bind(an_cmd->add_option("--seed", an.seed, "t-SNE seed"), "seed", an.seed);
    an_cmd->add_option("--config", an.config, "JSON config; explicit flags override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen_cmd->parsed()) {
            gen_cfg.apply(gen.config);
            return run_generate(gen);
        }
        if (tr_cmd->parsed()) {
            tr_cfg.apply(tr.config);
            return run_train(tr);
        }
        if (ev_cmd->parsed()) return run_eval(ev);
        if (an_cmd->parsed()) {
            an_cfg.apply(an.config);
            return run_analyze(an);
        }
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
