#include "braingnn/graph_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "braingnn/rng.hpp"
#include "json.hpp"

namespace braingnn {

using nlohmann::json;

void BrainGraph::validate() const {
    if (subject_id.empty()) throw std::runtime_error("graph has empty subject_id");
    if (label != 0 && label != 1)
        throw std::runtime_error("graph " + subject_id + ": label must be 0 or 1");
    const std::size_t n = adjacency.rows();
    if (adjacency.cols() != n)
        throw std::runtime_error("graph " + subject_id + ": adjacency not square, " +
                                 adjacency.shape_str());
    if (features.rows() != n || features.cols() != kNodeFeatureDim)
        throw std::runtime_error("graph " + subject_id + ": features must be " +
                                 std::to_string(n) + "x" + std::to_string(kNodeFeatureDim) +
                                 ", got " + features.shape_str());
    if (roi_names.size() != n)
        throw std::runtime_error("graph " + subject_id + ": roi_names size mismatch");
    features.require_finite("features of " + subject_id);
    adjacency.require_finite("adjacency of " + subject_id);
    for (std::size_t i = 0; i < n; ++i) {
        if (adjacency(i, i) != 1.0)
            throw std::runtime_error("graph " + subject_id + ": adjacency diagonal != 1 at row " +
                                     std::to_string(i));
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(adjacency(i, j) - adjacency(j, i)) > 1e-12)
                throw std::runtime_error("graph " + subject_id + ": adjacency asymmetric at (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }
}

void Cohort::validate() const {
    if (graphs.empty()) throw std::runtime_error("cohort has no graphs");
    bool saw_label[2] = {false, false};
    std::map<std::string, int> label_of;
    for (const auto& g : graphs) {
        g.validate();
        if (g.num_nodes() != parcellation_size)
            throw std::runtime_error("graph " + g.subject_id + " has " +
                                     std::to_string(g.num_nodes()) + " nodes, cohort declares " +
                                     std::to_string(parcellation_size));
        saw_label[g.label] = true;
        auto [it, inserted] = label_of.emplace(g.subject_id, g.label);
        if (!inserted && it->second != g.label)
            throw std::runtime_error("subject " + g.subject_id + " appears with both labels");
    }
    if (!saw_label[0] || !saw_label[1])
        throw std::runtime_error("cohort must contain both classes");
}

std::vector<std::pair<std::string, int>> Cohort::subjects() const {
    std::vector<std::pair<std::string, int>> out;
    std::set<std::string> seen;
    for (const auto& g : graphs)
        if (seen.insert(g.subject_id).second) out.emplace_back(g.subject_id, g.label);
    return out;
}

std::vector<std::size_t> FoldSplit::graph_indices(const Cohort& cohort, int fold,
                                                  bool test) const {
    if (fold < 0 || fold >= k) throw std::runtime_error("fold index out of range");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cohort.graphs.size(); ++i) {
        auto it = assignment.find(cohort.graphs[i].subject_id);
        if (it == assignment.end())
            throw std::runtime_error("subject " + cohort.graphs[i].subject_id +
                                     " missing from fold assignment");
        if ((it->second == fold) == test) out.push_back(i);
    }
    return out;
}

Matrix correlation_adjacency(const Matrix& timeseries) {
    const std::size_t n = timeseries.rows();
    const std::size_t t = timeseries.cols();
    if (n == 0 || t < 2)
        throw std::invalid_argument("correlation_adjacency: need at least 2 timepoints, got " +
                                    timeseries.shape_str());
    std::vector<double> mean(n, 0.0), ssd(n, 0.0);
    Matrix centered(n, t);
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (std::size_t s = 0; s < t; ++s) m += timeseries(i, s);
        m /= static_cast<double>(t);
        mean[i] = m;
        double q = 0.0;
        for (std::size_t s = 0; s < t; ++s) {
            const double d = timeseries(i, s) - m;
            centered(i, s) = d;
            q += d * d;
        }
        ssd[i] = q;
    }
    std::vector<std::size_t> degenerate;
    for (std::size_t i = 0; i < n; ++i)
        if (ssd[i] == 0.0) degenerate.push_back(i);
    if (!degenerate.empty()) {
        std::cerr << "warning: zero-variance time series for " << degenerate.size()
                  << " node(s), first at row " << degenerate.front()
                  << "; their correlations are set to 0\n";
    }
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double r = 0.0;
            if (ssd[i] > 0.0 && ssd[j] > 0.0) {
                double cov = 0.0;
                for (std::size_t s = 0; s < t; ++s) cov += centered(i, s) * centered(j, s);
                r = cov / std::sqrt(ssd[i] * ssd[j]);
                r = std::clamp(r, -1.0, 1.0);
            }
            a(i, j) = r;
            a(j, i) = r;
        }
    }
    return a;
}

Matrix build_node_features(const Matrix& timeseries, const Matrix& glm_betas,
                           const Matrix& centroids, const Matrix& adjacency, bool zscore) {
    const std::size_t n = timeseries.rows();
    if (glm_betas.rows() != n || glm_betas.cols() != 4)
        throw std::invalid_argument("build_node_features: glm_betas must be " +
                                    std::to_string(n) + "x4, got " + glm_betas.shape_str());
    if (centroids.rows() != n || centroids.cols() != 3)
        throw std::invalid_argument("build_node_features: centroids must be " +
                                    std::to_string(n) + "x3, got " + centroids.shape_str());
    if (adjacency.rows() != n || adjacency.cols() != n)
        throw std::invalid_argument("build_node_features: adjacency must be " +
                                    std::to_string(n) + "x" + std::to_string(n) + ", got " +
                                    adjacency.shape_str());
    const std::size_t t = timeseries.cols();
    Matrix f(n, kNodeFeatureDim);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += std::abs(adjacency(i, j));
        f(i, 0) = deg - std::abs(adjacency(i, i));
        for (std::size_t k = 0; k < 4; ++k) f(i, 1 + k) = glm_betas(i, k);
        double m = 0.0;
        for (std::size_t s = 0; s < t; ++s) m += timeseries(i, s);
        m /= static_cast<double>(t);
        double var = 0.0;
        for (std::size_t s = 0; s < t; ++s) {
            const double d = timeseries(i, s) - m;
            var += d * d;
        }
        var /= static_cast<double>(t);
        f(i, 5) = m;
        f(i, 6) = std::sqrt(var);
        for (std::size_t k = 0; k < 3; ++k) f(i, 7 + k) = centroids(i, k);
    }
    if (zscore) {
        for (std::size_t c = 0; c < kNodeFeatureDim; ++c) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) m += f(i, c);
            m /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = f(i, c) - m;
                var += d * d;
            }
            var /= static_cast<double>(n);
            const double sd = std::sqrt(var);
            for (std::size_t i = 0; i < n; ++i)
                f(i, c) = sd > 0.0 ? (f(i, c) - m) / sd : 0.0;
        }
    }
    f.require_finite("node features");
    return f;
}

namespace {

std::string subject_name(int label, std::size_t idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03zu", label == 1 ? "case" : "ctrl", idx);
    return buf;
}

}  // namespace

Cohort generate_synthetic(const GeneratorConfig& cfg) {
    const std::size_t n = cfg.rois;
    const std::size_t t = cfg.timesteps;
    if (cfg.subjects_per_class == 0) throw std::invalid_argument("generator: need subjects");
    if (n < 2) throw std::invalid_argument("generator: need at least 2 ROIs");
    if (t < 2) throw std::invalid_argument("generator: need at least 2 timepoints");
    std::vector<bool> planted(n, false);
    for (std::size_t r : cfg.separable_rois) {
        if (r >= n)
            throw std::invalid_argument("generator: separable ROI " + std::to_string(r) +
                                        " out of range for " + std::to_string(n) + " ROIs");
        planted[r] = true;
    }

    // Population-level structure shared by every subject: ROI centroids,
    // baseline GLM betas, and a community partition that drives the
    // correlation structure. Planted ROIs form their own community so the
    // group difference stays spatially concentrated after propagation.
    auto rng_pop = make_rng(cfg.seed, "population");
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> coord(-70.0, 70.0);
    Matrix centroids(n, 3);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < 3; ++k) centroids(i, k) = coord(rng_pop);
    Matrix beta_mu(n, 4);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < 4; ++k) beta_mu(i, k) = unit(rng_pop);

    constexpr std::size_t kCommunitySize = 6;
    std::vector<std::size_t> community(n, 0);
    const bool have_planted = !cfg.separable_rois.empty();
    std::size_t next_community = have_planted ? 1 : 0;
    std::size_t filled = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (planted[i]) {
            community[i] = 0;
            continue;
        }
        community[i] = next_community + filled / kCommunitySize;
        ++filled;
    }
    const std::size_t n_comm = next_community + (filled + kCommunitySize - 1) / kCommunitySize;
    constexpr double rho = 0.2;
    const double w_shared = std::sqrt(rho);
    const double w_own = std::sqrt(1.0 - rho);
    // Cases hyper-synchronize the planted community: intra-community
    // correlation rises with effect size while marginal variance stays 1, so
    // the group difference shows up in connectivity as well as activation.
    const double rho_case = std::min(0.9, rho + 0.35 * cfg.effect_size);
    const double wp_shared = std::sqrt(rho_case);
    const double wp_own = std::sqrt(1.0 - rho_case);

    Cohort cohort;
    cohort.parcellation_size = n;
    cohort.generator = cfg;
    cohort.planted_truth = PlantedTruth{cfg.separable_rois, cfg.effect_size};
    std::sort(cohort.planted_truth->separable_rois.begin(),
              cohort.planted_truth->separable_rois.end());
    std::vector<std::string> roi_names(n);
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "ROI_%03zu", i);
        roi_names[i] = buf;
    }

    Matrix latents(n_comm, t);
    Matrix ts(n, t);
    std::size_t subject_index = 0;
    for (int label = 0; label <= 1; ++label) {
        for (std::size_t s = 0; s < cfg.subjects_per_class; ++s, ++subject_index) {
            auto rng = make_rng(cfg.seed, "subject", subject_index);
            for (std::size_t c = 0; c < n_comm; ++c)
                for (std::size_t tt = 0; tt < t; ++tt) latents(c, tt) = unit(rng);
            for (std::size_t i = 0; i < n; ++i) {
                const bool hyper = label == 1 && planted[i];
                const double ws = hyper ? wp_shared : w_shared;
                const double wo = hyper ? wp_own : w_own;
                for (std::size_t tt = 0; tt < t; ++tt)
                    ts(i, tt) = ws * latents(community[i], tt) + wo * unit(rng);
            }
            Matrix betas(n, 4);
            for (std::size_t i = 0; i < n; ++i) {
                const double shift = (label == 1 && planted[i]) ? cfg.effect_size : 0.0;
                for (std::size_t k = 0; k < 4; ++k)
                    betas(i, k) = beta_mu(i, k) + cfg.noise_sd * unit(rng) + shift;
            }
            BrainGraph g;
            g.subject_id = subject_name(label, s);
            g.label = label;
            g.adjacency = correlation_adjacency(ts);
            g.features = build_node_features(ts, betas, centroids, g.adjacency);
            g.roi_names = roi_names;
            cohort.graphs.push_back(g);
            if (cfg.augment_replicas > 0) {
                auto rng_jit = make_rng(cfg.seed, "jitter", subject_index);
                for (std::size_t r = 0; r < cfg.augment_replicas; ++r) {
                    BrainGraph rep = g;
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t c = 0; c < kNodeFeatureDim; ++c)
                            rep.features(i, c) += cfg.jitter_sd * unit(rng_jit);
                    cohort.graphs.push_back(std::move(rep));
                }
            }
        }
    }
    cohort.validate();
    return cohort;
}

FoldSplit split_folds(const Cohort& cohort, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("split_folds: k must be at least 2");
    auto subjects = cohort.subjects();
    std::vector<std::string> per_class[2];
    for (const auto& [id, label] : subjects) per_class[label].push_back(id);
    if (per_class[0].size() < static_cast<std::size_t>(k) ||
        per_class[1].size() < static_cast<std::size_t>(k))
        throw std::invalid_argument("split_folds: each class needs at least k subjects");
    auto rng = make_rng(seed, "folds");
    FoldSplit split;
    split.k = k;
    // One global counter across both classes keeps fold sizes within 1 of
    // each other while still dealing each class round-robin.
    std::size_t counter = 0;
    for (int label = 0; label <= 1; ++label) {
        std::shuffle(per_class[label].begin(), per_class[label].end(), rng);
        for (const auto& id : per_class[label])
            split.assignment[id] = static_cast<int>(counter++ % static_cast<std::size_t>(k));
    }
    return split;
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

json generator_to_json(const GeneratorConfig& g) {
    return json{{"subjects_per_class", g.subjects_per_class},
                {"rois", g.rois},
                {"timesteps", g.timesteps},
                {"separable_rois", g.separable_rois},
                {"effect_size", g.effect_size},
                {"noise_sd", g.noise_sd},
                {"seed", g.seed},
                {"augment_replicas", g.augment_replicas},
                {"jitter_sd", g.jitter_sd}};
}

GeneratorConfig generator_from_json(const json& j) {
    GeneratorConfig g;
    g.subjects_per_class = j.at("subjects_per_class").get<std::size_t>();
    g.rois = j.at("rois").get<std::size_t>();
    g.timesteps = j.at("timesteps").get<std::size_t>();
    g.separable_rois = j.at("separable_rois").get<std::vector<std::size_t>>();
    g.effect_size = j.at("effect_size").get<double>();
    g.noise_sd = j.at("noise_sd").get<double>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.augment_replicas = j.at("augment_replicas").get<std::size_t>();
    g.jitter_sd = j.at("jitter_sd").get<double>();
    return g;
}

}  // namespace

void save_cohort(const Cohort& cohort, const std::string& path) {
    cohort.validate();
    json j;
    j["schema_version"] = 1;
    j["kind"] = "cohort";
    j["parcellation_size"] = cohort.parcellation_size;
    j["generator"] = cohort.generator ? generator_to_json(*cohort.generator) : json(nullptr);
    if (cohort.planted_truth) {
        j["planted_truth"] = json{{"separable_rois", cohort.planted_truth->separable_rois},
                                  {"effect_size", cohort.planted_truth->effect_size}};
    } else {
        j["planted_truth"] = nullptr;
    }
    json graphs = json::array();
    for (const auto& g : cohort.graphs) {
        graphs.push_back(json{{"subject_id", g.subject_id},
                              {"label", g.label},
                              {"roi_names", g.roi_names},
                              {"features", matrix_to_json(g.features)},
                              {"adjacency", matrix_to_json(g.adjacency)}});
    }
    j["graphs"] = std::move(graphs);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(1, '\t') << "\n";
    if (!out) throw std::runtime_error("failed writing " + path);
}

Cohort load_cohort(const std::string& path) {
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
        if (j.value("kind", "") != "cohort") throw std::runtime_error("kind is not \"cohort\"");
        Cohort cohort;
        cohort.parcellation_size = j.at("parcellation_size").get<std::size_t>();
        if (j.contains("generator") && !j["generator"].is_null())
            cohort.generator = generator_from_json(j["generator"]);
        if (j.contains("planted_truth") && !j["planted_truth"].is_null()) {
            PlantedTruth truth;
            truth.separable_rois =
                j["planted_truth"].at("separable_rois").get<std::vector<std::size_t>>();
            truth.effect_size = j["planted_truth"].at("effect_size").get<double>();
            cohort.planted_truth = truth;
        }
        for (const auto& gj : j.at("graphs")) {
            BrainGraph g;
            g.subject_id = gj.at("subject_id").get<std::string>();
            g.label = gj.at("label").get<int>();
            g.roi_names = gj.at("roi_names").get<std::vector<std::string>>();
            g.features = matrix_from_json(gj.at("features"), "features of " + g.subject_id);
            g.adjacency = matrix_from_json(gj.at("adjacency"), "adjacency of " + g.subject_id);
            cohort.graphs.push_back(std::move(g));
        }
        cohort.validate();
        return cohort;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed cohort file " + path + ": " + e.what());
    }
}

}  // namespace braingnn
