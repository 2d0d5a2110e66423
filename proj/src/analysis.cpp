#include "braingnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "braingnn/rng.hpp"
#include "json.hpp"

namespace braingnn {

EmbeddingSet extract_embeddings(const ModelParams& params, const ModelConfig& cfg,
                                const Cohort& cohort, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("extract_embeddings: no graphs selected");
    const std::size_t n = cohort.parcellation_size;
    const std::size_t w = cfg.embed_dim();
    EmbeddingSet set;
    set.per_roi.assign(n, Matrix(indices.size(), w));
    set.roi_names = cohort.graphs[indices.front()].roi_names;
    for (std::size_t s = 0; s < indices.size(); ++s) {
        const BrainGraph& g = cohort.graphs[indices[s]];
        const Matrix h = predict(params, cfg, g).h;
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < w; ++j) set.per_roi[k](s, j) = h(k, j);
        set.labels.push_back(g.label);
        set.subject_ids.push_back(g.subject_id);
    }
    return set;
}

namespace {

Matrix pairwise_sqdist(const Matrix& x) {
    const std::size_t s = x.rows();
    Matrix d(s, s);
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = i + 1; j < s; ++j) {
            double q = 0.0;
            for (std::size_t c = 0; c < x.cols(); ++c) {
                const double diff = x(i, c) - x(j, c);
                q += diff * diff;
            }
            d(i, j) = q;
            d(j, i) = q;
        }
    }
    return d;
}

/// Conditional distribution row for point i at a given precision, and its
/// Shannon entropy (nats).
double row_entropy(const Matrix& d2, std::size_t i, double beta, std::vector<double>& p) {
    const std::size_t s = d2.rows();
    double sum = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
        p[j] = j == i ? 0.0 : std::exp(-beta * d2(i, j));
        sum += p[j];
    }
    if (sum <= 0.0) {
        // All neighbors collapsed numerically; fall back to uniform.
        for (std::size_t j = 0; j < s; ++j) p[j] = j == i ? 0.0 : 1.0 / static_cast<double>(s - 1);
        return std::log(static_cast<double>(s - 1));
    }
    double h = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
        p[j] /= sum;
        if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
    }
    return h;
}

}  // namespace

TsneResult tsne(const Matrix& x, const TsneConfig& cfg) {
    const std::size_t s = x.rows();
    if (s < 4) throw std::invalid_argument("tsne: need at least 4 points, got " +
                                           std::to_string(s));
    if (cfg.perplexity < 1.0) throw std::invalid_argument("tsne: perplexity must be >= 1");
    if (3.0 * cfg.perplexity >= static_cast<double>(s - 1))
        throw std::invalid_argument("tsne: perplexity " + std::to_string(cfg.perplexity) +
                                    " too large for " + std::to_string(s) +
                                    " points (need 3*perplexity < S-1)");

    const Matrix d2 = pairwise_sqdist(x);
    const double target = std::log(cfg.perplexity);
    Matrix p(s, s);
    std::vector<double> row(s);
    for (std::size_t i = 0; i < s; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 64; ++it) {
            const double h = row_entropy(d2, i, beta, row);
            const double diff = h - target;
            if (std::abs(diff) < 1e-7) break;
            if (diff > 0.0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        row_entropy(d2, i, beta, row);
        for (std::size_t j = 0; j < s; ++j) p(i, j) = row[j];
    }
    // Symmetrize and floor.
    const double n2 = 2.0 * static_cast<double>(s);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = i + 1; j < s; ++j) {
            const double v = std::max((p(i, j) + p(j, i)) / n2, 1e-12);
            p(i, j) = v;
            p(j, i) = v;
        }
    for (std::size_t i = 0; i < s; ++i) p(i, i) = 0.0;

    auto rng = make_rng(cfg.seed, "tsne");
    std::normal_distribution<double> init(0.0, 1e-4);
    Matrix y(s, 2), inc(s, 2);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t c = 0; c < 2; ++c) y(i, c) = init(rng);

    Matrix w(s, s), grad(s, 2), gains(s, 2, 1.0);
    for (int iter = 0; iter < cfg.iters; ++iter) {
        const double exag = iter < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
        const double momentum =
            iter < cfg.momentum_switch ? cfg.momentum_early : cfg.momentum_late;
        double z = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            w(i, i) = 0.0;
            for (std::size_t j = i + 1; j < s; ++j) {
                const double dy0 = y(i, 0) - y(j, 0);
                const double dy1 = y(i, 1) - y(j, 1);
                const double v = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
                w(i, j) = v;
                w(j, i) = v;
                z += 2.0 * v;
            }
        }
        for (std::size_t i = 0; i < s; ++i) {
            grad(i, 0) = 0.0;
            grad(i, 1) = 0.0;
            for (std::size_t j = 0; j < s; ++j) {
                if (j == i) continue;
                const double q = std::max(w(i, j) / z, 1e-12);
                const double coef = 4.0 * (exag * p(i, j) - q) * w(i, j);
                grad(i, 0) += coef * (y(i, 0) - y(j, 0));
                grad(i, 1) += coef * (y(i, 1) - y(j, 1));
            }
        }
        double mean0 = 0.0, mean1 = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t c = 0; c < 2; ++c) {
                // Per-coordinate gains from the reference optimizer: grow when
                // the gradient keeps the velocity's direction, shrink otherwise.
                gains(i, c) = (grad(i, c) > 0.0) != (inc(i, c) > 0.0)
                                  ? gains(i, c) + 0.2
                                  : std::max(gains(i, c) * 0.8, 0.01);
                inc(i, c) = momentum * inc(i, c) - cfg.step * gains(i, c) * grad(i, c);
                y(i, c) += inc(i, c);
            }
            mean0 += y(i, 0);
            mean1 += y(i, 1);
        }
        mean0 /= static_cast<double>(s);
        mean1 /= static_cast<double>(s);
        for (std::size_t i = 0; i < s; ++i) {
            y(i, 0) -= mean0;
            y(i, 1) -= mean1;
        }
    }
    y.require_finite("tsne embedding");

    double z = 0.0;
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            if (j == i) continue;
            const double dy0 = y(i, 0) - y(j, 0);
            const double dy1 = y(i, 1) - y(j, 1);
            z += 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
        }
    double kl = 0.0;
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) {
            if (j == i) continue;
            const double dy0 = y(i, 0) - y(j, 0);
            const double dy1 = y(i, 1) - y(j, 1);
            const double q = std::max((1.0 / (1.0 + dy0 * dy0 + dy1 * dy1)) / z, 1e-12);
            kl += p(i, j) * std::log(p(i, j) / q);
        }
    return TsneResult{std::move(y), kl};
}

double silhouette(const Matrix& coords, const std::vector<int>& labels) {
    const std::size_t s = coords.rows();
    if (labels.size() != s)
        throw std::invalid_argument("silhouette: label count does not match points");
    std::vector<int> classes(labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2)
        throw std::invalid_argument("silhouette: need at least two classes");
    auto dist = [&](std::size_t i, std::size_t j) {
        double q = 0.0;
        for (std::size_t c = 0; c < coords.cols(); ++c) {
            const double d = coords(i, c) - coords(j, c);
            q += d * d;
        }
        return std::sqrt(q);
    };
    double total = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
        double a = 0.0;
        std::size_t same = 0;
        std::vector<double> other_sum(classes.size(), 0.0);
        std::vector<std::size_t> other_count(classes.size(), 0);
        for (std::size_t j = 0; j < s; ++j) {
            if (j == i) continue;
            const double d = dist(i, j);
            if (labels[j] == labels[i]) {
                a += d;
                ++same;
            } else {
                const std::size_t c = static_cast<std::size_t>(
                    std::lower_bound(classes.begin(), classes.end(), labels[j]) -
                    classes.begin());
                other_sum[c] += d;
                ++other_count[c];
            }
        }
        if (same == 0) continue;  // singleton cluster scores 0
        a /= static_cast<double>(same);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes.size(); ++c)
            if (other_count[c] > 0)
                b = std::min(b, other_sum[c] / static_cast<double>(other_count[c]));
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(s);
}

RegionReport mark_regions(const ModelParams& params, const ModelConfig& cfg,
                          const Cohort& cohort, const std::vector<std::size_t>& indices,
                          double threshold, const TsneConfig& tsne_cfg) {
    const EmbeddingSet set = extract_embeddings(params, cfg, cohort, indices);
    RegionReport report;
    report.threshold = threshold;
    report.labels = set.labels;
    for (std::size_t k = 0; k < set.per_roi.size(); ++k) {
        TsneConfig roi_cfg = tsne_cfg;
        roi_cfg.seed = derive_seed(tsne_cfg.seed, "tsne-roi", k);
        const TsneResult embedded = tsne(set.per_roi[k], roi_cfg);
        RegionScore score;
        score.roi = k;
        score.name = set.roi_names[k];
        score.silhouette = silhouette(embedded.coords, set.labels);
        score.kl = embedded.kl;
        score.marked = score.silhouette > threshold;
        if (score.marked) report.marked.push_back(k);
        report.scores.push_back(score);
        report.coords.push_back(embedded.coords);
    }
    return report;
}

namespace {

std::string svg_scatter(const Matrix& coords, const std::vector<int>& labels,
                        const std::string& title, double score) {
    double lo0 = coords(0, 0), hi0 = coords(0, 0), lo1 = coords(0, 1), hi1 = coords(0, 1);
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        lo0 = std::min(lo0, coords(i, 0));
        hi0 = std::max(hi0, coords(i, 0));
        lo1 = std::min(lo1, coords(i, 1));
        hi1 = std::max(hi1, coords(i, 1));
    }
    const double span0 = hi0 > lo0 ? hi0 - lo0 : 1.0;
    const double span1 = hi1 > lo1 ? hi1 - lo1 : 1.0;
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"420\" "
           "viewBox=\"0 0 400 420\">\n";
    svg += "<rect width=\"400\" height=\"420\" fill=\"white\"/>\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"10\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">%s "
                  "silhouette=%.4f</text>\n",
                  title.c_str(), score);
    svg += buf;
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        const double px = 20.0 + 360.0 * (coords(i, 0) - lo0) / span0;
        const double py = 40.0 + 360.0 * (hi1 - coords(i, 1)) / span1;
        std::snprintf(buf, sizeof(buf),
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" fill=\"%s\" "
                      "fill-opacity=\"0.8\"/>\n",
                      px, py, labels[i] == 1 ? "#d95f02" : "#1b9e77");
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace

void emit_report(const RegionReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream tsv(fs::path(dir) / "regions.tsv", std::ios::binary);
        if (!tsv) throw std::runtime_error("cannot open regions.tsv in " + dir);
        tsv << "roi\tname\tsilhouette\tmarked\n";
        char buf[128];
        for (const auto& s : report.scores) {
            std::snprintf(buf, sizeof(buf), "%zu\t%s\t%.6f\t%d\n", s.roi, s.name.c_str(),
                          s.silhouette, s.marked ? 1 : 0);
            tsv << buf;
        }
        if (!tsv) throw std::runtime_error("failed writing regions.tsv in " + dir);
    }
    {
        nlohmann::json j;
        j["schema_version"] = 1;
        j["kind"] = "region_report";
        j["threshold"] = report.threshold;
        j["n_rois"] = report.scores.size();
        j["marked"] = report.marked;
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& s : report.scores)
            scores.push_back(nlohmann::json{{"roi", s.roi},
                                            {"name", s.name},
                                            {"silhouette", s.silhouette},
                                            {"kl", s.kl},
                                            {"marked", s.marked}});
        j["scores"] = std::move(scores);
        std::ofstream out(fs::path(dir) / "summary.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot open summary.json in " + dir);
        out << j.dump(1, '\t') << "\n";
        if (!out) throw std::runtime_error("failed writing summary.json in " + dir);
    }
    for (std::size_t k : report.marked) {
        char name[32];
        std::snprintf(name, sizeof(name), "roi_%03zu.svg", k);
        std::ofstream svg(fs::path(dir) / name, std::ios::binary);
        if (!svg) throw std::runtime_error(std::string("cannot open ") + name + " in " + dir);
        svg << svg_scatter(report.coords[k], report.labels, report.scores[k].name,
                           report.scores[k].silhouette);
        if (!svg) throw std::runtime_error(std::string("failed writing ") + name + " in " + dir);
    }
}

}  // namespace braingnn
