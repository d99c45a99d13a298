#include "fadelab/neighborhood.hpp"

#include "fadelab/adamw.hpp"
#include "fadelab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fadelab {

Tensor2 Embedder::embed(const Tensor2& points) const {
    require(points.cols() == in_dim, ErrorKind::shape,
            "embedder expects dimension " + std::to_string(in_dim) + ", got " + points.shape_str());
    if (kind == Kind::raw_identity) {
        return points;
    }
    Tensor2 h = matmul(points, w1);
    kernels::active().add_bias_rows(h.data(), b1.data(), h.rows(), h.cols());
    for (double& v : h.raw()) v = std::tanh(v);
    return h;
}

Embedder make_identity_embedder(std::size_t dim) {
    require(dim >= 2, ErrorKind::config, "embedding dimension must be at least 2");
    Embedder e;
    e.kind = Embedder::Kind::raw_identity;
    e.in_dim = dim;
    e.out_dim = dim;
    return e;
}

Embedder train_classifier_embedder(const ConceptWorld& world, const EmbedderTrainConfig& cfg, std::uint64_t seed) {
    require(cfg.hidden >= 2, ErrorKind::config, "classifier hidden width must be at least 2");
    const std::size_t n_classes = world.concepts.size();

    // Training set: samples_per_concept draws of every concept, labels are
    // indices into world.concepts (ids are contiguous for built worlds but the
    // classifier does not rely on that).
    const std::size_t rows = n_classes * cfg.samples_per_concept;
    Tensor2 xs(rows, world.dimension);
    std::vector<std::size_t> ys(rows);
    std::size_t row = 0;
    Rng data_rng = Rng(seed).fork(0x656d6264ULL);
    for (std::size_t c = 0; c < n_classes; ++c) {
        Tensor2 pts = sample_concept(world, world.concepts[c].concept_id, cfg.samples_per_concept,
                                     data_rng.fork(c).next_u64());
        for (std::size_t i = 0; i < pts.rows(); ++i, ++row) {
            std::copy(pts.row_ptr(i), pts.row_ptr(i) + pts.cols(), xs.row_ptr(row));
            ys[row] = c;
        }
    }

    Rng init_rng = Rng(seed).fork(0x696e6974ULL);
    ParamStore params;
    params.add("w1", Tensor2::randn(world.dimension, cfg.hidden, init_rng, 1.0 / std::sqrt(world.dimension)));
    params.add("b1", Tensor2(1, cfg.hidden));
    params.add("w2", Tensor2::randn(cfg.hidden, n_classes, init_rng, 1.0 / std::sqrt(cfg.hidden)));
    params.add("b2", Tensor2(1, n_classes));

    AdamW opt(AdamW::Config{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    for (int s = 0; s < cfg.steps; ++s) {
        GradTape tape;
        auto x = tape.constant(xs);
        auto h = tape.tanh(tape.add_bias_rows(tape.matmul(x, tape.param(params.at("w1"))),
                                              tape.param(params.at("b1"))));
        auto logits = tape.add_bias_rows(tape.matmul(h, tape.param(params.at("w2"))),
                                         tape.param(params.at("b2")));
        auto loss = tape.softmax_cross_entropy(logits, ys);
        opt.step(params, tape.backward(loss));
    }

    Embedder e;
    e.kind = Embedder::Kind::classifier_penultimate;
    e.in_dim = world.dimension;
    e.out_dim = static_cast<std::size_t>(cfg.hidden);
    e.w1 = params.at("w1").value;
    e.b1 = params.at("b1").value;
    return e;
}

Tensor2 mean_embedding(const Embedder& embedder, const Tensor2& samples) {
    require(samples.rows() >= 1, ErrorKind::contract, "mean_embedding needs at least one sample");
    Tensor2 emb = embedder.embed(samples);
    Tensor2 mean(1, emb.cols());
    for (std::size_t i = 0; i < emb.rows(); ++i) {
        kernels::active().axpy(1.0, emb.row_ptr(i), mean.data(), emb.cols());
    }
    kernels::active().scale(1.0 / static_cast<double>(emb.rows()), mean.data(), mean.data(), mean.cols());
    return mean;
}

double cosine_similarity(const double* u, const double* v, std::size_t n) {
    const auto& k = kernels::active();
    const double nu = k.dot(u, u, n);
    const double nv = k.dot(v, v, n);
    require(nu > 0.0, ErrorKind::degenerate_input, "cosine_similarity: first vector has zero norm");
    require(nv > 0.0, ErrorKind::degenerate_input, "cosine_similarity: second vector has zero norm");
    return std::clamp(k.dot(u, v, n) / std::sqrt(nu * nv), -1.0, 1.0);
}

double cosine_similarity(const Tensor2& u, const Tensor2& v) {
    require_same_shape(u, v, "cosine_similarity");
    return cosine_similarity(u.data(), v.data(), u.size());
}

std::vector<int> AdjacencySet::ids() const {
    std::vector<int> out;
    out.reserve(neighbors.size());
    for (const auto& [id, sim] : neighbors) out.push_back(id);
    return out;
}

bool AdjacencySet::contains(int concept_id) const {
    return std::any_of(neighbors.begin(), neighbors.end(),
                       [&](const auto& p) { return p.first == concept_id; });
}

AdjacencySet build_adjacency(const std::map<int, Tensor2>& mean_embeddings, int c_tar, int k) {
    require(k >= 1, ErrorKind::config, "adjacency size K must be at least 1");
    auto target_it = mean_embeddings.find(c_tar);
    require(target_it != mean_embeddings.end(), ErrorKind::lookup,
            "target concept " + std::to_string(c_tar) + " missing from embedding table");
    require(mean_embeddings.size() >= static_cast<std::size_t>(k) + 1, ErrorKind::config,
            "K=" + std::to_string(k) + " exceeds available concepts (" +
                std::to_string(mean_embeddings.size() - 1) + ")");

    std::vector<std::pair<int, double>> scored;
    scored.reserve(mean_embeddings.size() - 1);
    for (const auto& [id, emb] : mean_embeddings) {
        if (id == c_tar) continue;
        scored.emplace_back(id, cosine_similarity(target_it->second, emb));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    AdjacencySet adj;
    adj.target = c_tar;
    adj.k = k;
    adj.neighbors.assign(scored.begin(), scored.begin() + k);
    return adj;
}

std::map<int, Tensor2> concept_mean_embeddings(const ConceptWorld& world, const Embedder& embedder,
                                               std::size_t m_per_concept, std::uint64_t seed) {
    std::map<int, Tensor2> table;
    Rng rng = Rng(seed).fork(0x6d656d62ULL);
    for (const auto& spec : world.concepts) {
        Tensor2 samples = sample_concept(world, spec.concept_id, m_per_concept,
                                         rng.fork(static_cast<std::uint64_t>(spec.concept_id)).next_u64());
        table.emplace(spec.concept_id, mean_embedding(embedder, samples));
    }
    return table;
}

AdjacencySet build_adjacency(const ConceptWorld& world, const Embedder& embedder, int c_tar, int k,
                             std::size_t m_per_concept, std::uint64_t seed) {
    return build_adjacency(concept_mean_embeddings(world, embedder, m_per_concept, seed), c_tar, k);
}

int knn_classify(const Tensor2& train_points, const std::vector<int>& train_labels, const double* query,
                 std::size_t k, KnnMetric metric) {
    const std::size_t n = train_points.rows();
    require(n >= 1, ErrorKind::contract, "knn_classify: empty training set");
    require(train_labels.size() == n, ErrorKind::shape, "knn_classify: one label per training point required");
    require(k >= 1 && k <= n, ErrorKind::config, "knn_classify: k must be in [1, N]");

    // Score every training point; higher is closer.
    std::vector<std::pair<double, std::size_t>> scored(n);
    const std::size_t d = train_points.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double s;
        if (metric == KnnMetric::cosine) {
            s = cosine_similarity(train_points.row_ptr(i), query, d);
        } else {
            double acc = 0.0;
            const double* row = train_points.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = row[j] - query[j];
                acc += diff * diff;
            }
            s = -acc;
        }
        scored[i] = {s, i};
    }
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    std::map<int, std::size_t> votes;
    for (std::size_t i = 0; i < k; ++i) {
        ++votes[train_labels[scored[i].second]];
    }
    int best_label = 0;
    std::size_t best_count = 0;
    for (const auto& [label, count] : votes) { // map iterates ascending: ties keep lowest id
        if (count > best_count) {
            best_count = count;
            best_label = label;
        }
    }
    return best_label;
}

GaussianNaiveBayes GaussianNaiveBayes::fit(const Tensor2& points, const std::vector<int>& labels,
                                           double var_smoothing) {
    const std::size_t n = points.rows();
    require(n >= 1, ErrorKind::contract, "naive Bayes fit: empty training set");
    require(labels.size() == n, ErrorKind::shape, "naive Bayes fit: one label per point required");
    const std::size_t d = points.cols();

    std::map<int, std::size_t> counts;
    for (int y : labels) ++counts[y];
    require(counts.size() >= 2, ErrorKind::contract, "naive Bayes fit: need at least 2 classes");

    std::map<int, std::vector<double>> means;
    for (const auto& [y, cnt] : counts) means[y] = std::vector<double>(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto& m = means[labels[i]];
        for (std::size_t j = 0; j < d; ++j) m[j] += points(i, j);
    }
    for (auto& [y, m] : means) {
        for (double& v : m) v /= static_cast<double>(counts[y]);
    }

    std::map<int, std::vector<double>> vars;
    for (const auto& [y, cnt] : counts) vars[y] = std::vector<double>(d, 0.0);
    double max_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& m = means[labels[i]];
        auto& v = vars[labels[i]];
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = points(i, j) - m[j];
            v[j] += diff * diff;
        }
    }
    for (auto& [y, v] : vars) {
        for (double& x : v) {
            x /= static_cast<double>(counts[y]);
            max_var = std::max(max_var, x);
        }
    }
    const double floor = var_smoothing * std::max(max_var, 1.0);

    std::vector<ClassStats> stats;
    for (const auto& [y, cnt] : counts) {
        ClassStats cs;
        cs.concept_id = y;
        cs.prior = static_cast<double>(cnt) / static_cast<double>(n);
        cs.mean = means[y];
        cs.variance = vars[y];
        for (double& v : cs.variance) v += floor;
        stats.push_back(std::move(cs));
    }
    return from_stats(std::move(stats));
}

GaussianNaiveBayes GaussianNaiveBayes::from_stats(std::vector<ClassStats> stats) {
    require(stats.size() >= 2, ErrorKind::contract, "naive Bayes: need stats for at least 2 classes");
    for (const auto& cs : stats) {
        for (double v : cs.variance) {
            require(v > 0.0, ErrorKind::degenerate_fit,
                    "naive Bayes: zero variance fitted for class " + std::to_string(cs.concept_id));
        }
    }
    std::sort(stats.begin(), stats.end(),
              [](const ClassStats& a, const ClassStats& b) { return a.concept_id < b.concept_id; });
    GaussianNaiveBayes nb;
    nb.stats_ = std::move(stats);
    return nb;
}

int GaussianNaiveBayes::classify(const double* x, std::size_t n) const {
    double best = -std::numeric_limits<double>::infinity();
    int best_id = stats_.front().concept_id;
    for (const auto& cs : stats_) {
        if (cs.prior <= 0.0) continue;
        require(cs.mean.size() == n, ErrorKind::shape, "naive Bayes: query dimension mismatch");
        double lp = std::log(cs.prior);
        for (std::size_t j = 0; j < n; ++j) {
            const double d = x[j] - cs.mean[j];
            lp -= 0.5 * (d * d / cs.variance[j] + std::log(2.0 * 3.14159265358979323846 * cs.variance[j]));
        }
        if (lp > best) { // strict: ties keep the lowest concept_id (stats sorted)
            best = lp;
            best_id = cs.concept_id;
        }
    }
    return best_id;
}

std::vector<AgreementPoint> theorem1_sweep(const ConceptWorld& world, const Theorem1Config& cfg) {
    require(!cfg.n_grid.empty(), ErrorKind::config, "theorem1_sweep: empty N grid");
    for (std::size_t i = 1; i < cfg.n_grid.size(); ++i) {
        require(cfg.n_grid[i] > cfg.n_grid[i - 1], ErrorKind::config, "theorem1_sweep: N grid must increase");
    }
    require(cfg.n_grid.front() >= world.concepts.size(), ErrorKind::config,
            "theorem1_sweep: N must be at least the concept count");
    require(cfg.trials >= 1 && cfg.queries >= 1, ErrorKind::config, "theorem1_sweep: trials and queries >= 1");

    std::vector<AgreementPoint> out;
    for (std::size_t n : cfg.n_grid) {
        AgreementPoint pt;
        pt.n_samples = n;
        const std::size_t k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
        for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
            if (world.concepts.size() == 1) {
                // Both decision rules can only emit the single label.
                pt.per_trial.push_back(1.0);
                continue;
            }
            Rng trial_rng = Rng(cfg.seed).fork(trial * 1000 + n % 997);
            Dataset train = sample_mixture(world, n, trial_rng.next_u64());
            Dataset query = sample_mixture(world, cfg.queries, trial_rng.next_u64());
            GaussianNaiveBayes nb = GaussianNaiveBayes::fit(train.points, train.labels);
            std::size_t agree = 0;
            for (std::size_t q = 0; q < cfg.queries; ++q) {
                const int knn = knn_classify(train.points, train.labels, query.points.row_ptr(q), k);
                const int nbc = nb.classify(query.points.row_ptr(q), world.dimension);
                if (knn == nbc) ++agree;
            }
            pt.per_trial.push_back(static_cast<double>(agree) / static_cast<double>(cfg.queries));
        }
        double mean = 0.0;
        for (double a : pt.per_trial) mean += a;
        mean /= static_cast<double>(pt.per_trial.size());
        double var = 0.0;
        for (double a : pt.per_trial) var += (a - mean) * (a - mean);
        pt.mean_agreement = mean;
        pt.stderr_agreement = pt.per_trial.size() > 1
                                  ? std::sqrt(var / (static_cast<double>(pt.per_trial.size()) *
                                                     (static_cast<double>(pt.per_trial.size()) - 1.0)))
                                  : 0.0;
        out.push_back(std::move(pt));
    }
    return out;
}

} // namespace fadelab
