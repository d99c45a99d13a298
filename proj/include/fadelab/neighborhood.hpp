#pragma once

#include "fadelab/world.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace fadelab {

// Feature map used for concept similarity. `raw_identity` passes points
// through unchanged; `classifier_penultimate` is the last hidden layer of a
// small softmax classifier trained on all concepts. Deterministic once built.
struct Embedder {
    enum class Kind { raw_identity, classifier_penultimate };

    Kind kind = Kind::raw_identity;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Tensor2 w1; // in_dim x out_dim, classifier_penultimate only
    Tensor2 b1; // 1 x out_dim

    Tensor2 embed(const Tensor2& points) const;
};

struct EmbedderTrainConfig {
    int hidden = 64;
    int steps = 60;
    double lr = 0.01;
    double weight_decay = 0.05;
    std::size_t samples_per_concept = 96;
};

Embedder make_identity_embedder(std::size_t dim);
Embedder train_classifier_embedder(const ConceptWorld& world, const EmbedderTrainConfig& cfg, std::uint64_t seed);

// Arithmetic mean of the embedded samples (1 x d).
Tensor2 mean_embedding(const Embedder& embedder, const Tensor2& samples);

// Cosine similarity in [-1, 1]. Zero-norm inputs are rejected rather than
// silently mapped to 0.
double cosine_similarity(const double* u, const double* v, std::size_t n);
double cosine_similarity(const Tensor2& u, const Tensor2& v);

struct AdjacencySet {
    int target = -1;
    int k = 0;
    std::vector<std::pair<int, double>> neighbors; // (concept_id, similarity), non-increasing

    std::vector<int> ids() const;
    bool contains(int concept_id) const;
};

// Top-K most similar concepts from a per-concept mean-embedding table.
// Similarity ties break toward the lowest concept_id.
AdjacencySet build_adjacency(const std::map<int, Tensor2>& mean_embeddings, int c_tar, int k);

// Convenience path: embed m fresh samples of every concept, then select.
AdjacencySet build_adjacency(const ConceptWorld& world, const Embedder& embedder, int c_tar, int k,
                             std::size_t m_per_concept, std::uint64_t seed);

// Per-concept mean embeddings from world samples (shared by build_adjacency
// and the similarity-table export).
std::map<int, Tensor2> concept_mean_embeddings(const ConceptWorld& world, const Embedder& embedder,
                                               std::size_t m_per_concept, std::uint64_t seed);

enum class KnnMetric { cosine, euclidean };

// Majority label among the k nearest training points. Similarity ties break
// by training index order, label ties by lowest concept_id.
int knn_classify(const Tensor2& train_points, const std::vector<int>& train_labels, const double* query,
                 std::size_t k, KnnMetric metric = KnnMetric::cosine);

// Gaussian naive Bayes with diagonal covariance, fit by maximum likelihood
// plus a variance floor of var_smoothing * max_variance.
class GaussianNaiveBayes {
public:
    struct ClassStats {
        int concept_id = 0;
        double prior = 0.0;
        std::vector<double> mean;
        std::vector<double> variance;
    };

    static GaussianNaiveBayes fit(const Tensor2& points, const std::vector<int>& labels,
                                  double var_smoothing = 1e-9);
    static GaussianNaiveBayes from_stats(std::vector<ClassStats> stats);

    int classify(const double* x, std::size_t n) const;
    int classify(const std::vector<double>& x) const { return classify(x.data(), x.size()); }
    const std::vector<ClassStats>& stats() const noexcept { return stats_; }

private:
    std::vector<ClassStats> stats_;
};

struct AgreementPoint {
    std::size_t n_samples = 0;
    double mean_agreement = 0.0;
    double stderr_agreement = 0.0;
    std::vector<double> per_trial;
};

struct Theorem1Config {
    std::vector<std::size_t> n_grid{100, 1000, 10000};
    std::size_t trials = 10;
    std::size_t queries = 256;
    std::uint64_t seed = 11;
};

// Empirical check that k-NN (k = ceil(sqrt(N))) agrees with naive Bayes fit on
// the same N samples, evaluated on held-out queries, per N in the grid.
std::vector<AgreementPoint> theorem1_sweep(const ConceptWorld& world, const Theorem1Config& cfg);

} // namespace fadelab
