#pragma once

#include "fadelab/rng.hpp"
#include "fadelab/tensor.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace fadelab {

// One generative concept: a diagonal Gaussian with a known family assignment.
struct ConceptSpec {
    int concept_id = 0;
    int family_id = 0;
    std::vector<double> mean;
    std::vector<double> covariance; // diagonal entries, all > 0
    double prior = 0.0;
};

struct WorldConfig {
    int families = 4;             // F
    int concepts_per_family = 6;  // G
    std::size_t dimension = 2;    // n
    std::uint64_t seed = 1;
    double radius = 1.6;              // concept means live on this sphere
    double concept_spacing_deg = 6.0; // angular gap between siblings
    double sigma = 0.035;             // per-dimension standard deviation
    int adjacency_k = 5;              // validated against G at build time
};

// Synthetic ground-truth universe: G tight angular clusters inside each of F
// well-separated family sectors on a sphere. Immutable after construction.
struct ConceptWorld {
    std::size_t dimension = 0;
    std::vector<ConceptSpec> concepts;
    WorldConfig config;

    int concept_count() const noexcept { return static_cast<int>(concepts.size()); }
    const ConceptSpec& concept_by_id(int concept_id) const;
    bool has_concept(int concept_id) const noexcept;
};

struct Dataset {
    Tensor2 points;          // m x n
    std::vector<int> labels; // m
};

// Disjoint unlearning / adjacency / retain splits.
struct DatasetSplit {
    Dataset unlearn;
    Dataset adjacency;
    Dataset retain;
    std::vector<int> retain_concepts;
};

ConceptWorld build_world(const WorldConfig& cfg);

// Rebuilds a world from explicit concept specs (deserialization path). Runs
// the same construction checks as build_world.
ConceptWorld world_from_specs(std::size_t dimension, std::vector<ConceptSpec> concepts, WorldConfig cfg);

// m i.i.d. draws from one concept's Gaussian.
Tensor2 sample_concept(const ConceptWorld& world, int concept_id, std::size_t m, std::uint64_t seed);

// m draws from the full mixture (concept picked by prior).
Dataset sample_mixture(const ConceptWorld& world, std::size_t m, std::uint64_t seed);

struct BayesResult {
    int concept_id = 0;
    std::vector<double> posterior;
};

// Exact Bayes-optimal classification under the world's densities. Ties break
// toward the lowest concept_id.
BayesResult bayes_classify(const ConceptWorld& world, const double* x, std::size_t n);
inline BayesResult bayes_classify(const ConceptWorld& world, const std::vector<double>& x) {
    return bayes_classify(world, x.data(), x.size());
}

// Argmax-only batch path used by the evaluation loops.
std::vector<int> bayes_argmax_rows(const ConceptWorld& world, const Tensor2& points);

DatasetSplit make_splits(const ConceptWorld& world, int c_tar, const std::vector<int>& adjacency,
                         std::size_t m_per_concept, std::uint64_t seed);

// Exhaustive pairwise check: max intra-family mean distance vs min
// cross-family mean distance. Returns {max_intra, min_inter}.
std::pair<double, double> family_separation(const ConceptWorld& world);

} // namespace fadelab
