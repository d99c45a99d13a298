#pragma once

#include "fadelab/fade.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace fadelab {

// Evaluation draws samples through this signature so tests can substitute
// exact stubs for the diffusion sampler.
using SampleFn = std::function<Tensor2(int concept_id, std::size_t count, std::uint64_t seed)>;

SampleFn model_sampler(const FrozenDenoiser& model, const NoiseSchedule& schedule);

struct EvalConfig {
    std::size_t n_samples = 500; // per evaluation cell
    double eta = 1e-8;
    std::uint64_t seed = 7;
};

// Percentage of target-conditioned samples NOT classified as the target by
// the exact Bayes classifier. Higher means better erasure.
double erasing_accuracy(const SampleFn& sampler, const ConceptWorld& world, int c_tar,
                        std::size_t n_samples, std::uint64_t seed);

struct AdjacencyAccuracy {
    std::vector<std::pair<int, double>> per_neighbor; // (concept_id, percentage)
    double mean = 0.0;
};

// Per-neighbor generation accuracy: percentage of c-conditioned samples
// classified as c, plus the mean across neighbors.
AdjacencyAccuracy adjacency_accuracy(const SampleFn& sampler, const ConceptWorld& world,
                                     const std::vector<int>& adjacency, std::size_t n_samples,
                                     std::uint64_t seed);

// Erasing-Retention Balance: 2 * a_er * a_adj / (a_er + a_adj + eta).
double erb(double a_er, double a_adj_mean, double eta);

struct ErbReport {
    double a_er = 0.0;
    std::vector<std::pair<int, double>> per_neighbor_acc;
    double a_adj_mean = 0.0;
    double erb_score = 0.0;
    double eta = 0.0;

    double base_a_er = 0.0;
    std::vector<std::pair<int, double>> base_per_neighbor_acc;
    double base_a_adj_mean = 0.0;
    double base_erb_score = 0.0;

    std::vector<std::pair<int, double>> retain_acc;
    std::vector<std::pair<int, double>> base_retain_acc;
    double retain_mean = 0.0;
    double base_retain_mean = 0.0;

    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

// Full report for an (base, unlearned) model pair: erasure, per-neighbor and
// mean adjacency accuracy, ERB, and the retain-set accuracy table, with a
// baseline row for the base model.
ErbReport evaluate_models(const SampleFn& base_sampler, const SampleFn& unlearned_sampler,
                          const ConceptWorld& world, const AdjacencySet& adjacency,
                          const std::vector<int>& retain_concepts, const EvalConfig& cfg);

struct InflectionBucket {
    double sim_low = 0.0;
    double sim_high = 0.0;
    double mean_accuracy = 0.0; // percentage
    std::size_t concepts = 0;
    bool skipped = false;
};

struct InflectionCurve {
    std::vector<InflectionBucket> buckets; // ascending similarity
    std::string model_tag;
};

// Buckets the non-target concepts by ground-truth similarity to the target
// (cosine of the true concept means) and reports mean generation accuracy per
// bucket. Empty buckets are kept but flagged as skipped.
InflectionCurve inflection_sweep(const SampleFn& sampler, const ConceptWorld& world, int c_tar,
                                 std::size_t n_buckets, std::size_t n_samples, std::uint64_t seed,
                                 const std::string& model_tag = "");

double ground_truth_similarity(const ConceptWorld& world, int a, int b);

struct AblationRow {
    bool use_guid = true;
    bool use_er = true;
    bool use_adj = true;
    double mean_a_er = 0.0;
    double mean_a_adj = 0.0;
    double mean_erb = 0.0;
    std::vector<double> per_seed_erb;

    std::string label() const;
};

// The six toggle combinations of the ablation study, in table order.
std::vector<std::array<bool, 3>> ablation_toggle_rows(); // {guid, er, adj}

// Runs unlearn + evaluate for each toggle row over the given seeds and
// reports per-row means.
std::vector<AblationRow> ablation_run(const NoisePredictor& base_model, const ConceptWorld& world,
                                      const NoiseSchedule& schedule, const FadeConfig& cfg,
                                      const std::vector<std::uint64_t>& seeds, const EvalConfig& eval_cfg);

} // namespace fadelab
