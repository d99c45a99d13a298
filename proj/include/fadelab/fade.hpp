#pragma once

#include "fadelab/diffusion.hpp"
#include "fadelab/neighborhood.hpp"

#include <cstdint>
#include <vector>

namespace fadelab {

// Every unlearning hyperparameter. Defaults are the standard operating
// point: lambda_er 3.0, lambda_adj 1000, lambda_guid 50, delta 1.0, 500
// iterations at batch 4 with K = 5 neighbors.
struct FadeConfig {
    int c_tar = 0;
    std::vector<int> adjacency;
    double lambda_er = 3.0;
    double lambda_adj = 1000.0;
    double lambda_guid = 50.0;
    double delta = 1.0;
    int iterations = 500;
    int batch = 4;
    double lr = 1.5e-2;
    double weight_decay = 0.0;
    int rank = 4;
    std::vector<std::string> mesh_targets{"embed", "c_proj"};
    bool use_er = true;
    bool use_adj = true;
    bool use_guid = true;
    std::uint64_t seed = 5;

    void validate() const;
};

struct LossBreakdown {
    double l_er = 0.0;
    double l_guid = 0.0;
    double l_adj = 0.0;
    double l_total = 0.0;
    int iteration = 0;
};

// A batch of noised latents with their per-row timesteps.
struct NoisedBatch {
    Tensor2 z;          // B x n
    std::vector<int> t; // B
};

// Hinge loss pushing the updated target-conditioned prediction away from its
// original behavior while anchoring it near the base model's adjacent-concept
// predictions: max(0, termA - termB + delta), terms batch-averaged.
double erasing_loss(const NoisePredictor& updated, const FrozenDenoiser& base, const NoisedBatch& du,
                    int c_tar, const std::vector<int>& adjacency, double delta);

// Batch mean squared distance from the updated target-conditioned prediction
// to the base model's null-conditioned prediction.
double guidance_loss(const NoisePredictor& updated, const FrozenDenoiser& base, const NoisedBatch& du,
                     int c_tar);

// Batch mean squared drift of adjacent-concept predictions between the base
// and updated models; labels must all live in the adjacency set.
double adjacency_loss(const NoisePredictor& updated, const FrozenDenoiser& base, const NoisedBatch& da,
                      const std::vector<int>& da_labels, const std::vector<int>& adjacency);

// Weighted total. Toggled-off terms contribute exactly 0; all-off is a
// contract error.
LossBreakdown fade_total(double l_er, double l_guid, double l_adj, const FadeConfig& cfg, int iteration);

struct UnlearnResult {
    NoisePredictor model; // base weights plus trained mesh adapters
    std::vector<LossBreakdown> trace;
};

// Attaches mesh adapters, freezes a base reference copy, and optimizes the
// FADE objective over the adapter parameters with fresh (z_t, t, eps) batches
// each step. Deterministic for a given config seed.
UnlearnResult unlearn(const NoisePredictor& base_model, const ConceptWorld& world,
                      const NoiseSchedule& schedule, const FadeConfig& cfg);

} // namespace fadelab
