#pragma once

#include "fadelab/mesh.hpp"
#include "fadelab/world.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fadelab {

// Forward-noising timeline: beta_t in (0,1) increasing, alpha_bar_t the
// running product of (1 - beta_s). Timesteps are 1-based; alpha_bar_at(0) = 1.
struct NoiseSchedule {
    std::size_t steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha_bar;

    static NoiseSchedule linear(std::size_t t_steps, double beta_min, double beta_max);

    double beta_at(std::size_t t) const;
    double alpha_at(std::size_t t) const { return 1.0 - beta_at(t); }
    double alpha_bar_at(std::size_t t) const;
    void validate() const;
};

struct DenoiserConfig {
    std::size_t data_dim = 2;
    std::size_t time_dim = 8;    // sinusoidal time embedding width
    std::size_t concept_dim = 8; // learned concept embedding width
    double embed_init_std = 0.5;
    std::vector<std::size_t> hidden{128, 128};
};

// Reserved conditioning token for the surrogate null concept; it maps to the
// last row of the embedding table.
inline constexpr int kNullConcept = -1;

// Conditional noise predictor: a feed-forward net over the concatenation of
// x_t, a sinusoidal time embedding, and a learned concept embedding row.
// Optional low-rank mesh adapters ride on the hidden weights and the table.
struct NoisePredictor {
    DenoiserConfig cfg;
    std::size_t n_concepts = 0; // embedding table has n_concepts + 1 rows
    ParamStore base;
    std::optional<MeshState> mesh;

    std::size_t input_dim() const { return cfg.data_dim + cfg.time_dim + cfg.concept_dim; }
    std::size_t embed_rows() const { return n_concepts + 1; }
    std::size_t concept_row(int concept_id) const;
};

NoisePredictor make_denoiser(const DenoiserConfig& cfg, std::size_t n_concepts, std::uint64_t seed);

Tensor2 sinusoidal_time_embedding(const std::vector<int>& ts, std::size_t time_dim);

// Inference-time snapshot with adapter deltas folded in. Cheap to query in
// tight sampling loops.
struct FrozenDenoiser {
    DenoiserConfig cfg;
    std::size_t n_concepts = 0;
    Tensor2 embed, w_xt, c_proj, b1, w2, b2, w3, b3;

    std::size_t concept_row(int concept_id) const;
    // One row of predicted noise per row of x_t.
    Tensor2 predict(const Tensor2& x_t, const std::vector<int>& concept_ids, const std::vector<int>& ts) const;
    Tensor2 predict_single_concept(const Tensor2& x_t, int concept_id, int t) const;
};

FrozenDenoiser freeze(const NoisePredictor& model);

// Closed-form forward noising: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Tensor2 forward_noise(const NoiseSchedule& schedule, const Tensor2& x0, std::size_t t, const Tensor2& eps);

// eps_theta(x_t, c, t) through the full model (mesh applied when enabled).
Tensor2 predict_noise(const NoisePredictor& model, const Tensor2& x_t, int concept_id, int t);

// Differentiation modes for the tape forward pass.
enum class TrainTarget { base_params, mesh_params };

// Builds the batched forward pass on a tape; x_t and the time embedding enter
// as constants, parameters according to `target`.
GradTape::Value denoiser_forward_on_tape(GradTape& tape, const NoisePredictor& model, const Tensor2& x_t,
                                         const std::vector<int>& concept_ids, const std::vector<int>& ts,
                                         TrainTarget target);

struct BaseTrainConfig {
    int steps = 3000;
    int batch = 64;
    double lr = 6e-3;
    double lr_final = 2e-5; // cosine-decayed to this by the last step
    double null_fraction = 0.1; // fraction of batches conditioned on the null token
    std::uint64_t seed = 3;
};

// Minimizes E ||eps - eps_theta(x_t, c, t)||^2 over world draws with t uniform
// in [1, T]. Returns the per-step loss trace.
std::vector<double> train_base(NoisePredictor& model, const ConceptWorld& world, const NoiseSchedule& schedule,
                               const BaseTrainConfig& cfg);

// Ancestral reverse chain from x_T ~ N(0, I); fresh posterior noise except at
// the final step. Deterministic for a given seed.
Tensor2 sample_model(const FrozenDenoiser& model, const NoiseSchedule& schedule, int concept_id,
                     std::size_t count, std::uint64_t seed);

} // namespace fadelab
