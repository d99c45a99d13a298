#include "fadelab/fade.hpp"

#include "fadelab/adamw.hpp"

#include <algorithm>
#include <cmath>

namespace fadelab {

void FadeConfig::validate() const {
    require(delta >= 0.0, ErrorKind::config, "fade: delta must be non-negative");
    require(lambda_er >= 0.0 && lambda_adj >= 0.0 && lambda_guid >= 0.0, ErrorKind::config,
            "fade: loss weights must be non-negative");
    require(use_er || use_adj || use_guid, ErrorKind::contract, "fade: at least one loss toggle must be enabled");
    require(iterations >= 0, ErrorKind::config, "fade: iterations must be non-negative");
    require(batch >= 1, ErrorKind::config, "fade: batch must be at least 1");
    require(lr > 0.0, ErrorKind::config, "fade: learning rate must be positive");
    require(rank >= 1, ErrorKind::config, "fade: mesh rank must be at least 1");
    require(!mesh_targets.empty(), ErrorKind::config, "fade: mesh needs at least one target matrix");
    require(!adjacency.empty(), ErrorKind::contract, "fade: adjacency set is empty");
    for (int c : adjacency) {
        require(c != c_tar, ErrorKind::contract, "fade: target concept listed in its own adjacency set");
    }
}

namespace {

void check_batch(const NoisedBatch& batch) {
    require(batch.z.rows() >= 1, ErrorKind::contract, "loss batch is empty");
    require(batch.t.size() == batch.z.rows(), ErrorKind::shape, "one timestep per latent required");
}

// max(0, termA - termB + delta) with
//   termA = mean over adjacency and batch of ||eps_u(z, c_tar) - eps_base(z, c)||^2
//   termB = mean over batch of ||eps_u(z, c_tar) - eps_base(z, c_tar)||^2
GradTape::Value erasing_loss_on_tape(GradTape& tape, const NoisePredictor& updated, const FrozenDenoiser& base,
                                     const NoisedBatch& du, GradTape::Value pred_tar, int c_tar,
                                     const std::vector<int>& adjacency, double delta) {
    require(!adjacency.empty(), ErrorKind::contract, "erasing loss needs a nonempty adjacency set");
    check_batch(du);
    (void)updated;
    const double inv_b = 1.0 / static_cast<double>(du.z.rows());

    GradTape::Value term_a{};
    bool first = true;
    for (int c : adjacency) {
        Tensor2 base_adj = base.predict(du.z, std::vector<int>(du.z.rows(), c), du.t);
        auto piece = tape.sumsq(tape.sub(pred_tar, tape.constant(std::move(base_adj))));
        term_a = first ? piece : tape.add(term_a, piece);
        first = false;
    }
    term_a = tape.scale(term_a, inv_b / static_cast<double>(adjacency.size()));

    Tensor2 base_tar = base.predict(du.z, std::vector<int>(du.z.rows(), c_tar), du.t);
    auto term_b = tape.scale(tape.sumsq(tape.sub(pred_tar, tape.constant(std::move(base_tar)))), inv_b);

    return tape.relu(tape.add_scalar(tape.sub(term_a, term_b), delta));
}

GradTape::Value guidance_loss_on_tape(GradTape& tape, const FrozenDenoiser& base, const NoisedBatch& du,
                                      GradTape::Value pred_tar) {
    check_batch(du);
    Tensor2 base_null = base.predict(du.z, std::vector<int>(du.z.rows(), kNullConcept), du.t);
    const double inv_b = 1.0 / static_cast<double>(du.z.rows());
    return tape.scale(tape.sumsq(tape.sub(pred_tar, tape.constant(std::move(base_null)))), inv_b);
}

GradTape::Value adjacency_loss_on_tape(GradTape& tape, const NoisePredictor& updated, const FrozenDenoiser& base,
                                       const NoisedBatch& da, const std::vector<int>& da_labels,
                                       const std::vector<int>& adjacency) {
    check_batch(da);
    require(da_labels.size() == da.z.rows(), ErrorKind::shape, "one label per adjacency latent required");
    for (int label : da_labels) {
        require(std::find(adjacency.begin(), adjacency.end(), label) != adjacency.end(), ErrorKind::contract,
                "adjacency loss label " + std::to_string(label) + " is outside the adjacency set");
    }
    auto pred_adj = denoiser_forward_on_tape(tape, updated, da.z, da_labels, da.t, TrainTarget::mesh_params);
    Tensor2 base_adj = base.predict(da.z, da_labels, da.t);
    const double inv_b = 1.0 / static_cast<double>(da.z.rows());
    return tape.scale(tape.sumsq(tape.sub(pred_adj, tape.constant(std::move(base_adj)))), inv_b);
}

GradTape::Value target_forward(GradTape& tape, const NoisePredictor& updated, const NoisedBatch& du, int c_tar) {
    return denoiser_forward_on_tape(tape, updated, du.z, std::vector<int>(du.z.rows(), c_tar), du.t,
                                    TrainTarget::mesh_params);
}

} // namespace

double erasing_loss(const NoisePredictor& updated, const FrozenDenoiser& base, const NoisedBatch& du,
                    int c_tar, const std::vector<int>& adjacency, double delta) {
    GradTape tape;
    auto pred = target_forward(tape, updated, du, c_tar);
    return tape.scalar(erasing_loss_on_tape(tape, updated, base, du, pred, c_tar, adjacency, delta));
}

double guidance_loss(const NoisePredictor& updated, const FrozenDenoiser& base, const NoisedBatch& du,
                     int c_tar) {
    GradTape tape;
    auto pred = target_forward(tape, updated, du, c_tar);
    return tape.scalar(guidance_loss_on_tape(tape, base, du, pred));
}

double adjacency_loss(const NoisePredictor& updated, const FrozenDenoiser& base, const NoisedBatch& da,
                      const std::vector<int>& da_labels, const std::vector<int>& adjacency) {
    GradTape tape;
    return tape.scalar(adjacency_loss_on_tape(tape, updated, base, da, da_labels, adjacency));
}

LossBreakdown fade_total(double l_er, double l_guid, double l_adj, const FadeConfig& cfg, int iteration) {
    require(cfg.use_er || cfg.use_adj || cfg.use_guid, ErrorKind::contract,
            "fade: at least one loss toggle must be enabled");
    LossBreakdown out;
    out.iteration = iteration;
    out.l_er = cfg.use_er ? l_er : 0.0;
    out.l_guid = cfg.use_guid ? l_guid : 0.0;
    out.l_adj = cfg.use_adj ? l_adj : 0.0;
    out.l_total = cfg.lambda_er * out.l_er + cfg.lambda_adj * out.l_adj + cfg.lambda_guid * out.l_guid;
    return out;
}

UnlearnResult unlearn(const NoisePredictor& base_model, const ConceptWorld& world,
                      const NoiseSchedule& schedule, const FadeConfig& cfg) {
    cfg.validate();
    require(!base_model.mesh.has_value(), ErrorKind::contract, "unlearn expects a bare base model");
    require(world.has_concept(cfg.c_tar), ErrorKind::lookup,
            "unknown target concept " + std::to_string(cfg.c_tar));
    for (int c : cfg.adjacency) {
        require(world.has_concept(c), ErrorKind::lookup, "unknown adjacency concept " + std::to_string(c));
    }

    UnlearnResult result;
    result.model = base_model;
    attach_mesh(result.model, cfg.mesh_targets, cfg.rank, cfg.seed);
    const FrozenDenoiser base = freeze(base_model);

    AdamW opt(AdamW::Config{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
    Rng run_rng = Rng(cfg.seed).fork(0x66616465ULL);

    auto draw_batch = [&](Rng& rng, int concept_id) {
        NoisedBatch batch;
        Tensor2 x0 = sample_concept(world, concept_id, static_cast<std::size_t>(cfg.batch), rng.next_u64());
        batch.z = Tensor2(cfg.batch, world.dimension);
        batch.t.resize(cfg.batch);
        for (int i = 0; i < cfg.batch; ++i) {
            batch.t[i] = 1 + static_cast<int>(rng.below(schedule.steps));
            const double abar = schedule.alpha_bar_at(static_cast<std::size_t>(batch.t[i]));
            for (std::size_t j = 0; j < world.dimension; ++j) {
                batch.z(i, j) = std::sqrt(abar) * x0(i, j) + std::sqrt(1.0 - abar) * rng.normal();
            }
        }
        return batch;
    };

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        Rng iter_rng = run_rng.fork(static_cast<std::uint64_t>(iter));

        GradTape tape;
        GradTape::Value total{};
        bool have_total = false;
        LossBreakdown breakdown;
        breakdown.iteration = iter;

        if (cfg.use_er || cfg.use_guid) {
            NoisedBatch du = draw_batch(iter_rng, cfg.c_tar);
            auto pred_tar = target_forward(tape, result.model, du, cfg.c_tar);
            if (cfg.use_er) {
                auto er = erasing_loss_on_tape(tape, result.model, base, du, pred_tar, cfg.c_tar,
                                               cfg.adjacency, cfg.delta);
                breakdown.l_er = tape.scalar(er);
                total = tape.scale(er, cfg.lambda_er);
                have_total = true;
            }
            if (cfg.use_guid) {
                auto guid = guidance_loss_on_tape(tape, base, du, pred_tar);
                breakdown.l_guid = tape.scalar(guid);
                auto weighted = tape.scale(guid, cfg.lambda_guid);
                total = have_total ? tape.add(total, weighted) : weighted;
                have_total = true;
            }
        }
        if (cfg.use_adj) {
            Rng adj_rng = iter_rng.fork(0x616466ULL);
            std::vector<int> labels(cfg.batch);
            NoisedBatch da;
            da.z = Tensor2(cfg.batch, world.dimension);
            da.t.resize(cfg.batch);
            for (int i = 0; i < cfg.batch; ++i) {
                labels[i] = cfg.adjacency[adj_rng.below(cfg.adjacency.size())];
                Tensor2 x0 = sample_concept(world, labels[i], 1, adj_rng.next_u64());
                da.t[i] = 1 + static_cast<int>(adj_rng.below(schedule.steps));
                const double abar = schedule.alpha_bar_at(static_cast<std::size_t>(da.t[i]));
                for (std::size_t j = 0; j < world.dimension; ++j) {
                    da.z(i, j) = std::sqrt(abar) * x0(0, j) + std::sqrt(1.0 - abar) * adj_rng.normal();
                }
            }
            auto adj = adjacency_loss_on_tape(tape, result.model, base, da, labels, cfg.adjacency);
            breakdown.l_adj = tape.scalar(adj);
            auto weighted = tape.scale(adj, cfg.lambda_adj);
            total = have_total ? tape.add(total, weighted) : weighted;
            have_total = true;
        }

        breakdown.l_total = tape.scalar(total);
        if (!std::isfinite(breakdown.l_total)) {
            throw_error(ErrorKind::training_failure,
                        "fade training diverged at iteration " + std::to_string(iter));
        }
        result.trace.push_back(breakdown);

        opt.step(result.model.mesh->params, tape.backward(total));
    }

    verify_base_integrity(result.model);
    return result;
}

} // namespace fadelab
