#include "fadelab/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace fadelab {

SampleFn model_sampler(const FrozenDenoiser& model, const NoiseSchedule& schedule) {
    return [model, schedule](int concept_id, std::size_t count, std::uint64_t seed) {
        return sample_model(model, schedule, concept_id, count, seed);
    };
}

namespace {

double generation_accuracy(const SampleFn& sampler, const ConceptWorld& world, int concept_id,
                           std::size_t n_samples, std::uint64_t seed) {
    Tensor2 samples = sampler(concept_id, n_samples, seed);
    const std::vector<int> labels = bayes_argmax_rows(world, samples);
    std::size_t hits = 0;
    for (int label : labels) {
        if (label == concept_id) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(n_samples);
}

} // namespace

double erasing_accuracy(const SampleFn& sampler, const ConceptWorld& world, int c_tar,
                        std::size_t n_samples, std::uint64_t seed) {
    require(n_samples >= 100, ErrorKind::contract, "erasing_accuracy needs at least 100 samples");
    require(world.has_concept(c_tar), ErrorKind::lookup, "unknown target concept " + std::to_string(c_tar));
    return 100.0 - generation_accuracy(sampler, world, c_tar, n_samples, seed);
}

AdjacencyAccuracy adjacency_accuracy(const SampleFn& sampler, const ConceptWorld& world,
                                     const std::vector<int>& adjacency, std::size_t n_samples,
                                     std::uint64_t seed) {
    require(!adjacency.empty(), ErrorKind::contract, "adjacency_accuracy needs a nonempty adjacency set");
    AdjacencyAccuracy out;
    Rng rng = Rng(seed).fork(0x61646a61ULL);
    for (int c : adjacency) {
        const double acc = generation_accuracy(sampler, world, c, n_samples,
                                               rng.fork(static_cast<std::uint64_t>(c)).next_u64());
        out.per_neighbor.emplace_back(c, acc);
        out.mean += acc;
    }
    out.mean /= static_cast<double>(adjacency.size());
    return out;
}

double erb(double a_er, double a_adj_mean, double eta) {
    require(a_er >= 0.0 && a_er <= 100.0, ErrorKind::contract, "erb: a_er must lie in [0, 100]");
    require(a_adj_mean >= 0.0 && a_adj_mean <= 100.0, ErrorKind::contract, "erb: a_adj must lie in [0, 100]");
    require(eta > 0.0, ErrorKind::contract, "erb: eta must be positive");
    return 2.0 * a_er * a_adj_mean / (a_er + a_adj_mean + eta);
}

ErbReport evaluate_models(const SampleFn& base_sampler, const SampleFn& unlearned_sampler,
                          const ConceptWorld& world, const AdjacencySet& adjacency,
                          const std::vector<int>& retain_concepts, const EvalConfig& cfg) {
    require(!adjacency.neighbors.empty(), ErrorKind::contract, "evaluate: adjacency set is empty");
    const std::vector<int> adj_ids = adjacency.ids();
    for (int r : retain_concepts) {
        require(std::find(adj_ids.begin(), adj_ids.end(), r) == adj_ids.end(), ErrorKind::contract,
                "evaluate: concept " + std::to_string(r) + " appears in both adjacency and retain sets");
        require(r != adjacency.target, ErrorKind::contract, "evaluate: target concept in retain set");
    }

    ErbReport rep;
    rep.eta = cfg.eta;
    rep.n_samples = cfg.n_samples;
    rep.seed = cfg.seed;
    {
        // Provenance fingerprint over everything that determines the report.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](std::uint64_t v) {
            for (int b = 0; b < 8; ++b) {
                h ^= (v >> (8 * b)) & 0xffULL;
                h *= 0x100000001b3ULL;
            }
        };
        mix(cfg.n_samples);
        mix(cfg.seed);
        mix(static_cast<std::uint64_t>(cfg.eta * 1e18));
        mix(static_cast<std::uint64_t>(adjacency.target));
        for (const auto& [id, sim] : adjacency.neighbors) mix(static_cast<std::uint64_t>(id));
        for (int r : retain_concepts) mix(static_cast<std::uint64_t>(r));
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        rep.config_hash = buf;
    }

    Rng rng = Rng(cfg.seed).fork(0x6576616cULL);
    const std::uint64_t er_seed = rng.next_u64();
    const std::uint64_t adj_seed = rng.next_u64();
    const std::uint64_t retain_seed = rng.next_u64();

    rep.a_er = erasing_accuracy(unlearned_sampler, world, adjacency.target, cfg.n_samples, er_seed);
    const AdjacencyAccuracy adj = adjacency_accuracy(unlearned_sampler, world, adj_ids, cfg.n_samples, adj_seed);
    rep.per_neighbor_acc = adj.per_neighbor;
    rep.a_adj_mean = adj.mean;
    rep.erb_score = erb(rep.a_er, rep.a_adj_mean, cfg.eta);

    rep.base_a_er = erasing_accuracy(base_sampler, world, adjacency.target, cfg.n_samples, er_seed);
    const AdjacencyAccuracy base_adj = adjacency_accuracy(base_sampler, world, adj_ids, cfg.n_samples, adj_seed);
    rep.base_per_neighbor_acc = base_adj.per_neighbor;
    rep.base_a_adj_mean = base_adj.mean;
    rep.base_erb_score = erb(rep.base_a_er, rep.base_a_adj_mean, cfg.eta);

    Rng retain_rng = Rng(retain_seed);
    for (int c : retain_concepts) {
        const std::uint64_t s = retain_rng.fork(static_cast<std::uint64_t>(c)).next_u64();
        const double acc = generation_accuracy(unlearned_sampler, world, c, cfg.n_samples, s);
        const double base_acc = generation_accuracy(base_sampler, world, c, cfg.n_samples, s);
        rep.retain_acc.emplace_back(c, acc);
        rep.base_retain_acc.emplace_back(c, base_acc);
        rep.retain_mean += acc;
        rep.base_retain_mean += base_acc;
    }
    if (!retain_concepts.empty()) {
        rep.retain_mean /= static_cast<double>(retain_concepts.size());
        rep.base_retain_mean /= static_cast<double>(retain_concepts.size());
    }
    return rep;
}

double ground_truth_similarity(const ConceptWorld& world, int a, int b) {
    const ConceptSpec& ca = world.concept_by_id(a);
    const ConceptSpec& cb = world.concept_by_id(b);
    return cosine_similarity(ca.mean.data(), cb.mean.data(), world.dimension);
}

InflectionCurve inflection_sweep(const SampleFn& sampler, const ConceptWorld& world, int c_tar,
                                 std::size_t n_buckets, std::size_t n_samples, std::uint64_t seed,
                                 const std::string& model_tag) {
    require(n_buckets >= 2, ErrorKind::config, "inflection sweep needs at least 2 buckets");
    require(world.has_concept(c_tar), ErrorKind::lookup, "unknown target concept " + std::to_string(c_tar));

    std::vector<std::pair<double, int>> sims; // (similarity, concept_id)
    for (const auto& spec : world.concepts) {
        if (spec.concept_id == c_tar) continue;
        sims.emplace_back(ground_truth_similarity(world, c_tar, spec.concept_id), spec.concept_id);
    }
    require(sims.size() >= n_buckets, ErrorKind::config, "more buckets than non-target concepts");
    std::sort(sims.begin(), sims.end());

    // Quantile edges over the observed similarities keep every bucket
    // populated under the family layout.
    std::vector<double> edges(n_buckets + 1);
    edges[0] = sims.front().first;
    edges[n_buckets] = sims.back().first;
    for (std::size_t b = 1; b < n_buckets; ++b) {
        const double q = static_cast<double>(b) / static_cast<double>(n_buckets);
        const double pos = q * static_cast<double>(sims.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        const double hi_val = sims[std::min(lo + 1, sims.size() - 1)].first;
        edges[b] = sims[lo].first * (1.0 - frac) + hi_val * frac;
    }

    InflectionCurve curve;
    curve.model_tag = model_tag;
    Rng rng = Rng(seed).fork(0x696e666cULL);
    for (std::size_t b = 0; b < n_buckets; ++b) {
        InflectionBucket bucket;
        bucket.sim_low = edges[b];
        bucket.sim_high = edges[b + 1];
        double acc = 0.0;
        for (const auto& [sim, id] : sims) {
            const bool in_bucket = b + 1 == n_buckets ? (sim >= edges[b] && sim <= edges[b + 1])
                                                      : (sim >= edges[b] && sim < edges[b + 1]);
            if (!in_bucket) continue;
            acc += generation_accuracy(sampler, world, id, n_samples,
                                       rng.fork(static_cast<std::uint64_t>(id)).next_u64());
            ++bucket.concepts;
        }
        if (bucket.concepts == 0) {
            bucket.skipped = true;
        } else {
            bucket.mean_accuracy = acc / static_cast<double>(bucket.concepts);
        }
        curve.buckets.push_back(bucket);
    }
    return curve;
}

std::string AblationRow::label() const {
    std::string s;
    s += use_guid ? "guid" : "----";
    s += use_er ? "+er" : "+--";
    s += use_adj ? "+adj" : "+---";
    return s;
}

std::vector<std::array<bool, 3>> ablation_toggle_rows() {
    // {guid, er, adj}, standard table order; the all-off row is invalid and
    // the adj-only row erases nothing, so neither is part of the study.
    return {
        {true, true, true},   {true, true, false}, {true, false, true},
        {true, false, false}, {false, true, true}, {false, true, false},
    };
}

std::vector<AblationRow> ablation_run(const NoisePredictor& base_model, const ConceptWorld& world,
                                      const NoiseSchedule& schedule, const FadeConfig& cfg,
                                      const std::vector<std::uint64_t>& seeds, const EvalConfig& eval_cfg) {
    require(!seeds.empty(), ErrorKind::config, "ablation run needs at least one seed");
    const FrozenDenoiser base = freeze(base_model);
    const SampleFn base_sampler = model_sampler(base, schedule);

    AdjacencySet adj;
    adj.target = cfg.c_tar;
    adj.k = static_cast<int>(cfg.adjacency.size());
    for (int c : cfg.adjacency) {
        adj.neighbors.emplace_back(c, ground_truth_similarity(world, cfg.c_tar, c));
    }

    std::vector<AblationRow> rows;
    for (const auto& toggles : ablation_toggle_rows()) {
        AblationRow row;
        row.use_guid = toggles[0];
        row.use_er = toggles[1];
        row.use_adj = toggles[2];
        for (std::uint64_t seed : seeds) {
            FadeConfig variant = cfg;
            variant.use_guid = row.use_guid;
            variant.use_er = row.use_er;
            variant.use_adj = row.use_adj;
            variant.seed = seed;
            UnlearnResult run = unlearn(base_model, world, schedule, variant);
            EvalConfig ecfg = eval_cfg;
            ecfg.seed = Rng(seed).fork(0x61626c61ULL).next_u64();
            const ErbReport rep = evaluate_models(base_sampler, model_sampler(freeze(run.model), schedule),
                                                  world, adj, {}, ecfg);
            row.mean_a_er += rep.a_er;
            row.mean_a_adj += rep.a_adj_mean;
            row.mean_erb += rep.erb_score;
            row.per_seed_erb.push_back(rep.erb_score);
        }
        const double inv = 1.0 / static_cast<double>(seeds.size());
        row.mean_a_er *= inv;
        row.mean_a_adj *= inv;
        row.mean_erb *= inv;
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace fadelab
