#include "fadelab/evaluation.hpp"

#include <doctest.h>

#include <cmath>

using namespace fadelab;

namespace {

// Stub sampler emitting the exact mean of a chosen concept regardless of the
// conditioning, or the conditioned concept's own mean.
SampleFn stub_mean_sampler(const ConceptWorld& world, int fixed_concept = -1) {
    return [&world, fixed_concept](int concept_id, std::size_t count, std::uint64_t) {
        const int src = fixed_concept >= 0 ? fixed_concept : concept_id;
        const ConceptSpec& spec = world.concept_by_id(src);
        Tensor2 out(count, world.dimension);
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t j = 0; j < world.dimension; ++j) out(i, j) = spec.mean[j];
        }
        return out;
    };
}

AdjacencySet make_adj(const ConceptWorld& world, int target, std::vector<int> ids) {
    AdjacencySet adj;
    adj.target = target;
    adj.k = static_cast<int>(ids.size());
    for (int id : ids) adj.neighbors.emplace_back(id, ground_truth_similarity(world, target, id));
    return adj;
}

} // namespace

TEST_CASE("erb reference arithmetic") {
    CHECK(std::abs(erb(99.60, 92.60, 1e-8) - 95.97) < 0.01);
    CHECK(std::abs(erb(100.0, 20.0, 1e-8) - 33.34) < 0.01);
    CHECK(erb(0.0, 77.0, 1e-8) == 0.0);
    CHECK_THROWS_AS(erb(-1.0, 50.0, 1e-8), Error);
    CHECK_THROWS_AS(erb(50.0, 101.0, 1e-8), Error);
    CHECK_THROWS_AS(erb(50.0, 50.0, 0.0), Error);
}

TEST_CASE("erb algebraic properties") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const double a = 100.0 * rng.uniform();
        const double b = 100.0 * rng.uniform();
        const double e = erb(a, b, 1e-8);
        CHECK(e <= 2.0 * a + 1e-9);
        CHECK(e <= 2.0 * b + 1e-9);
        CHECK(e == doctest::Approx(erb(b, a, 1e-8)).epsilon(1e-12)); // symmetric
        if (a > 1.0 && b > 1.0) {
            CHECK(erb(a + 0.5, b, 1e-8) > e); // strictly increasing per argument
            CHECK(erb(a, b + 0.5, 1e-8) > e);
        }
        CHECK(erb(a, a, 1e-12) == doctest::Approx(a).epsilon(1e-9)); // ERB(x, x) -> x
    }
}

TEST_CASE("erasing accuracy with stub samplers") {
    const ConceptWorld world = build_world(WorldConfig{});
    SUBCASE("a sampler stuck on a non-target mean erases perfectly") {
        CHECK(erasing_accuracy(stub_mean_sampler(world, 7), world, 0, 200, 1) == 100.0);
    }
    SUBCASE("a sampler emitting the target mean erases nothing") {
        CHECK(erasing_accuracy(stub_mean_sampler(world, 0), world, 0, 200, 1) == 0.0);
    }
    SUBCASE("sample count below 100 is rejected") {
        CHECK_THROWS_AS(erasing_accuracy(stub_mean_sampler(world, 0), world, 0, 99, 1), Error);
    }
}

TEST_CASE("adjacency accuracy with stub samplers") {
    const ConceptWorld world = build_world(WorldConfig{});
    SUBCASE("a perfect sampler scores 100 everywhere") {
        const AdjacencyAccuracy acc = adjacency_accuracy(stub_mean_sampler(world), world,
                                                         {1, 2, 3, 4, 5}, 120, 3);
        CHECK(acc.mean == 100.0);
        for (const auto& [id, a] : acc.per_neighbor) CHECK(a == 100.0);
    }
    SUBCASE("K=1 mean equals the single entry") {
        const AdjacencyAccuracy acc = adjacency_accuracy(stub_mean_sampler(world), world, {4}, 120, 3);
        CHECK(acc.mean == acc.per_neighbor[0].second);
    }
    SUBCASE("empty adjacency is a contract error") {
        CHECK_THROWS_AS(adjacency_accuracy(stub_mean_sampler(world), world, {}, 120, 3), Error);
    }
}

TEST_CASE("evaluate_models identity run reproduces the base row") {
    const ConceptWorld world = build_world(WorldConfig{});
    const AdjacencySet adj = make_adj(world, 0, {1, 2, 3, 4, 5});
    const SampleFn sampler = stub_mean_sampler(world);
    EvalConfig cfg;
    cfg.n_samples = 150;

    const ErbReport rep = evaluate_models(sampler, sampler, world, adj, {10, 11, 12}, cfg);
    CHECK(rep.a_er == rep.base_a_er);
    CHECK(rep.a_adj_mean == rep.base_a_adj_mean);
    CHECK(rep.retain_mean == rep.base_retain_mean);
    CHECK(rep.a_er == 0.0);        // perfect generator never erases
    CHECK(rep.a_adj_mean == 100.0);
    CHECK(rep.retain_mean == 100.0);

    SUBCASE("the stored erb always satisfies the formula") {
        CHECK(std::abs(rep.erb_score - erb(rep.a_er, rep.a_adj_mean, rep.eta)) <= 1e-9);
    }
    SUBCASE("reports are deterministic in (models, seeds, config)") {
        const ErbReport again = evaluate_models(sampler, sampler, world, adj, {10, 11, 12}, cfg);
        CHECK(again.a_er == rep.a_er);
        CHECK(again.per_neighbor_acc == rep.per_neighbor_acc);
        CHECK(again.retain_acc == rep.retain_acc);
    }
    SUBCASE("adjacency and retain sets must not overlap") {
        CHECK_THROWS_AS(evaluate_models(sampler, sampler, world, adj, {5, 10}, cfg), Error);
        CHECK_THROWS_AS(evaluate_models(sampler, sampler, world, adj, {0}, cfg), Error);
    }
}

TEST_CASE("ground truth similarity orders family before strangers") {
    const ConceptWorld world = build_world(WorldConfig{});
    const double sibling = ground_truth_similarity(world, 0, 1);
    const double stranger = ground_truth_similarity(world, 0, 13);
    CHECK(sibling > stranger);
    CHECK(sibling <= 1.0);
    CHECK(stranger >= -1.0);
}

TEST_CASE("inflection sweep") {
    const ConceptWorld world = build_world(WorldConfig{});

    SUBCASE("a perfect sampler gives a flat curve at 100") {
        const InflectionCurve curve = inflection_sweep(stub_mean_sampler(world), world, 0, 5, 120, 3);
        REQUIRE(curve.buckets.size() == 5);
        double prev = -2.0;
        std::size_t covered = 0;
        for (const auto& b : curve.buckets) {
            CHECK(b.sim_low >= prev);
            prev = b.sim_low;
            if (!b.skipped) {
                CHECK(b.mean_accuracy == 100.0);
                covered += b.concepts;
            }
        }
        CHECK(covered == world.concepts.size() - 1);
    }
    SUBCASE("duplicate similarities can empty a bucket, which is flagged") {
        // Hand-built world: a target with one sibling, plus a mirrored pair at
        // 175 and 185 degrees whose similarities to the target tie exactly.
        std::vector<ConceptSpec> specs(4);
        const double r = 1.6;
        auto at = [&](double deg) {
            const double rad = deg * 3.14159265358979323846 / 180.0;
            return std::vector<double>{r * std::cos(rad), r * std::sin(rad)};
        };
        specs[0] = {0, 0, at(0.0), {0.001, 0.001}, 0.25};
        specs[1] = {1, 0, at(6.0), {0.001, 0.001}, 0.25};
        specs[2] = {2, 1, at(175.0), {0.001, 0.001}, 0.25};
        specs[3] = {3, 1, at(185.0), {0.001, 0.001}, 0.25};
        WorldConfig cfg;
        cfg.families = 2;
        cfg.concepts_per_family = 2;
        const ConceptWorld mirror = world_from_specs(2, specs, cfg);

        const InflectionCurve curve = inflection_sweep(stub_mean_sampler(mirror), mirror, 0, 3, 120, 3);
        REQUIRE(curve.buckets.size() == 3);
        bool any_skipped = false;
        std::size_t covered = 0;
        for (const auto& b : curve.buckets) {
            any_skipped = any_skipped || b.skipped;
            covered += b.concepts;
        }
        CHECK(any_skipped);
        CHECK(covered == 3);
    }
    SUBCASE("too many buckets is a configuration error") {
        CHECK_THROWS_AS(inflection_sweep(stub_mean_sampler(world), world, 0, 24, 120, 3), Error);
    }
}

TEST_CASE("ablation enumerates exactly six toggle rows") {
    const auto rows = ablation_toggle_rows();
    REQUIRE(rows.size() == 6);
    CHECK(rows[0] == std::array<bool, 3>{true, true, true});
    // No row is all-off, and no duplicate rows exist.
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK((rows[i][0] || rows[i][1] || rows[i][2]));
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            CHECK(rows[i] != rows[j]);
        }
    }
    // Ablating everything off is rejected at configuration time.
    FadeConfig cfg;
    cfg.adjacency = {1};
    cfg.use_er = cfg.use_adj = cfg.use_guid = false;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("model sampler adapter plugs the diffusion chain into evaluation") {
    const ConceptWorld world = build_world(WorldConfig{});
    const NoiseSchedule schedule = NoiseSchedule::linear(100, 1e-4, 0.02);
    DenoiserConfig dc;
    dc.hidden = {8, 8};
    dc.concept_dim = 4;
    dc.time_dim = 4;
    const NoisePredictor model = make_denoiser(dc, world.concepts.size(), 2);
    const SampleFn fn = model_sampler(freeze(model), schedule);
    Tensor2 a = fn(0, 8, 5);
    Tensor2 b = fn(0, 8, 5);
    CHECK(a.raw() == b.raw());
    CHECK(a.rows() == 8);
    CHECK(a.cols() == 2);
}
