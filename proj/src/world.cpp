#include "fadelab/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fadelab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void normalize(std::vector<double>& v) {
    double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= n;
}

double angle_between(const std::vector<double>& a, const std::vector<double>& b) {
    const double c = std::clamp(std::inner_product(a.begin(), a.end(), b.begin(), 0.0), -1.0, 1.0);
    return std::acos(c);
}

// Unit direction for each family. n = 2 uses evenly spaced sector centers with
// a small seeded jitter; higher dimensions draw random directions until every
// pair is at least min_sep apart.
std::vector<std::vector<double>> family_directions(const WorldConfig& cfg, Rng& rng) {
    std::vector<std::vector<double>> dirs;
    if (cfg.dimension == 2) {
        for (int f = 0; f < cfg.families; ++f) {
            const double jitter = (rng.uniform() - 0.5) * 4.0 * kPi / 180.0;
            const double theta = 2.0 * kPi * f / cfg.families + jitter;
            dirs.push_back({std::cos(theta), std::sin(theta)});
        }
        return dirs;
    }
    const double span = cfg.concept_spacing_deg * (cfg.concepts_per_family - 1);
    const double min_sep = std::max(60.0, 2.2 * span) * kPi / 180.0;
    int attempts = 0;
    while (static_cast<int>(dirs.size()) < cfg.families) {
        require(++attempts < 100000, ErrorKind::config,
                "could not place " + std::to_string(cfg.families) + " family directions in dimension " +
                    std::to_string(cfg.dimension));
        std::vector<double> d(cfg.dimension);
        for (double& x : d) x = rng.normal();
        normalize(d);
        bool ok = true;
        for (const auto& prev : dirs) {
            if (angle_between(prev, d) < min_sep) {
                ok = false;
                break;
            }
        }
        if (ok) dirs.push_back(std::move(d));
    }
    return dirs;
}

// Rotates `dir` by `angle` toward a unit vector orthogonal to it.
std::vector<double> rotate_toward(const std::vector<double>& dir, const std::vector<double>& ortho, double angle) {
    std::vector<double> out(dir.size());
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t i = 0; i < dir.size(); ++i) {
        out[i] = c * dir[i] + s * ortho[i];
    }
    return out;
}

std::vector<double> orthogonal_direction(const std::vector<double>& dir, Rng& rng) {
    if (dir.size() == 2) {
        return {-dir[1], dir[0]};
    }
    std::vector<double> v(dir.size());
    for (;;) {
        for (double& x : v) x = rng.normal();
        const double proj = std::inner_product(v.begin(), v.end(), dir.begin(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * dir[i];
        const double n2 = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
        if (n2 > 1e-12) {
            for (double& x : v) x /= std::sqrt(n2);
            return v;
        }
    }
}

void check_construction(const ConceptWorld& world) {
    for (const auto& c : world.concepts) {
        require(c.mean.size() == world.dimension, ErrorKind::shape, "concept mean dimension mismatch");
        require(c.covariance.size() == world.dimension, ErrorKind::shape, "concept covariance dimension mismatch");
        for (double v : c.covariance) {
            require(v > 0.0, ErrorKind::config, "covariance entries must be positive");
        }
        require(c.prior >= 0.0, ErrorKind::config, "priors must be non-negative");
    }
    double total_prior = 0.0;
    for (const auto& c : world.concepts) total_prior += c.prior;
    require(std::abs(total_prior - 1.0) <= 1e-12, ErrorKind::config, "concept priors must sum to 1");

    const auto [max_intra, min_inter] = family_separation(world);
    require(max_intra < min_inter, ErrorKind::config,
            "family geometry violated: max intra-family distance " + std::to_string(max_intra) +
                " >= min inter-family distance " + std::to_string(min_inter));
}

} // namespace

const ConceptSpec& ConceptWorld::concept_by_id(int concept_id) const {
    for (const auto& c : concepts) {
        if (c.concept_id == concept_id) return c;
    }
    throw_error(ErrorKind::lookup, "unknown concept id " + std::to_string(concept_id));
}

bool ConceptWorld::has_concept(int concept_id) const noexcept {
    for (const auto& c : concepts) {
        if (c.concept_id == concept_id) return true;
    }
    return false;
}

ConceptWorld build_world(const WorldConfig& cfg) {
    require(cfg.families >= 2, ErrorKind::config, "world needs at least 2 families");
    require(cfg.concepts_per_family > cfg.adjacency_k, ErrorKind::config,
            "concepts per family (" + std::to_string(cfg.concepts_per_family) +
                ") must exceed adjacency size K (" + std::to_string(cfg.adjacency_k) + ")");
    require(cfg.dimension >= 2, ErrorKind::config, "world dimension must be at least 2");
    require(cfg.radius > 0.0 && cfg.sigma > 0.0, ErrorKind::config, "radius and sigma must be positive");

    Rng rng(cfg.seed);
    Rng layout_rng = rng.fork(0x776f726c64ULL);
    const auto dirs = family_directions(cfg, layout_rng);

    ConceptWorld world;
    world.dimension = cfg.dimension;
    world.config = cfg;

    const int total = cfg.families * cfg.concepts_per_family;
    const double prior = 1.0 / total;
    const double spacing = cfg.concept_spacing_deg * kPi / 180.0;

    int id = 0;
    for (int f = 0; f < cfg.families; ++f) {
        Rng fam_rng = layout_rng.fork(1000 + static_cast<std::uint64_t>(f));
        const auto ortho = orthogonal_direction(dirs[f], fam_rng);
        for (int g = 0; g < cfg.concepts_per_family; ++g) {
            const double base = (g - (cfg.concepts_per_family - 1) / 2.0) * spacing;
            const double jitter = (fam_rng.uniform() - 0.5) * 0.2 * spacing;
            const auto dir = rotate_toward(dirs[f], ortho, base + jitter);
            ConceptSpec spec;
            spec.concept_id = id++;
            spec.family_id = f;
            spec.mean.resize(cfg.dimension);
            for (std::size_t i = 0; i < cfg.dimension; ++i) spec.mean[i] = cfg.radius * dir[i];
            spec.covariance.assign(cfg.dimension, cfg.sigma * cfg.sigma);
            spec.prior = prior;
            world.concepts.push_back(std::move(spec));
        }
    }

    check_construction(world);
    return world;
}

ConceptWorld world_from_specs(std::size_t dimension, std::vector<ConceptSpec> concepts, WorldConfig cfg) {
    ConceptWorld world;
    world.dimension = dimension;
    world.concepts = std::move(concepts);
    world.config = cfg;
    check_construction(world);
    return world;
}

Tensor2 sample_concept(const ConceptWorld& world, int concept_id, std::size_t m, std::uint64_t seed) {
    require(m >= 1, ErrorKind::contract, "sample count must be at least 1");
    const ConceptSpec& spec = world.concept_by_id(concept_id);
    Rng rng = Rng(seed).fork(0x73616d70ULL + static_cast<std::uint64_t>(concept_id));
    Tensor2 out(m, world.dimension);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < world.dimension; ++j) {
            out(i, j) = spec.mean[j] + std::sqrt(spec.covariance[j]) * rng.normal();
        }
    }
    return out;
}

Dataset sample_mixture(const ConceptWorld& world, std::size_t m, std::uint64_t seed) {
    Rng rng = Rng(seed).fork(0x6d697874ULL);
    Dataset ds;
    ds.points = Tensor2(m, world.dimension);
    ds.labels.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        double u = rng.uniform();
        const ConceptSpec* chosen = &world.concepts.back();
        for (const auto& c : world.concepts) {
            if (u < c.prior) {
                chosen = &c;
                break;
            }
            u -= c.prior;
        }
        ds.labels[i] = chosen->concept_id;
        for (std::size_t j = 0; j < world.dimension; ++j) {
            ds.points(i, j) = chosen->mean[j] + std::sqrt(chosen->covariance[j]) * rng.normal();
        }
    }
    return ds;
}

BayesResult bayes_classify(const ConceptWorld& world, const double* x, std::size_t n) {
    require(n == world.dimension, ErrorKind::shape, "query dimension does not match world");
    for (std::size_t i = 0; i < n; ++i) {
        require(std::isfinite(x[i]), ErrorKind::contract, "query must be finite");
    }

    std::vector<double> logp(world.concepts.size(), -std::numeric_limits<double>::infinity());
    double best = -std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (std::size_t c = 0; c < world.concepts.size(); ++c) {
        const ConceptSpec& spec = world.concepts[c];
        if (spec.prior <= 0.0) continue;
        double lp = std::log(spec.prior);
        for (std::size_t j = 0; j < n; ++j) {
            const double d = x[j] - spec.mean[j];
            lp -= 0.5 * (d * d / spec.covariance[j] + std::log(2.0 * kPi * spec.covariance[j]));
        }
        logp[c] = lp;
        if (lp > best) {
            best = lp;
            best_idx = static_cast<int>(c);
        }
    }
    require(best_idx >= 0, ErrorKind::contract, "bayes_classify: no concept has positive prior");

    BayesResult res;
    res.posterior.resize(world.concepts.size(), 0.0);
    double z = 0.0;
    for (std::size_t c = 0; c < world.concepts.size(); ++c) {
        if (std::isfinite(logp[c])) {
            res.posterior[c] = std::exp(logp[c] - best);
            z += res.posterior[c];
        }
    }
    for (double& p : res.posterior) p /= z;
    res.concept_id = world.concepts[static_cast<std::size_t>(best_idx)].concept_id;
    return res;
}

std::vector<int> bayes_argmax_rows(const ConceptWorld& world, const Tensor2& points) {
    require(points.cols() == world.dimension, ErrorKind::shape, "points dimension does not match world");
    std::vector<int> out(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double best = -std::numeric_limits<double>::infinity();
        int best_id = 0;
        for (const auto& spec : world.concepts) {
            if (spec.prior <= 0.0) continue;
            double lp = std::log(spec.prior);
            for (std::size_t j = 0; j < world.dimension; ++j) {
                const double d = points(i, j) - spec.mean[j];
                lp -= 0.5 * (d * d / spec.covariance[j] + std::log(2.0 * kPi * spec.covariance[j]));
            }
            if (lp > best) {
                best = lp;
                best_id = spec.concept_id;
            }
        }
        out[i] = best_id;
    }
    return out;
}

DatasetSplit make_splits(const ConceptWorld& world, int c_tar, const std::vector<int>& adjacency,
                         std::size_t m_per_concept, std::uint64_t seed) {
    require(world.has_concept(c_tar), ErrorKind::lookup, "unknown target concept " + std::to_string(c_tar));
    for (int a : adjacency) {
        require(a != c_tar, ErrorKind::contract, "target concept appears in its own adjacency set");
        require(world.has_concept(a), ErrorKind::lookup, "unknown adjacency concept " + std::to_string(a));
    }

    auto gather = [&](const std::vector<int>& ids, std::uint64_t tag) {
        Dataset ds;
        ds.points = Tensor2(ids.size() * m_per_concept, world.dimension);
        ds.labels.reserve(ids.size() * m_per_concept);
        std::size_t row = 0;
        for (int id : ids) {
            Tensor2 pts = sample_concept(world, id, m_per_concept, Rng(seed).fork(tag).next_u64());
            for (std::size_t i = 0; i < pts.rows(); ++i, ++row) {
                std::copy(pts.row_ptr(i), pts.row_ptr(i) + pts.cols(), ds.points.row_ptr(row));
                ds.labels.push_back(id);
            }
        }
        return ds;
    };

    DatasetSplit split;
    split.unlearn = gather({c_tar}, 1);
    if (!adjacency.empty()) {
        split.adjacency = gather(adjacency, 2);
    } else {
        split.adjacency.points = Tensor2(0, world.dimension);
    }
    for (const auto& c : world.concepts) {
        if (c.concept_id == c_tar) continue;
        if (std::find(adjacency.begin(), adjacency.end(), c.concept_id) != adjacency.end()) continue;
        split.retain_concepts.push_back(c.concept_id);
    }
    split.retain = gather(split.retain_concepts, 3);
    return split;
}

std::pair<double, double> family_separation(const ConceptWorld& world) {
    double max_intra = 0.0;
    double min_inter = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < world.concepts.size(); ++i) {
        for (std::size_t j = i + 1; j < world.concepts.size(); ++j) {
            const double d = std::sqrt(sqdist(world.concepts[i].mean, world.concepts[j].mean));
            if (world.concepts[i].family_id == world.concepts[j].family_id) {
                max_intra = std::max(max_intra, d);
            } else {
                min_inter = std::min(min_inter, d);
            }
        }
    }
    return {max_intra, min_inter};
}

} // namespace fadelab
