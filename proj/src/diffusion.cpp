#include "fadelab/diffusion.hpp"

#include "fadelab/adamw.hpp"

#include <algorithm>
#include <cmath>

namespace fadelab {

NoiseSchedule NoiseSchedule::linear(std::size_t t_steps, double beta_min, double beta_max) {
    require(t_steps >= 2, ErrorKind::config, "schedule needs at least 2 steps");
    require(beta_min > 0.0 && beta_max < 1.0 && beta_min <= beta_max, ErrorKind::config,
            "betas must satisfy 0 < beta_min <= beta_max < 1");
    NoiseSchedule s;
    s.steps = t_steps;
    s.beta.resize(t_steps);
    s.alpha_bar.resize(t_steps);
    double prod = 1.0;
    for (std::size_t i = 0; i < t_steps; ++i) {
        s.beta[i] = beta_min + (beta_max - beta_min) * static_cast<double>(i) / static_cast<double>(t_steps - 1);
        prod *= 1.0 - s.beta[i];
        s.alpha_bar[i] = prod;
    }
    s.validate();
    return s;
}

double NoiseSchedule::beta_at(std::size_t t) const {
    require(t >= 1 && t <= steps, ErrorKind::contract, "timestep " + std::to_string(t) + " outside [1, T]");
    return beta[t - 1];
}

double NoiseSchedule::alpha_bar_at(std::size_t t) const {
    require(t <= steps, ErrorKind::contract, "timestep " + std::to_string(t) + " outside [0, T]");
    return t == 0 ? 1.0 : alpha_bar[t - 1];
}

void NoiseSchedule::validate() const {
    require(steps >= 2 && beta.size() == steps && alpha_bar.size() == steps, ErrorKind::config,
            "schedule arrays must have T entries");
    double prod = 1.0;
    for (std::size_t i = 0; i < steps; ++i) {
        require(beta[i] > 0.0 && beta[i] < 1.0, ErrorKind::config, "beta entries must lie in (0,1)");
        if (i > 0) {
            require(beta[i] >= beta[i - 1], ErrorKind::config, "beta must be non-decreasing");
            require(alpha_bar[i] < alpha_bar[i - 1], ErrorKind::config, "alpha_bar must strictly decrease");
        }
        prod *= 1.0 - beta[i];
        require(std::abs(alpha_bar[i] - prod) <= 1e-12, ErrorKind::config,
                "alpha_bar must equal the running product of (1 - beta)");
    }
    require(alpha_bar.front() < 1.0 && alpha_bar.back() > 0.0, ErrorKind::config,
            "alpha_bar must satisfy abar_1 < 1 and abar_T > 0");
}

std::size_t NoisePredictor::concept_row(int concept_id) const {
    if (concept_id == kNullConcept) return n_concepts;
    require(concept_id >= 0 && static_cast<std::size_t>(concept_id) < n_concepts, ErrorKind::lookup,
            "unknown concept id " + std::to_string(concept_id));
    return static_cast<std::size_t>(concept_id);
}

std::size_t FrozenDenoiser::concept_row(int concept_id) const {
    if (concept_id == kNullConcept) return n_concepts;
    require(concept_id >= 0 && static_cast<std::size_t>(concept_id) < n_concepts, ErrorKind::lookup,
            "unknown concept id " + std::to_string(concept_id));
    return static_cast<std::size_t>(concept_id);
}

NoisePredictor make_denoiser(const DenoiserConfig& cfg, std::size_t n_concepts, std::uint64_t seed) {
    require(n_concepts >= 1, ErrorKind::config, "denoiser needs at least one concept");
    require(!cfg.hidden.empty(), ErrorKind::config, "denoiser needs at least one hidden layer");
    NoisePredictor m;
    m.cfg = cfg;
    m.n_concepts = n_concepts;

    Rng rng = Rng(seed).fork(0x64656e6fULL);
    const std::size_t in = m.input_dim();
    m.base.add("embed", Tensor2::randn(n_concepts + 1, cfg.concept_dim, rng, cfg.embed_init_std));
    // First hidden layer splits into the x/t backbone and the concept
    // projection so the conditioning pathway is its own matrix.
    const std::size_t xt = cfg.data_dim + cfg.time_dim;
    m.base.add("w_xt", Tensor2::randn(xt, cfg.hidden[0], rng, 1.0 / std::sqrt(static_cast<double>(in))));
    m.base.add("c_proj", Tensor2::randn(cfg.concept_dim, cfg.hidden[0], rng, 1.0 / std::sqrt(static_cast<double>(in))));
    m.base.add("b1", Tensor2(1, cfg.hidden[0]));
    std::size_t prev = cfg.hidden[0];
    for (std::size_t l = 1; l < cfg.hidden.size(); ++l) {
        const std::string idx = std::to_string(l + 1);
        m.base.add("w" + idx, Tensor2::randn(prev, cfg.hidden[l], rng, 1.0 / std::sqrt(static_cast<double>(prev))));
        m.base.add("b" + idx, Tensor2(1, cfg.hidden[l]));
        prev = cfg.hidden[l];
    }
    const std::string out_idx = std::to_string(cfg.hidden.size() + 1);
    m.base.add("w" + out_idx, Tensor2::randn(prev, cfg.data_dim, rng, 1.0 / std::sqrt(static_cast<double>(prev))));
    m.base.add("b" + out_idx, Tensor2(1, cfg.data_dim));
    return m;
}

Tensor2 sinusoidal_time_embedding(const std::vector<int>& ts, std::size_t time_dim) {
    require(time_dim >= 2 && time_dim % 2 == 0, ErrorKind::config, "time embedding width must be even and >= 2");
    Tensor2 out(ts.size(), time_dim);
    const std::size_t half = time_dim / 2;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        for (std::size_t j = 0; j < half; ++j) {
            const double freq = std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(half));
            out(i, 2 * j) = std::sin(ts[i] * freq);
            out(i, 2 * j + 1) = std::cos(ts[i] * freq);
        }
    }
    return out;
}

namespace {

// Effective weights with any enabled adapter deltas folded in.
Tensor2 effective_weight(const NoisePredictor& model, const std::string& name) {
    const Tensor2& w0 = model.base.at(name).value;
    if (model.mesh && model.mesh->enabled && model.mesh->find(name) != nullptr) {
        const MeshAdapter& ad = *model.mesh->find(name);
        Tensor2 delta = matmul(model.mesh->params.at(ad.b_name()).value, model.mesh->params.at(ad.a_name()).value);
        return add(w0, delta);
    }
    return w0;
}

Tensor2 assemble_xt(const DenoiserConfig& cfg, const Tensor2& x_t, const std::vector<int>& ts) {
    require(x_t.cols() == cfg.data_dim, ErrorKind::shape, "x_t dimension does not match the model");
    require(ts.size() == x_t.rows(), ErrorKind::shape, "one timestep per row required");
    Tensor2 temb = sinusoidal_time_embedding(ts, cfg.time_dim);
    Tensor2 in(x_t.rows(), cfg.data_dim + cfg.time_dim);
    for (std::size_t i = 0; i < x_t.rows(); ++i) {
        double* row = in.row_ptr(i);
        std::copy(x_t.row_ptr(i), x_t.row_ptr(i) + x_t.cols(), row);
        std::copy(temb.row_ptr(i), temb.row_ptr(i) + temb.cols(), row + x_t.cols());
    }
    return in;
}

} // namespace

FrozenDenoiser freeze(const NoisePredictor& model) {
    require(model.cfg.hidden.size() == 2, ErrorKind::config, "frozen denoiser supports two hidden layers");
    FrozenDenoiser f;
    f.cfg = model.cfg;
    f.n_concepts = model.n_concepts;
    f.embed = effective_weight(model, "embed");
    f.w_xt = effective_weight(model, "w_xt");
    f.c_proj = effective_weight(model, "c_proj");
    f.b1 = model.base.at("b1").value;
    f.w2 = effective_weight(model, "w2");
    f.b2 = model.base.at("b2").value;
    f.w3 = effective_weight(model, "w3");
    f.b3 = model.base.at("b3").value;
    return f;
}

Tensor2 FrozenDenoiser::predict(const Tensor2& x_t, const std::vector<int>& concept_ids,
                                const std::vector<int>& ts) const {
    require(concept_ids.size() == x_t.rows(), ErrorKind::shape, "one concept per row required");
    const auto& k = kernels::active();
    Tensor2 h1 = matmul(assemble_xt(cfg, x_t, ts), w_xt);
    Tensor2 cemb(x_t.rows(), cfg.concept_dim);
    for (std::size_t i = 0; i < x_t.rows(); ++i) {
        const std::size_t erow = concept_row(concept_ids[i]);
        std::copy(embed.row_ptr(erow), embed.row_ptr(erow) + embed.cols(), cemb.row_ptr(i));
    }
    Tensor2 hc = matmul(cemb, c_proj);
    k.add(h1.data(), hc.data(), h1.data(), h1.size());
    k.add_bias_rows(h1.data(), b1.data(), h1.rows(), h1.cols());
    for (double& v : h1.raw()) v = std::tanh(v);
    Tensor2 h2 = matmul(h1, w2);
    k.add_bias_rows(h2.data(), b2.data(), h2.rows(), h2.cols());
    for (double& v : h2.raw()) v = std::tanh(v);
    Tensor2 out = matmul(h2, w3);
    k.add_bias_rows(out.data(), b3.data(), out.rows(), out.cols());
    return out;
}

Tensor2 FrozenDenoiser::predict_single_concept(const Tensor2& x_t, int concept_id, int t) const {
    return predict(x_t, std::vector<int>(x_t.rows(), concept_id), std::vector<int>(x_t.rows(), t));
}

Tensor2 forward_noise(const NoiseSchedule& schedule, const Tensor2& x0, std::size_t t, const Tensor2& eps) {
    require(t >= 1 && t <= schedule.steps, ErrorKind::contract,
            "timestep " + std::to_string(t) + " outside [1, T]");
    require_same_shape(x0, eps, "forward_noise");
    const double abar = schedule.alpha_bar_at(t);
    Tensor2 out = scaled(std::sqrt(abar), x0);
    kernels::active().axpy(std::sqrt(1.0 - abar), eps.data(), out.data(), out.size());
    return out;
}

Tensor2 predict_noise(const NoisePredictor& model, const Tensor2& x_t, int concept_id, int t) {
    return freeze(model).predict_single_concept(x_t, concept_id, t);
}

GradTape::Value denoiser_forward_on_tape(GradTape& tape, const NoisePredictor& model, const Tensor2& x_t,
                                         const std::vector<int>& concept_ids, const std::vector<int>& ts,
                                         TrainTarget target) {
    require(model.cfg.hidden.size() == 2, ErrorKind::config, "tape forward supports two hidden layers");
    require(concept_ids.size() == x_t.rows() && ts.size() == x_t.rows(), ErrorKind::shape,
            "one concept and one timestep per row required");

    auto weight = [&](const std::string& name) -> GradTape::Value {
        if (target == TrainTarget::base_params) {
            return tape.param(model.base.at(name));
        }
        // Mesh training: base enters as a constant, adapters as parameters.
        GradTape::Value w0 = tape.constant(model.base.at(name).value);
        if (model.mesh && model.mesh->enabled && model.mesh->find(name) != nullptr) {
            const MeshAdapter& ad = *model.mesh->find(name);
            auto delta = tape.matmul(tape.param(model.mesh->params.at(ad.b_name())),
                                     tape.param(model.mesh->params.at(ad.a_name())));
            return tape.add(w0, delta);
        }
        return w0;
    };
    auto bias = [&](const std::string& name) -> GradTape::Value {
        if (target == TrainTarget::base_params) {
            return tape.param(model.base.at(name));
        }
        return tape.constant(model.base.at(name).value);
    };

    std::vector<std::size_t> rows(concept_ids.size());
    for (std::size_t i = 0; i < concept_ids.size(); ++i) rows[i] = model.concept_row(concept_ids[i]);

    auto xt = tape.constant(assemble_xt(model.cfg, x_t, ts));
    auto cemb = tape.embed_rows(weight("embed"), rows);
    auto pre1 = tape.add(tape.matmul(xt, weight("w_xt")), tape.matmul(cemb, weight("c_proj")));
    auto h1 = tape.tanh(tape.add_bias_rows(pre1, bias("b1")));
    auto h2 = tape.tanh(tape.add_bias_rows(tape.matmul(h1, weight("w2")), bias("b2")));
    return tape.add_bias_rows(tape.matmul(h2, weight("w3")), bias("b3"));
}

std::vector<double> train_base(NoisePredictor& model, const ConceptWorld& world, const NoiseSchedule& schedule,
                               const BaseTrainConfig& cfg) {
    require(cfg.steps >= 1, ErrorKind::config, "train_base: steps must be at least 1");
    require(cfg.batch >= 1, ErrorKind::config, "train_base: batch must be at least 1");
    require(world.concepts.size() == model.n_concepts, ErrorKind::contract,
            "model concept count does not match the world");

    AdamW opt(AdamW::Config{cfg.lr, 0.9, 0.999, 1e-8, 0.0});
    Rng rng = Rng(cfg.seed).fork(0x62617365ULL);
    std::vector<double> trace;
    trace.reserve(cfg.steps);

    for (int step = 0; step < cfg.steps; ++step) {
        if (cfg.steps > 1) {
            const double lr_final = std::min(cfg.lr, cfg.lr_final);
            const double u = static_cast<double>(step) / static_cast<double>(cfg.steps - 1);
            opt.set_lr(lr_final + 0.5 * (cfg.lr - lr_final) * (1.0 + std::cos(3.14159265358979323846 * u)));
        }
        Rng srng = rng.fork(static_cast<std::uint64_t>(step));
        Dataset batch = sample_mixture(world, cfg.batch, srng.next_u64());
        const bool null_batch = srng.uniform() < cfg.null_fraction;

        std::vector<int> concepts(cfg.batch);
        std::vector<int> ts(cfg.batch);
        Tensor2 z(cfg.batch, world.dimension);
        Tensor2 eps(cfg.batch, world.dimension);
        for (int i = 0; i < cfg.batch; ++i) {
            concepts[i] = null_batch ? kNullConcept : batch.labels[i];
            ts[i] = 1 + static_cast<int>(srng.below(schedule.steps));
            const double abar = schedule.alpha_bar_at(static_cast<std::size_t>(ts[i]));
            for (std::size_t j = 0; j < world.dimension; ++j) {
                const double e = srng.normal();
                eps(i, j) = e;
                z(i, j) = std::sqrt(abar) * batch.points(i, j) + std::sqrt(1.0 - abar) * e;
            }
        }

        GradTape tape;
        auto pred = denoiser_forward_on_tape(tape, model, z, concepts, ts, TrainTarget::base_params);
        auto diff = tape.sub(pred, tape.constant(eps));
        auto loss = tape.scale(tape.sumsq(diff), 1.0 / cfg.batch);
        const double loss_value = tape.scalar(loss);
        if (!std::isfinite(loss_value)) {
            throw_error(ErrorKind::training_failure, "base training diverged at step " + std::to_string(step));
        }
        trace.push_back(loss_value);
        opt.step(model.base, tape.backward(loss));
    }
    return trace;
}

Tensor2 sample_model(const FrozenDenoiser& model, const NoiseSchedule& schedule, int concept_id,
                     std::size_t count, std::uint64_t seed) {
    require(count >= 1, ErrorKind::contract, "sample count must be at least 1");
    Rng rng = Rng(seed).fork(0x73616d70ULL ^ static_cast<std::uint64_t>(concept_id + 2));

    const std::size_t n = model.cfg.data_dim;
    Tensor2 x(count, n);
    for (double& v : x.raw()) v = rng.normal();

    for (std::size_t t = schedule.steps; t >= 1; --t) {
        const Tensor2 eps_hat = model.predict_single_concept(x, concept_id, static_cast<int>(t));
        const double beta = schedule.beta_at(t);
        const double abar = schedule.alpha_bar_at(t);
        const double abar_prev = schedule.alpha_bar_at(t - 1);
        const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
        const double eps_coef = beta / std::sqrt(1.0 - abar);
        const double sigma = t > 1 ? std::sqrt((1.0 - abar_prev) / (1.0 - abar) * beta) : 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double v = inv_sqrt_alpha * (x(i, j) - eps_coef * eps_hat(i, j));
                if (t > 1) v += sigma * rng.normal();
                x(i, j) = v;
            }
        }
    }
    require(x.all_finite(), ErrorKind::training_failure, "sampling produced non-finite values");
    return x;
}

} // namespace fadelab
