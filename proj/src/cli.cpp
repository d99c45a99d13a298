#include "fadelab/cli.hpp"

#include "fadelab/evaluation.hpp"
#include "fadelab/io.hpp"
#include "fadelab/kernels.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fadelab {

namespace fs = std::filesystem;

json default_config() {
    return json{
        {"target", 0},
        {"world",
         {{"families", 4},
          {"concepts_per_family", 6},
          {"dimension", 2},
          {"seed", 1},
          {"radius", 1.6},
          {"concept_spacing_deg", 6.0},
          {"sigma", 0.035},
          {"adjacency_k", 5},
          {"export_samples_per_concept", 0}}},
        {"schedule", {{"steps", 100}, {"beta_min", 1e-4}, {"beta_max", 0.02}}},
        {"model", {{"time_dim", 8}, {"concept_dim", 8}, {"hidden", {128, 128}}}},
        {"train_base",
         {{"steps", 3000}, {"batch", 64}, {"lr", 6e-3}, {"lr_final", 2e-5}, {"null_fraction", 0.1}, {"seed", 3}}},
        {"neighborhood",
         {{"embedder", "classifier-penultimate"},
          {"k", 5},
          {"m_per_concept", 256},
          {"seed", 9},
          {"source", "world"},
          {"classifier",
           {{"hidden", 64}, {"steps", 60}, {"lr", 0.01}, {"weight_decay", 0.05}, {"samples_per_concept", 96}}}}},
        {"fade",
         {{"lambda_er", 3.0},
          {"lambda_adj", 1000.0},
          {"lambda_guid", 50.0},
          {"delta", 1.0},
          {"iterations", 500},
          {"batch", 4},
          {"lr", 1.5e-2},
          {"weight_decay", 0.0},
          {"rank", 4},
          {"mesh_targets", {"embed", "c_proj"}},
          {"use_er", true},
          {"use_adj", true},
          {"use_guid", true},
          {"seed", 5}}},
        {"evaluate", {{"n_samples", 500}, {"eta", 1e-8}, {"seed", 7}}},
        {"inflect", {{"buckets", 5}, {"n_samples", 500}, {"seed", 13}, {"model", "unlearned"}}},
        {"ablate", {{"seeds", {101, 202, 303}}}},
        {"theorem1", {{"n_grid", {100, 1000, 10000}}, {"trials", 10}, {"queries", 256}, {"seed", 11}}},
        {"paths",
         {{"world", "world.json"},
          {"base_model", "base_model.json"},
          {"adapter", "adapter.json"},
          {"adjacency", "adjacency.csv"}}},
    };
}

namespace {

void merge_config(json& base, const json& overlay, const std::string& prefix) {
    for (const auto& [key, value] : overlay.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        require(base.contains(key), ErrorKind::schema, "unknown configuration key '" + path + "'");
        if (value.is_object() && base[key].is_object()) {
            merge_config(base[key], value, path);
        } else {
            require(!base[key].is_object(), ErrorKind::schema,
                    "configuration key '" + path + "' must be an object");
            base[key] = value;
        }
    }
}

void apply_set_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos, ErrorKind::schema,
            "--set expects key=value, got '" + assignment + "'");
    const std::string key_path = assignment.substr(0, eq);
    const std::string value_text = assignment.substr(eq + 1);

    json* node = &config;
    std::string walked;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key_path.find('.', start);
        const std::string key = key_path.substr(start, dot == std::string::npos ? dot : dot - start);
        walked = walked.empty() ? key : walked + "." + key;
        require(node->contains(key), ErrorKind::schema, "unknown configuration key '" + walked + "'");
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    require(!node->is_object(), ErrorKind::schema, "configuration key '" + walked + "' must be a leaf");

    json parsed = json::parse(value_text, nullptr, false);
    if (parsed.is_discarded()) {
        parsed = value_text; // plain string value
    }
    *node = std::move(parsed);
}

struct RunContext {
    std::string subcommand;
    json config;
    fs::path outdir;
    std::uint64_t effective_seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs; // (path, checksum hex)
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    fs::path resolve(const std::string& path) const {
        fs::path p(path);
        return p.is_absolute() ? p : outdir / p;
    }

    json load_input(const std::string& path_key) {
        const fs::path path = resolve(config.at("paths").at(path_key).get<std::string>());
        require(fs::exists(path), ErrorKind::input,
                "missing input file '" + path.string() + "' (paths." + path_key + ")");
        inputs.emplace_back(path.string(), hex64(file_checksum(path)));
        return load_json_file(path);
    }

    void note_input(const fs::path& path) { inputs.emplace_back(path.string(), hex64(file_checksum(path))); }

    fs::path out_file(const std::string& name) {
        outputs.push_back(name);
        return outdir / name;
    }

    void write_manifest() {
        json manifest;
        manifest["format_version"] = 1;
        manifest["subcommand"] = subcommand;
        manifest["config"] = config;
        manifest["seed"] = effective_seed;
        manifest["kernel_backend"] = kernels::active().name;
        json inputs_doc = json::array();
        for (const auto& [path, checksum] : inputs) {
            inputs_doc.push_back({{"path", path}, {"checksum", checksum}});
        }
        manifest["inputs"] = std::move(inputs_doc);
        manifest["outputs"] = outputs;
        {
            // run id: content hash of what determines the outputs
            json ident{{"subcommand", subcommand}, {"config", config}, {"seed", effective_seed}};
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (unsigned char c : ident.dump()) {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            manifest["run_id"] = hex64(h);
        }
        manifest["wall_clock_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        write_json_file(outdir / (subcommand + "_manifest.json"), manifest);
    }
};

NoiseSchedule schedule_from_config(const json& cfg) {
    return NoiseSchedule::linear(cfg.at("schedule").at("steps").get<std::size_t>(),
                                 cfg.at("schedule").at("beta_min").get<double>(),
                                 cfg.at("schedule").at("beta_max").get<double>());
}

WorldConfig world_config_from_json(const json& cfg) {
    const json& w = cfg.at("world");
    WorldConfig wc;
    wc.families = w.at("families").get<int>();
    wc.concepts_per_family = w.at("concepts_per_family").get<int>();
    wc.dimension = w.at("dimension").get<std::size_t>();
    wc.seed = w.at("seed").get<std::uint64_t>();
    wc.radius = w.at("radius").get<double>();
    wc.concept_spacing_deg = w.at("concept_spacing_deg").get<double>();
    wc.sigma = w.at("sigma").get<double>();
    wc.adjacency_k = w.at("adjacency_k").get<int>();
    return wc;
}

FadeConfig fade_config_from_json(const json& cfg, const std::vector<int>& adjacency) {
    const json& f = cfg.at("fade");
    FadeConfig fc;
    fc.c_tar = cfg.at("target").get<int>();
    fc.adjacency = adjacency;
    fc.lambda_er = f.at("lambda_er").get<double>();
    fc.lambda_adj = f.at("lambda_adj").get<double>();
    fc.lambda_guid = f.at("lambda_guid").get<double>();
    fc.delta = f.at("delta").get<double>();
    fc.iterations = f.at("iterations").get<int>();
    fc.batch = f.at("batch").get<int>();
    fc.lr = f.at("lr").get<double>();
    fc.weight_decay = f.at("weight_decay").get<double>();
    fc.rank = f.at("rank").get<int>();
    fc.mesh_targets = f.at("mesh_targets").get<std::vector<std::string>>();
    fc.use_er = f.at("use_er").get<bool>();
    fc.use_adj = f.at("use_adj").get<bool>();
    fc.use_guid = f.at("use_guid").get<bool>();
    fc.seed = f.at("seed").get<std::uint64_t>();
    return fc;
}

std::vector<std::pair<int, double>> load_adjacency_csv(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::input, "cannot open adjacency file '" + path.string() + "'");
    std::vector<std::pair<int, double>> out;
    std::string line;
    std::getline(in, line);
    require(line == "rank,concept_id,similarity", ErrorKind::schema,
            "adjacency file '" + path.string() + "' has unexpected header '" + line + "'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        require(c1 != std::string::npos && c2 != std::string::npos, ErrorKind::schema,
                "malformed adjacency row '" + line + "'");
        out.emplace_back(std::stoi(line.substr(c1 + 1, c2 - c1 - 1)), std::stod(line.substr(c2 + 1)));
    }
    require(!out.empty(), ErrorKind::schema, "adjacency file '" + path.string() + "' has no rows");
    return out;
}

Embedder embedder_from_config(const json& cfg, const ConceptWorld& world, std::uint64_t seed) {
    const std::string kind = cfg.at("neighborhood").at("embedder").get<std::string>();
    if (kind == "raw-identity") {
        return make_identity_embedder(world.dimension);
    }
    require(kind == "classifier-penultimate", ErrorKind::schema,
            "neighborhood.embedder must be 'raw-identity' or 'classifier-penultimate', got '" + kind + "'");
    const json& c = cfg.at("neighborhood").at("classifier");
    EmbedderTrainConfig tc;
    tc.hidden = c.at("hidden").get<int>();
    tc.steps = c.at("steps").get<int>();
    tc.lr = c.at("lr").get<double>();
    tc.weight_decay = c.at("weight_decay").get<double>();
    tc.samples_per_concept = c.at("samples_per_concept").get<std::size_t>();
    return train_classifier_embedder(world, tc, seed);
}

// ---------------------------------------------------------------------------
// subcommands

void cmd_world(RunContext& ctx) {
    ctx.effective_seed = ctx.config.at("world").at("seed").get<std::uint64_t>();
    const ConceptWorld world = build_world(world_config_from_json(ctx.config));
    write_json_file(ctx.out_file("world.json"), world_to_json(world));

    const auto m = ctx.config.at("world").at("export_samples_per_concept").get<std::size_t>();
    if (m > 0) {
        std::string header = "concept_id";
        for (std::size_t j = 0; j < world.dimension; ++j) header += ",x_" + std::to_string(j);
        std::vector<std::vector<std::string>> rows;
        Rng rng = Rng(ctx.effective_seed).fork(0x65787073ULL);
        for (const auto& spec : world.concepts) {
            Tensor2 pts = sample_concept(world, spec.concept_id, m,
                                         rng.fork(static_cast<std::uint64_t>(spec.concept_id)).next_u64());
            for (std::size_t i = 0; i < pts.rows(); ++i) {
                std::vector<std::string> row{std::to_string(spec.concept_id)};
                for (std::size_t j = 0; j < pts.cols(); ++j) row.push_back(format_real(pts(i, j)));
                rows.push_back(std::move(row));
            }
        }
        write_csv(ctx.out_file("dataset.csv"), header, rows);
    }
}

void cmd_train_base(RunContext& ctx) {
    const json& tb = ctx.config.at("train_base");
    ctx.effective_seed = tb.at("seed").get<std::uint64_t>();
    const ConceptWorld world = world_from_json(ctx.load_input("world"));
    const NoiseSchedule schedule = schedule_from_config(ctx.config);

    DenoiserConfig dc;
    dc.data_dim = world.dimension;
    dc.time_dim = ctx.config.at("model").at("time_dim").get<std::size_t>();
    dc.concept_dim = ctx.config.at("model").at("concept_dim").get<std::size_t>();
    dc.hidden = ctx.config.at("model").at("hidden").get<std::vector<std::size_t>>();

    NoisePredictor model = make_denoiser(dc, world.concepts.size(), ctx.effective_seed);
    BaseTrainConfig cfg;
    cfg.steps = tb.at("steps").get<int>();
    cfg.batch = tb.at("batch").get<int>();
    cfg.lr = tb.at("lr").get<double>();
    cfg.lr_final = tb.at("lr_final").get<double>();
    cfg.null_fraction = tb.at("null_fraction").get<double>();
    cfg.seed = ctx.effective_seed;
    const std::vector<double> trace = train_base(model, world, schedule, cfg);

    write_json_file(ctx.out_file("base_model.json"), checkpoint_to_json(model, schedule));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        rows.push_back({std::to_string(i), format_real(trace[i])});
    }
    write_csv(ctx.out_file("base_loss.csv"), "step,loss", rows);
}

void cmd_neighborhood(RunContext& ctx) {
    const json& nb = ctx.config.at("neighborhood");
    ctx.effective_seed = nb.at("seed").get<std::uint64_t>();
    const ConceptWorld world = world_from_json(ctx.load_input("world"));
    const int c_tar = ctx.config.at("target").get<int>();
    const int k = nb.at("k").get<int>();
    const std::size_t m = nb.at("m_per_concept").get<std::size_t>();

    const Embedder embedder = embedder_from_config(ctx.config, world, ctx.effective_seed);

    std::map<int, Tensor2> table;
    const std::string source = nb.at("source").get<std::string>();
    if (source == "world") {
        table = concept_mean_embeddings(world, embedder, m, ctx.effective_seed);
    } else {
        require(source == "model", ErrorKind::schema,
                "neighborhood.source must be 'world' or 'model', got '" + source + "'");
        auto [model, schedule] = checkpoint_from_json(ctx.load_input("base_model"));
        const FrozenDenoiser frozen = freeze(model);
        Rng rng = Rng(ctx.effective_seed).fork(0x67656e65ULL);
        for (const auto& spec : world.concepts) {
            Tensor2 generated = sample_model(frozen, schedule, spec.concept_id, m,
                                             rng.fork(static_cast<std::uint64_t>(spec.concept_id)).next_u64());
            table.emplace(spec.concept_id, mean_embedding(embedder, generated));
        }
    }

    const AdjacencySet adj = build_adjacency(table, c_tar, k);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < adj.neighbors.size(); ++i) {
        rows.push_back({std::to_string(i + 1), std::to_string(adj.neighbors[i].first),
                        format_real(adj.neighbors[i].second)});
    }
    write_csv(ctx.out_file("adjacency.csv"), "rank,concept_id,similarity", rows);

    // Full similarity table over every non-target concept.
    const AdjacencySet full = build_adjacency(table, c_tar, static_cast<int>(table.size()) - 1);
    rows.clear();
    for (std::size_t i = 0; i < full.neighbors.size(); ++i) {
        rows.push_back({std::to_string(i + 1), std::to_string(full.neighbors[i].first),
                        format_real(full.neighbors[i].second)});
    }
    write_csv(ctx.out_file("similarity_table.csv"), "rank,concept_id,similarity", rows);
}

void cmd_unlearn(RunContext& ctx) {
    ctx.effective_seed = ctx.config.at("fade").at("seed").get<std::uint64_t>();
    const ConceptWorld world = world_from_json(ctx.load_input("world"));
    auto [model, schedule] = checkpoint_from_json(ctx.load_input("base_model"));

    const fs::path adj_path = ctx.resolve(ctx.config.at("paths").at("adjacency").get<std::string>());
    require(fs::exists(adj_path), ErrorKind::input,
            "missing adjacency file '" + adj_path.string() + "'; run the neighborhood subcommand first");
    ctx.note_input(adj_path);
    std::vector<int> adjacency;
    for (const auto& [id, sim] : load_adjacency_csv(adj_path)) adjacency.push_back(id);

    FadeConfig cfg = fade_config_from_json(ctx.config, adjacency);
    cfg.seed = ctx.effective_seed;
    UnlearnResult result = unlearn(model, world, schedule, cfg);

    write_json_file(ctx.out_file("adapter.json"), adapter_to_json(result.model));
    std::vector<std::vector<std::string>> rows;
    for (const auto& b : result.trace) {
        rows.push_back({std::to_string(b.iteration), format_real(b.l_er), format_real(b.l_guid),
                        format_real(b.l_adj), format_real(b.l_total)});
    }
    write_csv(ctx.out_file("unlearn_loss.csv"), "iteration,l_er,l_guid,l_adj,l_total", rows);
}

void cmd_evaluate(RunContext& ctx) {
    const json& ev = ctx.config.at("evaluate");
    ctx.effective_seed = ev.at("seed").get<std::uint64_t>();
    const ConceptWorld world = world_from_json(ctx.load_input("world"));
    auto [base_model, schedule] = checkpoint_from_json(ctx.load_input("base_model"));

    const fs::path adj_path = ctx.resolve(ctx.config.at("paths").at("adjacency").get<std::string>());
    require(fs::exists(adj_path), ErrorKind::input,
            "missing adjacency file '" + adj_path.string() + "'; run the neighborhood subcommand first");
    ctx.note_input(adj_path);
    AdjacencySet adj;
    adj.target = ctx.config.at("target").get<int>();
    adj.neighbors = load_adjacency_csv(adj_path);
    adj.k = static_cast<int>(adj.neighbors.size());

    // Without an adapter file this evaluates identity "unlearning".
    NoisePredictor unlearned = base_model;
    const fs::path adapter_path = ctx.resolve(ctx.config.at("paths").at("adapter").get<std::string>());
    if (fs::exists(adapter_path)) {
        ctx.note_input(adapter_path);
        adapter_apply_from_json(unlearned, load_json_file(adapter_path));
    }

    std::vector<int> retain;
    for (const auto& spec : world.concepts) {
        if (spec.concept_id == adj.target || adj.contains(spec.concept_id)) continue;
        retain.push_back(spec.concept_id);
    }

    EvalConfig cfg;
    cfg.n_samples = ev.at("n_samples").get<std::size_t>();
    cfg.eta = ev.at("eta").get<double>();
    cfg.seed = ctx.effective_seed;
    const ErbReport rep = evaluate_models(model_sampler(freeze(base_model), schedule),
                                          model_sampler(freeze(unlearned), schedule), world, adj, retain, cfg);

    json doc;
    doc["a_er"] = rep.a_er;
    doc["a_adj_mean"] = rep.a_adj_mean;
    doc["erb"] = rep.erb_score;
    doc["base_a_er"] = rep.base_a_er;
    doc["base_a_adj_mean"] = rep.base_a_adj_mean;
    doc["base_erb"] = rep.base_erb_score;
    doc["retain_mean"] = rep.retain_mean;
    doc["base_retain_mean"] = rep.base_retain_mean;
    doc["eta"] = rep.eta;
    doc["n_samples"] = rep.n_samples;
    doc["seed"] = rep.seed;
    doc["config_hash"] = rep.config_hash;
    json per_neighbor = json::array();
    for (const auto& [id, acc] : rep.per_neighbor_acc) {
        per_neighbor.push_back({{"concept_id", id}, {"accuracy", acc}});
    }
    doc["per_neighbor"] = std::move(per_neighbor);
    write_json_file(ctx.out_file("erb_report.json"), doc);

    std::vector<std::vector<std::string>> rows{
        {"a_er", format_real(rep.a_er)},
        {"a_adj_mean", format_real(rep.a_adj_mean)},
        {"erb", format_real(rep.erb_score)},
        {"base_a_er", format_real(rep.base_a_er)},
        {"base_a_adj_mean", format_real(rep.base_a_adj_mean)},
        {"base_erb", format_real(rep.base_erb_score)},
        {"retain_mean", format_real(rep.retain_mean)},
        {"base_retain_mean", format_real(rep.base_retain_mean)},
    };
    write_csv(ctx.out_file("erb_report.csv"), "metric,value", rows);

    rows.clear();
    for (std::size_t i = 0; i < rep.per_neighbor_acc.size(); ++i) {
        rows.push_back({std::to_string(rep.per_neighbor_acc[i].first),
                        format_real(rep.per_neighbor_acc[i].second),
                        format_real(rep.base_per_neighbor_acc[i].second)});
    }
    write_csv(ctx.out_file("adjacency_accuracy.csv"), "concept_id,accuracy,base_accuracy", rows);

    rows.clear();
    for (std::size_t i = 0; i < rep.retain_acc.size(); ++i) {
        rows.push_back({std::to_string(rep.retain_acc[i].first), format_real(rep.retain_acc[i].second),
                        format_real(rep.base_retain_acc[i].second)});
    }
    write_csv(ctx.out_file("retain_accuracy.csv"), "concept_id,accuracy,base_accuracy", rows);
}

void cmd_inflect(RunContext& ctx) {
    const json& inf = ctx.config.at("inflect");
    ctx.effective_seed = inf.at("seed").get<std::uint64_t>();
    const ConceptWorld world = world_from_json(ctx.load_input("world"));
    auto [base_model, schedule] = checkpoint_from_json(ctx.load_input("base_model"));
    const int c_tar = ctx.config.at("target").get<int>();

    NoisePredictor model = base_model;
    std::string tag = inf.at("model").get<std::string>();
    if (tag == "unlearned") {
        const fs::path adapter_path = ctx.resolve(ctx.config.at("paths").at("adapter").get<std::string>());
        require(fs::exists(adapter_path), ErrorKind::input,
                "missing adapter file '" + adapter_path.string() + "'; run the unlearn subcommand first");
        ctx.note_input(adapter_path);
        adapter_apply_from_json(model, load_json_file(adapter_path));
    } else {
        require(tag == "base", ErrorKind::schema, "inflect.model must be 'base' or 'unlearned'");
    }

    const InflectionCurve curve = inflection_sweep(model_sampler(freeze(model), schedule), world, c_tar,
                                                   inf.at("buckets").get<std::size_t>(),
                                                   inf.at("n_samples").get<std::size_t>(),
                                                   ctx.effective_seed, tag);

    std::vector<std::vector<std::string>> rows;
    json buckets = json::array();
    for (const auto& b : curve.buckets) {
        buckets.push_back({{"sim_low", b.sim_low},
                           {"sim_high", b.sim_high},
                           {"mean_accuracy", b.mean_accuracy},
                           {"concepts", b.concepts},
                           {"skipped", b.skipped}});
        if (b.skipped) continue;
        rows.push_back({format_real(b.sim_low), format_real(b.sim_high), format_real(b.mean_accuracy)});
    }
    write_csv(ctx.out_file("inflection.csv"), "bucket_low,bucket_high,mean_accuracy", rows);
    write_json_file(ctx.out_file("inflection.json"), json{{"model", tag}, {"buckets", buckets}});
}

void cmd_ablate(RunContext& ctx) {
    ctx.effective_seed = ctx.config.at("fade").at("seed").get<std::uint64_t>();
    const ConceptWorld world = world_from_json(ctx.load_input("world"));
    auto [base_model, schedule] = checkpoint_from_json(ctx.load_input("base_model"));

    const fs::path adj_path = ctx.resolve(ctx.config.at("paths").at("adjacency").get<std::string>());
    require(fs::exists(adj_path), ErrorKind::input,
            "missing adjacency file '" + adj_path.string() + "'; run the neighborhood subcommand first");
    ctx.note_input(adj_path);
    std::vector<int> adjacency;
    for (const auto& [id, sim] : load_adjacency_csv(adj_path)) adjacency.push_back(id);

    const FadeConfig cfg = fade_config_from_json(ctx.config, adjacency);
    std::vector<std::uint64_t> seeds;
    for (const auto& s : ctx.config.at("ablate").at("seeds")) seeds.push_back(s.get<std::uint64_t>());

    EvalConfig ecfg;
    ecfg.n_samples = ctx.config.at("evaluate").at("n_samples").get<std::size_t>();
    ecfg.eta = ctx.config.at("evaluate").at("eta").get<double>();

    const auto rows = ablation_run(base_model, world, schedule, cfg, seeds, ecfg);
    std::vector<std::vector<std::string>> csv_rows;
    for (const auto& r : rows) {
        csv_rows.push_back({r.use_guid ? "1" : "0", r.use_er ? "1" : "0", r.use_adj ? "1" : "0",
                            format_real(r.mean_a_er), format_real(r.mean_a_adj), format_real(r.mean_erb)});
    }
    write_csv(ctx.out_file("ablation.csv"), "guid,er,adj,a_er,a_adj,erb", csv_rows);
}

void cmd_theorem1(RunContext& ctx) {
    const json& th = ctx.config.at("theorem1");
    ctx.effective_seed = th.at("seed").get<std::uint64_t>();
    const ConceptWorld world = world_from_json(ctx.load_input("world"));

    Theorem1Config cfg;
    cfg.n_grid = th.at("n_grid").get<std::vector<std::size_t>>();
    cfg.trials = th.at("trials").get<std::size_t>();
    cfg.queries = th.at("queries").get<std::size_t>();
    cfg.seed = ctx.effective_seed;

    const auto curve = theorem1_sweep(world, cfg);
    std::vector<std::vector<std::string>> rows;
    for (const auto& pt : curve) {
        rows.push_back({std::to_string(pt.n_samples), format_real(pt.mean_agreement),
                        format_real(pt.stderr_agreement)});
    }
    write_csv(ctx.out_file("agreement.csv"), "N,mean_agreement,stderr", rows);
}

void seed_override_for(json& config, const std::string& subcommand, std::uint64_t seed) {
    if (subcommand == "world") {
        config["world"]["seed"] = seed;
    } else if (subcommand == "train-base") {
        config["train_base"]["seed"] = seed;
    } else if (subcommand == "neighborhood") {
        config["neighborhood"]["seed"] = seed;
    } else if (subcommand == "unlearn" || subcommand == "ablate") {
        config["fade"]["seed"] = seed;
        if (subcommand == "ablate") config["ablate"]["seeds"] = {seed};
    } else if (subcommand == "evaluate") {
        config["evaluate"]["seed"] = seed;
    } else if (subcommand == "inflect") {
        config["inflect"]["seed"] = seed;
    } else if (subcommand == "theorem1") {
        config["theorem1"]["seed"] = seed;
    }
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"fade-lab: adjacency-aware concept unlearning laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string manifest_path;
    std::string out_path;
    std::vector<std::string> set_overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;

    struct Command {
        std::string name;
        std::string help;
        void (*fn)(RunContext&);
    };
    const std::vector<Command> commands{
        {"world", "build and serialize a concept world", cmd_world},
        {"train-base", "train and checkpoint the base diffusion model", cmd_train_base},
        {"neighborhood", "build the adjacency set and similarity table", cmd_neighborhood},
        {"unlearn", "run FADE unlearning and save the mesh adapters", cmd_unlearn},
        {"evaluate", "score erasure, adjacency, ERB, and retain accuracy", cmd_evaluate},
        {"inflect", "accuracy-vs-similarity bucket sweep", cmd_inflect},
        {"ablate", "six-row loss-component ablation table", cmd_ablate},
        {"theorem1", "k-NN vs naive Bayes agreement curve", cmd_theorem1},
    };

    std::vector<CLI::App*> subs;
    for (const auto& cmd : commands) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", config_path, "configuration file (JSON)");
        sub->add_option("--from-manifest", manifest_path, "re-run with a previous run's config and seed");
        sub->add_option("--out", out_path, "output directory (default: $FADE_LAB_OUT or .)");
        sub->add_option("--seed", seed, "seed override for this subcommand")->each([&](const std::string&) {
            seed_given = true;
        });
        sub->add_option("--set", set_overrides, "override one configuration key, e.g. fade.rank=8");
        subs.push_back(sub);
    }

    std::vector<const char*> argv;
    argv.push_back("fade-lab");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunContext ctx;
        if (out_path.empty()) {
            const char* env = std::getenv("FADE_LAB_OUT");
            out_path = env != nullptr ? env : ".";
        }
        ctx.outdir = fs::path(out_path);
        fs::create_directories(ctx.outdir);

        ctx.config = default_config();
        if (!manifest_path.empty()) {
            require(config_path.empty(), ErrorKind::config, "--config and --from-manifest are exclusive");
            const json manifest = load_json_file(manifest_path);
            ctx.config = manifest.at("config");
            // A manifest rerun must see the same inputs it recorded.
            for (const auto& input : manifest.at("inputs")) {
                const fs::path path = input.at("path").get<std::string>();
                require(fs::exists(path), ErrorKind::input, "manifest input missing: '" + path.string() + "'");
                require(hex64(file_checksum(path)) == input.at("checksum").get<std::string>(),
                        ErrorKind::input, "manifest input changed: '" + path.string() + "'");
            }
        } else if (!config_path.empty()) {
            merge_config(ctx.config, load_json_file(config_path), "");
        }
        for (const auto& assignment : set_overrides) {
            apply_set_override(ctx.config, assignment);
        }
        // Pin input paths to absolute locations so a manifest re-run in a
        // different output directory still sees the same inputs.
        for (auto& [key, value] : ctx.config.at("paths").items()) {
            value = ctx.resolve(value.get<std::string>()).string();
        }

        for (std::size_t i = 0; i < commands.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            ctx.subcommand = commands[i].name;
            if (seed_given) seed_override_for(ctx.config, ctx.subcommand, seed);
            commands[i].fn(ctx);
            ctx.write_manifest();
            return 0;
        }
        return 1;
    } catch (const Error& e) {
        std::cerr << "fade-lab: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fade-lab: unexpected error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace fadelab
