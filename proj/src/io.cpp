#include "fadelab/io.hpp"

#include "fadelab/mesh.hpp"

#include <fstream>
#include <sstream>

namespace fadelab {

namespace fs = std::filesystem;

std::string format_real(double v) {
    // nlohmann emits the shortest decimal that round-trips the double.
    return json(v).dump();
}

void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::input, "cannot open '" + path.string() + "' for writing");
    out << header << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ",";
            out << row[i];
        }
        out << "\n";
    }
    require(out.good(), ErrorKind::input, "write to '" + path.string() + "' failed");
}

std::uint64_t file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::input, "cannot open '" + path.string() + "'");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::input, "cannot open '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw_error(ErrorKind::schema, "malformed JSON in '" + path.string() + "': " + e.what());
    }
    return doc;
}

void write_json_file(const fs::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::input, "cannot open '" + path.string() + "' for writing");
    out << doc.dump(2) << "\n";
    require(out.good(), ErrorKind::input, "write to '" + path.string() + "' failed");
}

// --- world ----------------------------------------------------------------

json world_to_json(const ConceptWorld& world) {
    json doc;
    doc["format_version"] = 1;
    doc["dimension"] = world.dimension;
    doc["layout"] = {
        {"families", world.config.families},
        {"concepts_per_family", world.config.concepts_per_family},
        {"seed", world.config.seed},
        {"radius", world.config.radius},
        {"concept_spacing_deg", world.config.concept_spacing_deg},
        {"sigma", world.config.sigma},
        {"adjacency_k", world.config.adjacency_k},
    };
    json concepts = json::array();
    for (const auto& c : world.concepts) {
        concepts.push_back({
            {"id", c.concept_id},
            {"family", c.family_id},
            {"mean", c.mean},
            {"cov", c.covariance},
            {"prior", c.prior},
        });
    }
    doc["concepts"] = std::move(concepts);
    return doc;
}

ConceptWorld world_from_json(const json& doc) {
    try {
        require(doc.at("format_version").get<int>() == 1, ErrorKind::schema, "unsupported world format version");
        WorldConfig cfg;
        const json& layout = doc.at("layout");
        cfg.families = layout.at("families").get<int>();
        cfg.concepts_per_family = layout.at("concepts_per_family").get<int>();
        cfg.dimension = doc.at("dimension").get<std::size_t>();
        cfg.seed = layout.at("seed").get<std::uint64_t>();
        cfg.radius = layout.at("radius").get<double>();
        cfg.concept_spacing_deg = layout.at("concept_spacing_deg").get<double>();
        cfg.sigma = layout.at("sigma").get<double>();
        cfg.adjacency_k = layout.at("adjacency_k").get<int>();

        std::vector<ConceptSpec> concepts;
        for (const auto& c : doc.at("concepts")) {
            ConceptSpec spec;
            spec.concept_id = c.at("id").get<int>();
            spec.family_id = c.at("family").get<int>();
            spec.mean = c.at("mean").get<std::vector<double>>();
            spec.covariance = c.at("cov").get<std::vector<double>>();
            spec.prior = c.at("prior").get<double>();
            concepts.push_back(std::move(spec));
        }
        return world_from_specs(cfg.dimension, std::move(concepts), cfg);
    } catch (const json::exception& e) {
        throw_error(ErrorKind::schema, std::string("world file: ") + e.what());
    }
}

// --- checkpoints ------------------------------------------------------------

namespace {

json tensor_to_json(const Tensor2& t) {
    return json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.raw()}};
}

Tensor2 tensor_from_json(const json& doc) {
    return Tensor2(doc.at("rows").get<std::size_t>(), doc.at("cols").get<std::size_t>(),
                   doc.at("data").get<std::vector<double>>());
}

json params_to_json(const ParamStore& store) {
    json out = json::object();
    for (const auto& p : store.items()) {
        out[p.name] = tensor_to_json(p.value);
    }
    return out;
}

} // namespace

json checkpoint_to_json(const NoisePredictor& model, const NoiseSchedule& schedule) {
    json doc;
    doc["format_version"] = 1;
    doc["schedule"] = {{"steps", schedule.steps}, {"beta", schedule.beta}};
    doc["model"] = {
        {"data_dim", model.cfg.data_dim},
        {"time_dim", model.cfg.time_dim},
        {"concept_dim", model.cfg.concept_dim},
        {"hidden", model.cfg.hidden},
        {"n_concepts", model.n_concepts},
    };
    doc["params"] = params_to_json(model.base);
    return doc;
}

std::pair<NoisePredictor, NoiseSchedule> checkpoint_from_json(const json& doc) {
    try {
        require(doc.at("format_version").get<int>() == 1, ErrorKind::schema,
                "unsupported checkpoint format version");
        NoiseSchedule schedule;
        schedule.steps = doc.at("schedule").at("steps").get<std::size_t>();
        schedule.beta = doc.at("schedule").at("beta").get<std::vector<double>>();
        schedule.alpha_bar.resize(schedule.beta.size());
        double prod = 1.0;
        for (std::size_t i = 0; i < schedule.beta.size(); ++i) {
            prod *= 1.0 - schedule.beta[i];
            schedule.alpha_bar[i] = prod;
        }
        schedule.validate();

        const json& m = doc.at("model");
        DenoiserConfig cfg;
        cfg.data_dim = m.at("data_dim").get<std::size_t>();
        cfg.time_dim = m.at("time_dim").get<std::size_t>();
        cfg.concept_dim = m.at("concept_dim").get<std::size_t>();
        cfg.hidden = m.at("hidden").get<std::vector<std::size_t>>();

        NoisePredictor model = make_denoiser(cfg, m.at("n_concepts").get<std::size_t>(), 0);
        for (auto& p : model.base.items()) {
            require(doc.at("params").contains(p.name), ErrorKind::schema,
                    "checkpoint missing parameter '" + p.name + "'");
            Tensor2 loaded = tensor_from_json(doc.at("params").at(p.name));
            require_same_shape(p.value, loaded, "checkpoint load");
            p.value = std::move(loaded);
        }
        return {std::move(model), std::move(schedule)};
    } catch (const json::exception& e) {
        throw_error(ErrorKind::schema, std::string("checkpoint file: ") + e.what());
    }
}

json adapter_to_json(const NoisePredictor& model) {
    require(model.mesh.has_value(), ErrorKind::contract, "model has no mesh adapters to save");
    json doc;
    doc["format_version"] = 1;
    doc["rank"] = model.mesh->rank;
    json targets = json::array();
    json checksums = json::object();
    for (const auto& ad : model.mesh->adapters) {
        targets.push_back(ad.target);
        checksums[ad.target] = hex64(model.mesh->base_checksums.at(ad.target));
    }
    doc["targets"] = std::move(targets);
    doc["base_checksums"] = std::move(checksums);
    doc["params"] = params_to_json(model.mesh->params);
    return doc;
}

void adapter_apply_from_json(NoisePredictor& model, const json& doc) {
    try {
        require(doc.at("format_version").get<int>() == 1, ErrorKind::schema,
                "unsupported adapter format version");
        const int rank = doc.at("rank").get<int>();
        const auto targets = doc.at("targets").get<std::vector<std::string>>();
        for (const auto& target : targets) {
            const std::uint64_t recorded = std::stoull(doc.at("base_checksums").at(target).get<std::string>(),
                                                       nullptr, 16);
            const std::uint64_t now = tensor_checksum(model.base.at(target).value);
            require(recorded == now, ErrorKind::integrity,
                    "adapter was trained against a different base: checksum mismatch on '" + target + "'");
        }
        attach_mesh(model, targets, rank, 0);
        for (auto& p : model.mesh->params.items()) {
            require(doc.at("params").contains(p.name), ErrorKind::schema,
                    "adapter missing parameter '" + p.name + "'");
            Tensor2 loaded = tensor_from_json(doc.at("params").at(p.name));
            require_same_shape(p.value, loaded, "adapter load");
            p.value = std::move(loaded);
        }
    } catch (const json::exception& e) {
        throw_error(ErrorKind::schema, std::string("adapter file: ") + e.what());
    }
}

} // namespace fadelab
