#include "fadelab/cli.hpp"
#include "fadelab/error.hpp"
#include "fadelab/io.hpp"
#include "fadelab/mesh.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fadelab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("fadelab_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Settings that keep pipeline runs fast; quality gates live in the
// acceptance suite, this exercises plumbing and determinism.
std::vector<std::string> fast(std::vector<std::string> args) {
    const std::vector<std::string> extra{
        "--set", "train_base.steps=120",
        "--set", "model.hidden=[16,16]",
        "--set", "neighborhood.m_per_concept=32",
        "--set", "neighborhood.classifier.steps=20",
        "--set", "fade.iterations=10",
        "--set", "evaluate.n_samples=100",
        "--set", "inflect.n_samples=100",
        "--set", "schedule.steps=20",
    };
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

} // namespace

TEST_CASE("world subcommand writes artifacts and a manifest, deterministically") {
    TempDir dir("world");
    REQUIRE(run_cli(fast({"world", "--out", dir.str()})) == 0);
    CHECK(fs::exists(dir.path / "world.json"));
    CHECK(fs::exists(dir.path / "world_manifest.json"));

    const json manifest = load_json_file(dir.path / "world_manifest.json");
    CHECK(manifest.at("subcommand") == "world");
    CHECK(manifest.at("outputs").size() >= 1);
    CHECK(manifest.contains("run_id"));
    CHECK(manifest.contains("kernel_backend"));

    const std::string first = slurp(dir.path / "world.json");
    TempDir dir2("world2");
    REQUIRE(run_cli(fast({"world", "--out", dir2.str()})) == 0);
    CHECK(slurp(dir2.path / "world.json") == first);

    SUBCASE("dataset export carries the documented header") {
        TempDir dir3("world3");
        REQUIRE(run_cli({"world", "--out", dir3.str(), "--set",
                         "world.export_samples_per_concept=2"}) == 0);
        std::ifstream in(dir3.path / "dataset.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "concept_id,x_0,x_1");
    }
}

TEST_CASE("unknown subcommand and bad configuration fail nonzero") {
    CHECK(run_cli({"frobnicate"}) != 0);
    TempDir dir("bad");
    CHECK(run_cli({"world", "--out", dir.str(), "--set", "world.no_such_key=1"}) == 2);
    CHECK(run_cli({"world", "--out", dir.str(), "--set", "nonsense"}) == 2);

    SUBCASE("a config file with an unknown key is a schema error") {
        const fs::path cfg = dir.path / "cfg.json";
        write_json_file(cfg, json{{"world", {{"bogus_key", 3}}}});
        CHECK(run_cli({"world", "--out", dir.str(), "--config", cfg.string()}) == 2);
    }
    SUBCASE("missing inputs are input errors") {
        CHECK(run_cli({"train-base", "--out", dir.str()}) == 2);
        CHECK(run_cli(fast({"world", "--out", dir.str()})) == 0);
        CHECK(run_cli({"unlearn", "--out", dir.str()}) == 2); // no base model yet
    }
}

TEST_CASE("pipeline smoke run with manifest-based reruns") {
    TempDir dir("pipe");
    REQUIRE(run_cli(fast({"world", "--out", dir.str()})) == 0);
    REQUIRE(run_cli(fast({"train-base", "--out", dir.str()})) == 0);
    CHECK(fs::exists(dir.path / "base_model.json"));
    {
        std::ifstream in(dir.path / "base_loss.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "step,loss");
    }

    REQUIRE(run_cli(fast({"neighborhood", "--out", dir.str()})) == 0);
    {
        std::ifstream in(dir.path / "adjacency.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "rank,concept_id,similarity");
        std::string row;
        int rows = 0;
        while (std::getline(in, row)) rows += !row.empty();
        CHECK(rows == 5);
    }
    CHECK(fs::exists(dir.path / "similarity_table.csv"));

    REQUIRE(run_cli(fast({"unlearn", "--out", dir.str()})) == 0);
    CHECK(fs::exists(dir.path / "adapter.json"));
    {
        std::ifstream in(dir.path / "unlearn_loss.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "iteration,l_er,l_guid,l_adj,l_total");
    }

    const std::string world_before = slurp(dir.path / "world.json");
    const std::string base_before = slurp(dir.path / "base_model.json");
    REQUIRE(run_cli(fast({"evaluate", "--out", dir.str()})) == 0);
    CHECK(fs::exists(dir.path / "erb_report.json"));
    CHECK(fs::exists(dir.path / "erb_report.csv"));
    CHECK(fs::exists(dir.path / "retain_accuracy.csv"));
    CHECK(fs::exists(dir.path / "adjacency_accuracy.csv"));
    // Subcommands never mutate their inputs.
    CHECK(slurp(dir.path / "world.json") == world_before);
    CHECK(slurp(dir.path / "base_model.json") == base_before);

    REQUIRE(run_cli(fast({"inflect", "--out", dir.str()})) == 0);
    {
        std::ifstream in(dir.path / "inflection.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "bucket_low,bucket_high,mean_accuracy");
    }

    REQUIRE(run_cli(fast({"theorem1", "--out", dir.str(), "--set", "theorem1.n_grid=[50,200]",
                          "--set", "theorem1.trials=2", "--set", "theorem1.queries=64"})) == 0);
    {
        std::ifstream in(dir.path / "agreement.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "N,mean_agreement,stderr");
    }

    SUBCASE("rerunning evaluate from its manifest reproduces byte-identical CSVs") {
        const std::string report = slurp(dir.path / "erb_report.csv");
        const std::string retain = slurp(dir.path / "retain_accuracy.csv");
        TempDir rerun("pipe_rerun");
        REQUIRE(run_cli({"evaluate", "--from-manifest",
                         (dir.path / "evaluate_manifest.json").string(), "--out", rerun.str()}) == 0);
        CHECK(slurp(rerun.path / "erb_report.csv") == report);
        CHECK(slurp(rerun.path / "retain_accuracy.csv") == retain);
    }
    SUBCASE("a manifest rerun rejects mutated inputs") {
        // Append a byte to the world file; the recorded checksum must catch it.
        {
            std::ofstream out(dir.path / "world.json", std::ios::app);
            out << " ";
        }
        TempDir rerun("pipe_rerun2");
        CHECK(run_cli({"evaluate", "--from-manifest",
                       (dir.path / "evaluate_manifest.json").string(), "--out", rerun.str()}) == 2);
    }
}

TEST_CASE("checkpoints round-trip bit-exactly and adapters bind to their base") {
    const NoiseSchedule schedule = NoiseSchedule::linear(40, 1e-3, 0.05);
    DenoiserConfig dc;
    dc.hidden = {8, 8};
    dc.concept_dim = 4;
    dc.time_dim = 4;
    NoisePredictor model = make_denoiser(dc, 5, 11);

    SUBCASE("base checkpoint reloads to identical parameters") {
        auto [loaded, sched] = checkpoint_from_json(checkpoint_to_json(model, schedule));
        CHECK(sched.beta == schedule.beta);
        for (const auto& p : model.base.items()) {
            CHECK(loaded.base.at(p.name).value.raw() == p.value.raw());
        }
    }
    SUBCASE("adapter checkpoints reject a different base") {
        NoisePredictor adapted = model;
        attach_mesh(adapted, default_mesh_targets(), 2, 3);
        Rng rng(4);
        for (auto& p : adapted.mesh->params.items()) {
            p.value = Tensor2::randn(p.value.rows(), p.value.cols(), rng, 0.1);
        }
        const json doc = adapter_to_json(adapted);

        NoisePredictor same_base = model;
        CHECK_NOTHROW(adapter_apply_from_json(same_base, doc));
        CHECK(same_base.mesh->params.at("mesh.c_proj.A").value.raw() ==
              adapted.mesh->params.at("mesh.c_proj.A").value.raw());

        NoisePredictor other_base = make_denoiser(dc, 5, 999);
        CHECK_THROWS_AS(adapter_apply_from_json(other_base, doc), Error);
    }
}

TEST_CASE("seed override changes outputs; config echo lands in the manifest") {
    TempDir dir("seed");
    REQUIRE(run_cli(fast({"world", "--out", dir.str()})) == 0);
    const std::string base = slurp(dir.path / "world.json");

    TempDir dir2("seed2");
    REQUIRE(run_cli(fast({"world", "--out", dir2.str(), "--seed", "99"})) == 0);
    CHECK(slurp(dir2.path / "world.json") != base);

    const json manifest = load_json_file(dir2.path / "world_manifest.json");
    CHECK(manifest.at("seed") == 99);
    CHECK(manifest.at("config").at("world").at("seed") == 99);
}
