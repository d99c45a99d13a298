#include "fadelab/mesh.hpp"

#include "fadelab/diffusion.hpp"

#include <cstring>

namespace fadelab {

std::uint64_t tensor_checksum(const Tensor2& t) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_u64 = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    };
    mix_u64(t.rows());
    mix_u64(t.cols());
    for (double d : t.raw()) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        mix_u64(bits);
    }
    return h;
}

const MeshAdapter* MeshState::find(const std::string& target) const {
    for (const auto& a : adapters) {
        if (a.target == target) return &a;
    }
    return nullptr;
}

std::vector<std::string> default_mesh_targets() { return {"embed", "c_proj"}; }

void attach_mesh(NoisePredictor& model, const std::vector<std::string>& targets, int rank,
                 std::uint64_t init_seed) {
    require(!model.mesh.has_value(), ErrorKind::config, "mesh adapters already attached");
    require(rank >= 1, ErrorKind::config, "mesh rank must be at least 1");
    require(!targets.empty(), ErrorKind::config, "mesh needs at least one target matrix");

    MeshState mesh;
    mesh.rank = rank;
    Rng rng = Rng(init_seed).fork(0x6d657368ULL);
    for (const auto& target : targets) {
        require(mesh.find(target) == nullptr, ErrorKind::config,
                "mesh adapter already attached to '" + target + "'");
        const Tensor2& w0 = model.base.at(target).value;
        const std::size_t d = w0.rows();
        const std::size_t k = w0.cols();
        require(static_cast<std::size_t>(rank) <= std::min(d, k) / 2, ErrorKind::config,
                "mesh rank " + std::to_string(rank) + " too large for " + target + " (" + w0.shape_str() +
                    "); need r <= min(d,k)/2");

        MeshAdapter ad;
        ad.target = target;
        ad.rank = rank;
        // B = 0 guarantees B*A = 0, so attaching never changes the model.
        mesh.params.add(ad.b_name(), Tensor2(d, static_cast<std::size_t>(rank)));
        mesh.params.add(ad.a_name(),
                        Tensor2::randn(static_cast<std::size_t>(rank), k, rng, 0.02));
        mesh.base_checksums[target] = tensor_checksum(w0);
        mesh.adapters.push_back(std::move(ad));
    }
    model.mesh = std::move(mesh);
}

Tensor2 merge_delta(const NoisePredictor& model, const std::string& target) {
    require(model.mesh.has_value(), ErrorKind::contract, "no mesh adapters attached");
    const MeshAdapter* ad = model.mesh->find(target);
    require(ad != nullptr, ErrorKind::lookup, "no mesh adapter on '" + target + "'");
    return matmul(model.mesh->params.at(ad->b_name()).value, model.mesh->params.at(ad->a_name()).value);
}

void verify_base_integrity(const NoisePredictor& model) {
    if (!model.mesh) return;
    for (const auto& [target, checksum] : model.mesh->base_checksums) {
        const std::uint64_t now = tensor_checksum(model.base.at(target).value);
        require(now == checksum, ErrorKind::integrity,
                "base matrix '" + target + "' was mutated while adapters were attached");
    }
}

void detach_mesh(NoisePredictor& model) {
    if (!model.mesh) return; // detaching with no adapters is a no-op
    verify_base_integrity(model);
    model.mesh.reset();
}

} // namespace fadelab
