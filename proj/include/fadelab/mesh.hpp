#pragma once

#include "fadelab/tape.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fadelab {

struct NoisePredictor;

// FNV-1a over the raw double bit patterns. Used to prove base weights were
// never mutated by adapter training.
std::uint64_t tensor_checksum(const Tensor2& t);

// Low-rank adapter attached to one frozen base matrix: effective weight is
// W0 + B*A while enabled. B starts at zero and A at small Gaussian values, so
// the adapted model is exactly the base model at attach time.
struct MeshAdapter {
    std::string target; // base parameter name
    int rank = 0;
    std::string a_name() const { return "mesh." + target + ".A"; }
    std::string b_name() const { return "mesh." + target + ".B"; }
};

struct MeshState {
    int rank = 0;
    bool enabled = true;
    std::vector<MeshAdapter> adapters;
    ParamStore params; // the trainable A and B matrices
    std::map<std::string, std::uint64_t> base_checksums;

    const MeshAdapter* find(const std::string& target) const;
};

// Attaches adapters of rank r to the named base matrices. Requires
// 1 <= r <= min(d, k)/2 for every target; attaching twice is rejected.
void attach_mesh(NoisePredictor& model, const std::vector<std::string>& targets, int rank,
                 std::uint64_t init_seed);

// Default adapted matrices for the denoiser: every hidden-layer weight plus
// the concept embedding table. Biases and the output head stay frozen.
std::vector<std::string> default_mesh_targets();

// Dense delta B*A for one adapter.
Tensor2 merge_delta(const NoisePredictor& model, const std::string& target);

// Verifies every recorded base checksum; throws an integrity error on drift.
void verify_base_integrity(const NoisePredictor& model);

// Removes the adapters after an integrity check, restoring the base model.
// A model without adapters detaches as a no-op.
void detach_mesh(NoisePredictor& model);

} // namespace fadelab
