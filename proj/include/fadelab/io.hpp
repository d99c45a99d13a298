#pragma once

#include "fadelab/diffusion.hpp"
#include "fadelab/world.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fadelab {

using nlohmann::json;

// Shortest-round-trip decimal text for a double; stable across reruns.
std::string format_real(double v);

void write_csv(const std::filesystem::path& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows);

std::uint64_t file_checksum(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

json load_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& doc);

// --- world serialization -----------------------------------------------

json world_to_json(const ConceptWorld& world);
ConceptWorld world_from_json(const json& doc);

// --- model checkpoints ---------------------------------------------------

json checkpoint_to_json(const NoisePredictor& model, const NoiseSchedule& schedule);
std::pair<NoisePredictor, NoiseSchedule> checkpoint_from_json(const json& doc);

// Adapter checkpoints live apart from base checkpoints: target names, rank,
// A/B matrices, and the base checksums they were trained against.
json adapter_to_json(const NoisePredictor& model);
// Attaches the stored adapters onto `model`, verifying the recorded base
// checksums first.
void adapter_apply_from_json(NoisePredictor& model, const json& doc);

} // namespace fadelab
