#pragma once

#include <cstdint>
#include <string>

#include "ncp/postprocess.hpp"
#include "ncp/trainer.hpp"

namespace ncp {

// Binary model container: "NCPM" magic, u32 format version, u64 JSON header
// length, JSON header describing shapes and training metadata, then all
// tensors as raw little-endian doubles in header order. Doubles round-trip
// bitwise. Version mismatches fail the load.
inline constexpr std::uint32_t kArchiveVersion = 1;

void save_model(const WhitenedModel& model, const std::string& path);
WhitenedModel load_model(const std::string& path);

// FNV-1a over the canonical key=value rendering of the config.
std::uint64_t config_hash(const TrainConfig& cfg);

}  // namespace ncp
