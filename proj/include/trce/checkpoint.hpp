#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "trce/arch.hpp"
#include "trce/schedule.hpp"
#include "trce/tensor.hpp"

namespace trce {

inline constexpr std::uint16_t kContainerVersion = 1;

// Low-level "TRCE" container: magic, version, named f64 tensor entries,
// trailing JSON descriptor block. Shared by model checkpoints and trajectory
// caches.
struct Container {
    std::uint16_t version = kContainerVersion;
    std::vector<std::pair<std::string, Tensor>> entries;
    std::string json_text;
};

void save_container(const Container& c, const std::string& path);
Container load_container(const std::string& path);

struct ModelCheckpoint {
    std::map<std::string, Tensor> tensors;
    ModelArch arch;
    NoiseSchedule schedule;
    std::string provenance = "init";  // init / pretrained / TRCE-T / TRCE-V / TRCE-T+V
};

// Random initialization per the deterministic parameter layout.
ModelCheckpoint init_model(const ModelArch& arch, const NoiseSchedule& schedule,
                           std::uint64_t seed);

// Shape/finiteness validation against expected_params(arch).
void validate_checkpoint(const ModelCheckpoint& cp);

void save_checkpoint(const ModelCheckpoint& cp, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace trce
