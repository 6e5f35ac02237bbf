#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "bayesreloc/regressor.hpp"

namespace bayesreloc {

struct Checkpoint {
    NetworkParams net;
    std::optional<std::uint64_t> train_seed;
    std::optional<double> beta;
};

// JSON document tagged "bayesreloc-net-v1"; matrices row-major. Doubles are
// written with round-trip precision.
std::string format_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bayesreloc
