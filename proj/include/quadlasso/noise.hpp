#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "quadlasso/numkernel.hpp"

namespace quadlasso {

enum class NoiseKind { Gaussian, StudentT3 };

std::string_view to_string(NoiseKind k);
std::optional<NoiseKind> parse_noise_kind(std::string_view name);

/// n i.i.d. draws with variance sigma^2. StudentT3 is t(3) scaled by sigma / sqrt(3).
DenseVector sample_noise(std::size_t n, double sigma, NoiseKind kind, std::uint64_t seed);

}  // namespace quadlasso
