#include "quadlasso/noise.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "quadlasso/rng.hpp"

namespace quadlasso {

std::string_view to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::StudentT3: return "student_t3";
    }
    return "gaussian";
}

std::optional<NoiseKind> parse_noise_kind(std::string_view name) {
    if (name == "gaussian") return NoiseKind::Gaussian;
    if (name == "student_t3" || name == "t3") return NoiseKind::StudentT3;
    return std::nullopt;
}

DenseVector sample_noise(std::size_t n, double sigma, NoiseKind kind, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("sample_noise: sigma must be finite and >= 0");
    Rng rng(seed);
    DenseVector e(n);
    if (kind == NoiseKind::Gaussian) {
        std::normal_distribution<double> nd(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) e[i] = sigma * nd(rng);
    } else {
        std::student_t_distribution<double> td(3.0);
        const double s = sigma / std::sqrt(3.0);
        for (std::size_t i = 0; i < n; ++i) e[i] = s * td(rng);
    }
    return e;
}

}  // namespace quadlasso
