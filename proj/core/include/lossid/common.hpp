#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace lossid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Bad user input: malformed config, invalid parameters, infeasible split.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: non-finite values, divergence, unusable scaling.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required on-disk artifact (bundle, checkpoint, dataset) is absent.
class MissingArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer; used to derive independent stream seeds from a
/// master seed so that adding a consumer never shifts another's stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Named seed streams. Values are part of the reproducibility contract:
// changing them changes every derived random draw.
namespace seed_stream {
inline constexpr std::uint64_t kThermalTrue = 1;
inline constexpr std::uint64_t kThermalNoise = 2;
inline constexpr std::uint64_t kLossNominal = 3;
inline constexpr std::uint64_t kDeviceBase = 16;   // + device index
inline constexpr std::uint64_t kSplit = 4;
inline constexpr std::uint64_t kNetInit = 5;
inline constexpr std::uint64_t kTrainLoop = 6;
}  // namespace seed_stream

}  // namespace lossid
