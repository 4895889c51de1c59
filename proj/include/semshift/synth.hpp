#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "semshift/store.hpp"

namespace semshift {

/// Isotropic Gaussian sense in embedding space.
struct SenseSpec {
    Eigen::VectorXd mean;
    double spread = 1.0;
};

/// One synthetic word: its senses and the per-slice mixture over them.
struct DriftSpec {
    std::string word;
    std::vector<SenseSpec> senses;
    /// mixtures[t][s]: probability of sense s in slice t.
    std::vector<std::vector<double>> mixtures;
    std::vector<std::size_t> occurrences_per_slice;
};

struct GroundTruth {
    std::string word;
    /// JSD (bits) between the first and last slice mixtures.
    double true_drift = 0.0;
};

struct SynthSuite {
    EmbeddingStore store;
    std::vector<GroundTruth> truth;
};

/// Samples every word's occurrences from its slice mixtures. Each word draws
/// from its own sub-seed, so output does not depend on generation order.
SynthSuite generate(const std::vector<DriftSpec>& specs, std::uint32_t dimension, std::uint64_t seed,
                    const std::vector<std::string>& slice_labels = {});

/// Specs of the default benchmark: 50 words, d = 16, two slices with 200
/// occurrences each, 2 to 6 senses per word and target drifts spread over
/// 0, 0.1, ..., 1.0.
std::vector<DriftSpec> default_suite_specs(std::uint64_t seed);
SynthSuite default_suite(std::uint64_t seed);

inline constexpr std::uint32_t kDefaultSuiteDimension = 16;
inline constexpr std::size_t kDefaultSuiteWords = 50;
inline constexpr std::size_t kDefaultSuiteOccurrences = 200;
inline constexpr double kDefaultSuiteSpread = 1.0;
inline constexpr double kDefaultSuiteMinSeparation = 8.0;
/// Standard deviation of each sense-mean coordinate, in units of spread.
inline constexpr double kDefaultSuiteMeanScale = 3.0;

/// Mixing weight p such that jsd(P, (1 - p) P + p R) hits `target` for
/// distributions P and R with disjoint supports.
double drift_mixing_weight(double target);

/// 64-bit mix of a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

nlohmann::ordered_json specs_to_json(const std::vector<DriftSpec>& specs, std::uint32_t dimension);
std::vector<DriftSpec> specs_from_json(const nlohmann::json& j, std::uint32_t& dimension);

/// Ground truth as gold-format TSV: scores are true_drift x 3 so they fall
/// on the 0-3 annotation scale; a comment line flags the rescaling.
void write_truth(std::ostream& out, const std::vector<GroundTruth>& truth);
void write_truth_file(const std::filesystem::path& path, const std::vector<GroundTruth>& truth);

}  // namespace semshift
