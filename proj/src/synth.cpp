#include "semshift/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>

#include "semshift/divergence.hpp"
#include "semshift/error.hpp"
#include "semshift/formats.hpp"

namespace semshift {

namespace {

void validate_spec(const DriftSpec& spec, std::uint32_t dimension, std::size_t n_slices) {
    const std::string who = "word '" + spec.word + "': ";
    if (spec.senses.empty()) throw ValidationError(who + "needs at least one sense");
    for (const auto& s : spec.senses) {
        if (s.mean.size() != static_cast<Eigen::Index>(dimension)) throw ValidationError(who + "sense mean has wrong dimension");
        if (!s.mean.allFinite()) throw ValidationError(who + "sense mean is not finite");
        if (!(s.spread > 0.0) || !std::isfinite(s.spread)) throw ValidationError(who + "sense spread must be positive");
    }
    if (spec.mixtures.size() != n_slices || spec.occurrences_per_slice.size() != n_slices) {
        throw ValidationError(who + "needs one mixture and one occurrence count per slice");
    }
    for (const auto& row : spec.mixtures) {
        if (row.size() != spec.senses.size()) throw ValidationError(who + "mixture length differs from sense count");
        double total = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) throw ValidationError(who + "negative mixture weight");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ValidationError(who + "mixture does not sum to 1");
    }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined state.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

SynthSuite generate(const std::vector<DriftSpec>& specs, std::uint32_t dimension, std::uint64_t seed,
                    const std::vector<std::string>& slice_labels) {
    if (dimension < 2) throw ValidationError("synthetic stores need dimension >= 2");
    const std::size_t n_slices = !slice_labels.empty() ? slice_labels.size()
                                 : specs.empty()        ? 2
                                                        : specs.front().mixtures.size();
    if (n_slices == 0) throw ValidationError("synthetic stores need at least one slice");
    for (const auto& spec : specs) validate_spec(spec, dimension, n_slices);

    StoreBuilder builder(dimension);
    for (std::size_t t = 0; t < n_slices; ++t) {
        builder.add_slice(slice_labels.empty() ? "t" + std::to_string(t) : slice_labels[t]);
    }
    SynthSuite suite;
    std::vector<double> sample(dimension);
    for (std::size_t w = 0; w < specs.size(); ++w) {
        const auto& spec = specs[w];
        const WordId id = builder.add_word(spec.word);
        std::mt19937_64 rng(derive_seed(seed, w));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t t = 0; t < n_slices; ++t) {
            std::discrete_distribution<std::size_t> pick(spec.mixtures[t].begin(), spec.mixtures[t].end());
            for (std::size_t i = 0; i < spec.occurrences_per_slice[t]; ++i) {
                const auto& sense = spec.senses[pick(rng)];
                for (std::uint32_t j = 0; j < dimension; ++j) sample[j] = sense.mean(j) + sense.spread * normal(rng);
                builder.add_occurrence(id, static_cast<SliceId>(t), std::span<const double>(sample));
            }
        }
        suite.truth.push_back({spec.word, jsd(spec.mixtures.front(), spec.mixtures.back())});
    }
    suite.store = std::move(builder).build();
    return suite;
}

double drift_mixing_weight(double target) {
    if (!(target >= 0.0 && target <= 1.0)) throw ParameterError("target drift must lie in [0, 1]");
    if (target == 0.0) return 0.0;
    if (target == 1.0) return 1.0;
    // With disjoint P and R the JSD depends only on p, so a two-point
    // representative suffices; it is strictly increasing in p.
    auto drift = [](double p) {
        const std::vector<double> first{1.0, 0.0};
        const std::vector<double> last{1.0 - p, p};
        return jsd(first, last);
    };
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (drift(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<DriftSpec> default_suite_specs(std::uint64_t seed) {
    constexpr std::size_t kLevels = 11;
    const std::size_t d = kDefaultSuiteDimension;
    std::vector<DriftSpec> specs;
    for (std::size_t w = 0; w < kDefaultSuiteWords; ++w) {
        DriftSpec spec;
        char name[16];
        std::snprintf(name, sizeof name, "w%02zu", w);
        spec.word = name;

        const std::size_t n_senses = 2 + w % 5;
        std::mt19937_64 rng(derive_seed(seed ^ 0x5EED5EEDull, w));
        std::normal_distribution<double> normal(0.0, kDefaultSuiteMeanScale * kDefaultSuiteSpread);
        while (spec.senses.size() < n_senses) {
            Eigen::VectorXd mean(static_cast<Eigen::Index>(d));
            for (auto& v : mean) v = normal(rng);
            bool separated = true;
            for (const auto& other : spec.senses) {
                if ((other.mean - mean).norm() < kDefaultSuiteMinSeparation * kDefaultSuiteSpread) separated = false;
            }
            if (separated) spec.senses.push_back({std::move(mean), kDefaultSuiteSpread});
        }

        // Senses [0, a) form the first-slice usage; the last slice moves
        // weight p onto the disjoint senses [a, n). Stable words use every sense.
        const double target = static_cast<double>(w % kLevels) / 10.0;
        const double p = drift_mixing_weight(target);
        const std::size_t a = target == 0.0 ? n_senses : n_senses / 2;
        std::vector<double> first(n_senses, 0.0);
        std::vector<double> last(n_senses, 0.0);
        for (std::size_t s = 0; s < a; ++s) {
            first[s] = 1.0 / static_cast<double>(a);
            last[s] = (1.0 - p) / static_cast<double>(a);
        }
        for (std::size_t s = a; s < n_senses; ++s) last[s] = p / static_cast<double>(n_senses - a);
        spec.mixtures = {first, last};
        spec.occurrences_per_slice = {kDefaultSuiteOccurrences, kDefaultSuiteOccurrences};
        specs.push_back(std::move(spec));
    }
    return specs;
}

SynthSuite default_suite(std::uint64_t seed) {
    return generate(default_suite_specs(seed), kDefaultSuiteDimension, seed, {"1960s", "1990s"});
}

nlohmann::ordered_json specs_to_json(const std::vector<DriftSpec>& specs, std::uint32_t dimension) {
    nlohmann::ordered_json j;
    j["dimension"] = dimension;
    auto words = nlohmann::ordered_json::array();
    for (const auto& spec : specs) {
        nlohmann::ordered_json w;
        w["word"] = spec.word;
        auto senses = nlohmann::ordered_json::array();
        for (const auto& s : spec.senses) {
            senses.push_back({{"mean", std::vector<double>(s.mean.begin(), s.mean.end())}, {"spread", s.spread}});
        }
        w["senses"] = std::move(senses);
        w["mixtures"] = spec.mixtures;
        w["occurrences_per_slice"] = spec.occurrences_per_slice;
        words.push_back(std::move(w));
    }
    j["words"] = std::move(words);
    return j;
}

std::vector<DriftSpec> specs_from_json(const nlohmann::json& j, std::uint32_t& dimension) {
    std::vector<DriftSpec> specs;
    try {
        dimension = j.at("dimension").get<std::uint32_t>();
        for (const auto& w : j.at("words")) {
            DriftSpec spec;
            spec.word = w.at("word").get<std::string>();
            for (const auto& s : w.at("senses")) {
                const auto mean = s.at("mean").get<std::vector<double>>();
                spec.senses.push_back(
                    {Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                     s.at("spread").get<double>()});
            }
            spec.mixtures = w.at("mixtures").get<std::vector<std::vector<double>>>();
            spec.occurrences_per_slice = w.at("occurrences_per_slice").get<std::vector<std::size_t>>();
            specs.push_back(std::move(spec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad drift spec JSON: ") + e.what(), 0);
    }
    return specs;
}

void write_truth(std::ostream& out, const std::vector<GroundTruth>& truth) {
    out << "# score = true_drift x 3 (rescaled to the 0-3 gold scale)\n";
    out << "word\tscore\n";
    for (const auto& t : truth) out << t.word << '\t' << format_double(3.0 * t.true_drift) << '\n';
}

void write_truth_file(const std::filesystem::path& path, const std::vector<GroundTruth>& truth) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_truth(out, truth);
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace semshift
