// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria. The first argument is the semshift CLI binary.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "semshift/clustering.hpp"
#include "semshift/divergence.hpp"
#include "semshift/eval.hpp"
#include "semshift/pipeline.hpp"
#include "semshift/store.hpp"
#include "semshift/synth.hpp"
#include "test_helpers.hpp"

#include <unistd.h>

using namespace semshift;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* format, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// Runs `body`; an escaping exception fails the criterion with its message.
void criterion(const char* name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [ok, detail] = body();
        report(name, ok, detail);
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

std::pair<bool, std::string> jsd_identities() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    const std::vector<double> p{0.2, 0.3, 0.5};
    worst = std::max(worst, std::abs(jsd(p, p) - 0.0));
    worst = std::max(worst, std::abs(jsd(std::vector<double>{1, 0}, std::vector<double>{0, 1}) - 1.0));
    worst = std::max(worst, std::abs(jsd(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}) - 0.311278124459132843));
    worst = std::max(worst, std::abs(jsd_multi({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}) - std::log2(3.0)));
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && secs < 1.0, fmt("max error %.3g, %.3f s", worst, secs)};
}

std::pair<bool, std::string> ap_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> n_dist(20, 80), d_dist(5, 20);
    int matched = 0;
    for (int instance = 0; instance < 50; ++instance) {
        const std::size_t n = n_dist(rng), d = d_dist(rng);
        const auto rows = oracle::random_cloud(n, d, 1000 + static_cast<std::uint64_t>(instance));
        const auto r = affinity_propagation(to_points(rows), ClusteringConfig{});
        const auto o = oracle::affinity_propagation(rows);
        matched += (r.labels == o.labels && r.exemplar_indices == o.exemplars) ? 1 : 0;
    }
    const double secs = seconds_since(t0);
    return {matched == 50 && secs < 30.0, fmt("%d/50 instances match, %.2f s", matched, secs)};
}

std::pair<bool, std::string> kmeans_correctness() {
    const auto t0 = Clock::now();
    int violations = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const auto p = to_points(oracle::random_cloud(40 + seed % 60, 2 + seed % 7, 500 + seed));
        const auto run = lloyd(p, kmeans_plus_plus(p, 2 + static_cast<int>(seed % 6), rng), 300, 0.0);
        for (std::size_t i = 1; i < run.inertia_trace.size(); ++i) {
            if (run.inertia_trace[i] > run.inertia_trace[i - 1]) ++violations;
        }
    }

    int optimal = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(9000 + seed);
        std::uniform_int_distribution<std::size_t> n_dist(4, 10);
        std::normal_distribution<double> g(0.0, 1.0);
        const std::size_t n = n_dist(rng);
        oracle::Matrix rows(n, std::vector<double>(2));
        for (std::size_t i = 0; i < n; ++i) {
            const double shift = i < n / 2 ? 0.0 : 4.0;
            rows[i] = {g(rng) + shift, g(rng)};
        }
        ClusteringConfig c;
        c.method = ClusteringMethod::KMeans;
        c.k = 2;
        c.seed = seed;
        const auto r = kmeans(to_points(rows), c);
        const auto best = oracle::best_two_partition(rows);
        if (oracle::canonical(r.labels) == oracle::canonical(best.second) ||
            std::abs(r.inertia - best.first) <= 1e-9 * std::max(1.0, best.first)) {
            ++optimal;
        }
    }
    const double secs = seconds_since(t0);
    return {violations == 0 && optimal >= 45 && secs < 30.0,
            fmt("%d inertia increases, %d/50 optimal, %.2f s", violations, optimal, secs)};
}

std::pair<bool, std::string> silhouette_oracle() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(300 + seed);
        const std::size_t n = 10 + seed * 4;
        const int k = 2 + static_cast<int>(seed % 5);
        const auto rows = oracle::random_cloud(n, 1 + seed % 6, 700 + seed);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(k));
        std::shuffle(labels.begin(), labels.end(), rng);
        worst = std::max(worst, std::abs(silhouette(to_points(rows), labels) - oracle::silhouette(rows, labels)));
    }
    return {worst <= 1e-9, fmt("max deviation %.3g over 20 datasets", worst)};
}

struct SuiteRun {
    std::vector<ChangeScore> scores;
    std::vector<GroundTruth> truth;
    double spearman = 0.0;
    double seconds = 0.0;
};

SuiteRun run_suite(const fs::path& dir, std::uint64_t seed) {
    const auto suite = default_suite(seed);
    fs::create_directories(dir);
    write_store_file(dir / "suite.embs", suite.store);
    write_truth_file(dir / "truth.tsv", suite.truth);
    PipelineConfig config;
    config.store_path = dir / "suite.embs";
    config.gold_path = dir / "truth.tsv";
    config.output_dir = dir / "out";
    config.seed = seed;
    const auto t0 = Clock::now();
    const auto out = run_pipeline(config);
    return {out.scores, suite.truth, out.report->spearman, seconds_since(t0)};
}

std::pair<bool, std::string> synthetic_end_to_end(const SuiteRun& run) {
    double max_zero = 0.0, min_full = 1.0;
    for (const auto& t : run.truth) {
        const auto it = std::find_if(run.scores.begin(), run.scores.end(), [&](const auto& s) { return s.word == t.word; });
        if (it == run.scores.end()) return {false, "missing score for " + t.word};
        if (t.true_drift == 0.0) max_zero = std::max(max_zero, it->value);
        if (t.true_drift == 1.0) min_full = std::min(min_full, it->value);
    }
    const bool ok = run.spearman >= 0.8 && max_zero < 0.05 && min_full > 0.9 && run.seconds < 120.0;
    return {ok, fmt("spearman %.4f, zero-drift max %.4f, full-drift min %.4f, %.2f s", run.spearman, max_zero, min_full,
                    run.seconds)};
}

std::pair<bool, std::string> averaging_auc() {
    const auto suite = default_suite(0);
    std::vector<double> zero, full;
    for (WordId w = 0; w < suite.store.words().size(); ++w) {
        const double v = averaging_score(suite.store, w, ScoringMode::FirstLast).value;
        if (suite.truth[w].true_drift == 0.0) zero.push_back(v);
        if (suite.truth[w].true_drift == 1.0) full.push_back(v);
    }
    double wins = 0.0;
    for (double f : full)
        for (double z : zero) wins += f > z ? 1.0 : (f == z ? 0.5 : 0.0);
    const double auc = wins / static_cast<double>(full.size() * zero.size());
    return {auc >= 0.95, fmt("AUC %.4f (%zu full-drift vs %zu zero-drift words)", auc, full.size(), zero.size())};
}

std::pair<bool, std::string> statistics_identities() {
    const double tie = spearman(std::vector<double>{1, 2, 2, 4}, std::vector<double>{1, 2, 3, 4});
    const double tie_err = std::abs(tie - 3.0 / std::sqrt(10.0));
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> coarse(0, 5);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + static_cast<std::size_t>(trial % 30);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = coarse(rng);
            y[i] = coarse(rng);
        }
        x[0] = 0;
        x[1] = 5;
        y[0] = 5;
        y[1] = 0;
        if (spearman(x, y) != pearson(average_ranks(x), average_ranks(y))) ++mismatches;
    }
    return {tie_err <= 1e-12 && mismatches == 0,
            fmt("tie example error %.3g, %d/200 rank-identity mismatches", tie_err, mismatches)};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::pair<bool, std::string> determinism(const fs::path& cli, const fs::path& dir) {
    if (!fs::exists(cli)) return {false, "CLI binary not found: " + cli.string()};
    fs::create_directories(dir);
    const std::string store = (dir / "suite.embs").string();
    auto sh = [](const std::string& cmd) { return std::system((cmd + " > /dev/null").c_str()); };
    if (sh("\"" + cli.string() + "\" synth --seed 3 -o \"" + store + "\"") != 0) return {false, "synth failed"};
    const std::string run = "\"" + cli.string() + "\" run --seed 3 -s \"" + store + "\" -o ";
    if (sh(run + "\"" + (dir / "a").string() + "\" --jobs 1") != 0 ||
        sh(run + "\"" + (dir / "b").string() + "\" --jobs 1") != 0 ||
        sh(run + "\"" + (dir / "c").string() + "\" --jobs 8") != 0) {
        return {false, "run failed"};
    }
    const auto a = slurp(dir / "a" / "scores.tsv");
    const auto b = slurp(dir / "b" / "scores.tsv");
    const auto c = slurp(dir / "c" / "scores.tsv");
    const bool ok = !a.empty() && a == b && a == c;
    return {ok, fmt("scores.tsv %zu bytes; repeat %s, jobs 1 vs 8 %s", a.size(), a == b ? "identical" : "DIFFERENT",
                    a == c ? "identical" : "DIFFERENT")};
}

EmbeddingStore random_store(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint32_t> d_dist(1, 24);
    std::uniform_int_distribution<int> count(0, 6);
    std::uniform_int_distribution<int> bits(0, 0xFFFF);
    std::normal_distribution<float> g(0.0f, 10.0f);
    const std::uint32_t d = d_dist(rng);
    StoreBuilder b(d);
    const int n_slices = count(rng);
    for (int s = 0; s < n_slices; ++s) b.add_slice("slice \xc3\xa9" + std::to_string(s), static_cast<std::uint16_t>(s * 10));
    const int n_words = n_slices == 0 ? 0 : count(rng);
    for (int w = 0; w < n_words; ++w) b.add_word("w\xe2\x80\x94" + std::to_string(w), (w + bits(rng)) % 2 == 0);
    std::vector<float> v(d);
    for (int w = 0; w < n_words; ++w) {
        const int occ = count(rng) * 2;
        for (int i = 0; i < occ; ++i) {
            for (auto& x : v) {
                x = g(rng);
                if (bits(rng) % 50 == 0) x = std::numeric_limits<float>::denorm_min();
                if (bits(rng) % 50 == 0) x = -0.0f;
            }
            b.add_occurrence(static_cast<WordId>(w), static_cast<SliceId>(i % n_slices), std::span<const float>(v));
        }
    }
    return std::move(b).build();
}

bool bit_equal(const EmbeddingStore& a, const EmbeddingStore& b) {
    if (!(a == b) || a.occurrence_count() != b.occurrence_count()) return false;
    for (std::size_t i = 0; i < a.occurrence_count(); ++i) {
        const auto x = a.occurrence(i), y = b.occurrence(i);
        if (x.word_id != y.word_id || x.slice_id != y.slice_id) return false;
        for (std::size_t j = 0; j < x.vector.size(); ++j) {
            if (std::bit_cast<std::uint32_t>(x.vector[j]) != std::bit_cast<std::uint32_t>(y.vector[j])) return false;
        }
    }
    return true;
}

std::pair<bool, std::string> codec_round_trip() {
    std::mt19937_64 rng(42);
    int mismatches = 0;
    std::size_t records = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto store = random_store(rng);
        records += store.occurrence_count();
        const auto bytes = encode_store(store);
        const auto back = decode_store(bytes);
        if (!bit_equal(store, back) || encode_store(back) != bytes) ++mismatches;
    }
    return {mismatches == 0, fmt("%d mismatches over 1000 stores (%zu records)", mismatches, records)};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path cli = argc > 1 ? fs::path(argv[1]) : fs::path("semshift");
    const fs::path scratch = fs::temp_directory_path() / ("semshift_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(scratch);

    criterion("jsd-identities", jsd_identities);
    criterion("ap-oracle-equivalence", ap_oracle);
    criterion("kmeans-correctness", kmeans_correctness);
    criterion("silhouette-oracle", silhouette_oracle);
    std::optional<SuiteRun> suite;
    criterion("synthetic-end-to-end", [&] {
        suite = run_suite(scratch / "suite", 0);
        return synthetic_end_to_end(*suite);
    });
    criterion("averaging-baseline-auc", averaging_auc);
    criterion("statistics-identities", statistics_identities);
    criterion("determinism", [&] { return determinism(cli, scratch / "determinism"); });
    criterion("codec-round-trip", codec_round_trip);

    fs::remove_all(scratch);
    std::printf("%d criteria failed\n", failures);
    return failures;
}
