#include "semshift/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "semshift/figures.hpp"
#include "semshift/synth.hpp"

namespace semshift {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Rethrows the active exception with stage/word context, keeping the I/O
// category distinct so the CLI can map it to its own exit code.
[[noreturn]] void rethrow_in_stage(const std::string& stage, const std::string& word) {
    const std::string context = "stage '" + stage + "'" + (word.empty() ? "" : ", word '" + word + "'") + ": ";
    try {
        throw;
    } catch (const StageError&) {
        throw;
    } catch (const IoError& e) {
        throw IoError(context + e.what());
    } catch (const std::exception& e) {
        throw StageError(context + e.what());
    }
}

bool has_first_and_last(const EmbeddingStore& store, WordId word) {
    const auto counts = store.slice_counts(word);
    return counts.size() >= 2 && counts.front() > 0 && counts.back() > 0;
}

std::size_t populated_slices(const EmbeddingStore& store, WordId word) {
    std::size_t n = 0;
    for (auto c : store.slice_counts(word)) n += c > 0 ? 1 : 0;
    return n;
}

}  // namespace

void PipelineConfig::validate() const {
    if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
        throw ParameterError("threshold fraction must lie in (0, 1]");
    }
    if (jobs == 0) throw ParameterError("jobs must be at least 1");
    if (method != "averaging") {
        ClusteringConfig probe = clustering;
        apply_method_tag(probe, method);
        probe.validate();
    }
}

nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& config) {
    nlohmann::ordered_json j;
    j["store"] = config.store_path.string();
    j["method"] = config.method;
    if (config.method != "averaging") {
        ClusteringConfig c = config.clustering;
        apply_method_tag(c, config.method);
        j["clustering"] = config_to_json(c);
    }
    j["scoring"] = scoring_mode_name(config.scoring);
    j["target_metric"] = metric_name(config.target_metric);
    j["threshold_fraction"] = config.threshold_fraction;
    j["gold"] = config.gold_path ? nlohmann::ordered_json(config.gold_path->string()) : nlohmann::ordered_json();
    j["output_dir"] = config.output_dir.string();
    j["seed"] = config.seed;
    return j;
}

void pipeline_config_from_json(const nlohmann::json& j, PipelineConfig& config) {
    try {
        if (j.contains("store")) config.store_path = j["store"].get<std::string>();
        if (j.contains("method")) config.method = j["method"].get<std::string>();
        if (j.contains("clustering")) config_from_json(j["clustering"], config.clustering);
        if (j.contains("scoring")) config.scoring = parse_scoring_mode(j["scoring"].get<std::string>());
        if (j.contains("target_metric")) config.target_metric = parse_metric(j["target_metric"].get<std::string>());
        if (j.contains("threshold_fraction")) config.threshold_fraction = j["threshold_fraction"].get<double>();
        if (j.contains("gold") && !j["gold"].is_null()) config.gold_path = j["gold"].get<std::string>();
        if (j.contains("output_dir")) config.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("jobs")) config.jobs = j["jobs"].get<unsigned>();
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("bad pipeline config: ") + e.what());
    }
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& task) {
    if (n == 0) return;
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::uint64_t word_seed(std::uint64_t seed, WordId word) {
    return derive_seed(seed, 0x100000000ull + word);
}

std::vector<WordId> eligible_words(const EmbeddingStore& store) {
    std::vector<WordId> words;
    for (const auto& w : store.words()) {
        const auto [begin, end] = store.word_range(w.id);
        if (w.is_single_piece && end > begin) words.push_back(w.id);
    }
    return words;
}

std::vector<MetricScore> compute_metrics(const EmbeddingStore& store, const std::vector<WordId>& words, Metric metric,
                                         unsigned jobs, std::vector<Exclusion>* skipped) {
    std::vector<std::optional<MetricScore>> slots(words.size());
    std::vector<std::string> reasons(words.size());
    parallel_for(words.size(), jobs, [&](std::size_t i) {
        try {
            slots[i] = compute_metric(store, words[i], metric);
        } catch (const InsufficientDataError& e) {
            reasons[i] = e.what();
        } catch (const DegenerateInputError& e) {
            reasons[i] = e.what();
        } catch (...) {
            rethrow_in_stage("select", store.words()[words[i]].surface);
        }
    });
    std::vector<MetricScore> out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (slots[i]) {
            out.push_back(std::move(*slots[i]));
        } else if (skipped) {
            skipped->push_back({store.words()[words[i]].surface, reasons[i]});
        }
    }
    return out;
}

ClusterRecord cluster_word(const EmbeddingStore& store, WordId word, const ClusteringConfig& config) {
    const auto occurrences = store.occurrences_of(word);
    const auto keep = subsample_indices(occurrences.size(), config.max_occurrences, config.seed);
    const auto d = static_cast<Eigen::Index>(store.dimension());
    Points points(static_cast<Eigen::Index>(keep.size()), d);
    ClusterRecord record;
    record.word = store.words().at(word).surface;
    record.method = method_tag(config);
    record.config = config_to_json(config);
    record.slice_ids.reserve(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto& [slice, vec] = occurrences[keep[r]];
        record.slice_ids.push_back(slice);
        for (Eigen::Index j = 0; j < d; ++j) points(static_cast<Eigen::Index>(r), j) = vec[static_cast<std::size_t>(j)];
    }
    const auto result = cluster_points(points, config);
    record.n_clusters = result.n_clusters;
    record.converged = result.converged;
    record.iterations_run = result.iterations_run;
    record.labels = result.labels;
    record.exemplar_indices = result.exemplar_indices;
    return record;
}

ChangeScore score_record(const ClusterRecord& record, std::size_t n_slices, ScoringMode mode) {
    const auto dist = usage_distribution(record.labels, record.slice_ids, record.n_clusters, n_slices);
    return {record.word, record.method + "-jsd", change_score(dist, mode)};
}

ChangeScore averaging_score(const EmbeddingStore& store, WordId word, ScoringMode mode) {
    const auto groups = group_by_slice(store, word);
    const double value = mode == ScoringMode::FirstLast ? averaging_total_drift(groups) : averaging_by_slice(groups);
    return {store.words().at(word).surface, "averaging", value};
}

Selection select_words(const EmbeddingStore& store, ScoringMode scoring, Metric metric, double fraction,
                       unsigned jobs) {
    Selection out;
    std::vector<WordId> candidates;
    for (const auto& w : store.words()) {
        if (!w.is_single_piece) {
            out.multi_piece.push_back(w.surface);
            out.skipped.push_back({w.surface, "multi-piece word"});
        }
    }
    for (WordId w : eligible_words(store)) {
        const bool enough = scoring == ScoringMode::FirstLast ? has_first_and_last(store, w)
                                                              : populated_slices(store, w) >= 2;
        if (enough) {
            candidates.push_back(w);
        } else {
            out.skipped.push_back({store.words()[w].surface, "insufficient slice coverage"});
        }
    }
    out.metrics = compute_metrics(store, candidates, metric, jobs, &out.skipped);
    out.targets = select_targets(out.metrics, fraction);
    return out;
}

std::vector<ClusterRecord> cluster_words(const EmbeddingStore& store, const std::vector<WordId>& words,
                                         const ClusteringConfig& base, std::uint64_t seed, unsigned jobs) {
    base.validate();
    std::vector<ClusterRecord> records(words.size());
    parallel_for(words.size(), jobs, [&](std::size_t i) {
        try {
            ClusteringConfig c = base;
            c.seed = word_seed(seed, words[i]);
            records[i] = cluster_word(store, words[i], c);
        } catch (...) {
            rethrow_in_stage("cluster", store.words().at(words[i]).surface);
        }
    });
    return records;
}

RunOutputs run_pipeline(const PipelineConfig& config) {
    config.validate();
    namespace fs = std::filesystem;
    const auto run_start = Clock::now();
    RunOutputs out;
    auto& manifest = out.manifest;
    manifest["version"] = kVersion;
    manifest["config"] = pipeline_config_to_json(config);
    manifest["seed"] = config.seed;
    manifest["jobs"] = config.jobs;
    nlohmann::ordered_json stages = nlohmann::ordered_json::object();
    std::vector<Exclusion> skipped;

    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + config.output_dir.string() + ": " + ec.message());

    // load
    auto t0 = Clock::now();
    EmbeddingStore store;
    try {
        store = read_store_file(config.store_path);
    } catch (...) {
        rethrow_in_stage("load", "");
    }
    stages["load"] = seconds_since(t0);
    const std::size_t n_slices = store.slices().size();

    // select
    t0 = Clock::now();
    Selection selection;
    try {
        selection = select_words(store, config.scoring, config.target_metric, config.threshold_fraction, config.jobs);
    } catch (...) {
        rethrow_in_stage("select", "");
    }
    const auto& metrics = selection.metrics;
    const auto& targets = selection.targets;
    skipped.insert(skipped.end(), selection.skipped.begin(), selection.skipped.end());
    {
        std::ofstream mf(config.output_dir / "metrics.tsv");
        if (!mf) throw IoError("cannot write metrics.tsv");
        std::vector<MetricScore> sorted = metrics;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.word < b.word; });
        write_metrics(mf, sorted);
        std::ofstream tf(config.output_dir / "targets.txt");
        if (!tf) throw IoError("cannot write targets.txt");
        for (const auto& w : targets.words) tf << w << '\n';
    }
    stages["select"] = seconds_since(t0);

    std::vector<WordId> words = targets.word_ids;
    std::sort(words.begin(), words.end());
    std::vector<ChangeScore> scores(words.size());

    if (config.method == "averaging") {
        t0 = Clock::now();
        parallel_for(words.size(), config.jobs, [&](std::size_t i) {
            try {
                scores[i] = averaging_score(store, words[i], config.scoring);
            } catch (...) {
                rethrow_in_stage("score", store.words()[words[i]].surface);
            }
        });
        stages["score"] = seconds_since(t0);
    } else {
        // cluster
        t0 = Clock::now();
        ClusteringConfig base = config.clustering;
        apply_method_tag(base, config.method);
        const fs::path cluster_dir = config.output_dir / "clusters";
        fs::create_directories(cluster_dir, ec);
        if (ec) throw IoError("cannot create " + cluster_dir.string() + ": " + ec.message());
        out.records = cluster_words(store, words, base, config.seed, config.jobs);
        for (const auto& record : out.records) write_record_file(cluster_dir / record_file_name(record.word), record);
        stages["cluster"] = seconds_since(t0);

        // score
        t0 = Clock::now();
        for (std::size_t i = 0; i < words.size(); ++i) {
            try {
                scores[i] = score_record(out.records[i], n_slices, config.scoring);
            } catch (...) {
                rethrow_in_stage("score", out.records[i].word);
            }
        }
        {
            std::ofstream ff(config.output_dir / "freq_scatter.csv");
            if (!ff) throw IoError("cannot write freq_scatter.csv");
            write_frequency_scatter(ff, frequency_scatter(out.records));
        }
        stages["score"] = seconds_since(t0);
    }

    out.scores = rank_words(std::move(scores));
    write_scores_file(config.output_dir / "scores.tsv", out.scores);

    if (config.gold_path) {
        t0 = Clock::now();
        try {
            const auto gold = load_gold_file(*config.gold_path);
            out.report = evaluate(out.scores, gold, std::nullopt, selection.multi_piece);
        } catch (...) {
            rethrow_in_stage("evaluate", "");
        }
        write_json_file(config.output_dir / "eval_report.json", report_to_json(*out.report));
        std::ofstream rf(config.output_dir / "eval_report.txt");
        rf << format_report(*out.report);
        stages["evaluate"] = seconds_since(t0);
    }

    nlohmann::ordered_json skipped_json = nlohmann::ordered_json::array();
    for (const auto& s : skipped) skipped_json.push_back({{"word", s.word}, {"reason", s.reason}});
    manifest["n_words"] = store.words().size();
    manifest["n_targets"] = words.size();
    manifest["skipped"] = std::move(skipped_json);
    stages["total"] = seconds_since(run_start);
    manifest["wall_clock_seconds"] = std::move(stages);
    write_json_file(config.output_dir / "manifest.json", manifest);
    return out;
}

}  // namespace semshift
