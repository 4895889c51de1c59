#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semshift/error.hpp"
#include "semshift/eval.hpp"
#include "semshift/figures.hpp"
#include "semshift/formats.hpp"
#include "semshift/pca.hpp"
#include "semshift/pipeline.hpp"
#include "semshift/store.hpp"
#include "semshift/synth.hpp"

namespace fs = std::filesystem;
using namespace semshift;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

fs::path default_out_dir() {
    if (const char* env = std::getenv("SEMSHIFT_OUT_DIR"); env && *env) return env;
    return "semshift-out";
}

// Writes to `path`, or stdout for "-".
template <class F>
void with_output(const std::string& path, F&& write) {
    if (path == "-") {
        write(std::cout);
        std::cout.flush();
        return;
    }
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write(out);
    if (!out) throw IoError("failed writing " + path);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::vector<ClusterRecord> read_record_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("clustering directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<ClusterRecord> records;
    records.reserve(files.size());
    for (const auto& f : files) records.push_back(read_record_file(f));
    return records;
}

WordId lookup(const EmbeddingStore& store, const std::string& surface) {
    const auto id = store.find_word(surface);
    if (!id) throw LookupError("word '" + surface + "' not in store");
    return *id;
}

// Clustering and scoring flags shared by `cluster` and `run`.
struct ClusterFlags {
    std::string method;
    std::optional<int> k;
    std::optional<std::uint64_t> seed;
    std::optional<double> damping;
    std::optional<int> max_iter;
    std::optional<int> convergence_iter;
    std::optional<std::string> preference;
    bool tie_noise = false;
    std::optional<std::size_t> max_occurrences;
    std::optional<unsigned> jobs;
    std::string config_path;

    void attach(CLI::App& app, bool allow_averaging) {
        app.add_option("--method", method,
                       allow_averaging ? "ap, kmeans, two-stage-ap, two-stage-kmeans or averaging"
                                       : "ap, kmeans, two-stage-ap or two-stage-kmeans");
        app.add_option("--k", k, "clusters for k-means");
        app.add_option("--seed", seed, "base seed");
        app.add_option("--damping", damping, "affinity propagation damping in [0.5, 1)");
        app.add_option("--max-iter", max_iter, "iteration cap (AP sweeps or Lloyd iterations)");
        app.add_option("--convergence-iter", convergence_iter, "AP sweeps with a stable exemplar set");
        app.add_option("--preference", preference, "AP preference: a number or 'median'");
        app.add_flag("--tie-noise", tie_noise, "perturb AP similarities with seeded noise");
        app.add_option("--max-occurrences", max_occurrences, "subsample words above this many occurrences (0: off)");
        app.add_option("-j,--jobs", jobs, "worker threads");
        app.add_option("--config", config_path, "JSON file with pipeline settings; flags take precedence");
    }

    void apply(PipelineConfig& config) const {
        if (!config_path.empty()) pipeline_config_from_json(read_json_file(config_path), config);
        if (!method.empty()) config.method = method;
        if (config.method != "averaging") apply_method_tag(config.clustering, config.method);
        auto& c = config.clustering;
        if (k) c.k = *k;
        if (seed) config.seed = *seed;
        if (damping) c.ap_damping = *damping;
        if (max_iter) {
            c.ap_max_iter = *max_iter;
            c.kmeans_max_iter = *max_iter;
        }
        if (convergence_iter) c.ap_convergence_iter = *convergence_iter;
        if (preference) {
            if (*preference == "median") {
                c.ap_preference.reset();
            } else if (const auto v = parse_double(*preference)) {
                c.ap_preference = *v;
            } else {
                throw ParameterError("--preference must be a number or 'median'");
            }
        }
        if (tie_noise) c.ap_tie_noise = true;
        if (max_occurrences) c.max_occurrences = *max_occurrences;
        if (jobs) config.jobs = *jobs;
        config.validate();
    }
};

int run_cli(int argc, char** argv) {
    CLI::App app{"Semantic shift detection from contextual token embeddings"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic store with known drift");
    std::string synth_store;
    std::string synth_truth;
    std::string synth_specs_in;
    std::string synth_specs_out;
    std::uint64_t synth_seed = 0;
    synth->add_option("-o,--store", synth_store, "output .embs path")->required();
    synth->add_option("--truth", synth_truth, "ground-truth TSV (default: <store>.truth.tsv)");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--specs", synth_specs_in, "drift spec JSON to generate from (default: built-in suite)");
    synth->add_option("--write-specs", synth_specs_out, "also write the specs used as JSON");

    // select
    auto* select = app.add_subcommand("select", "rank words by a shift metric and keep the top fraction");
    std::string select_store;
    std::string select_metric = "averaging";
    std::string select_scoring = "first-last";
    double select_fraction = 1.0;
    fs::path select_out = default_out_dir();
    unsigned select_jobs = 1;
    select->add_option("-s,--store", select_store, "input .embs")->required();
    select->add_option("--metric", select_metric, "variation, variation_by_slice, averaging or averaging_by_slice");
    select->add_option("--fraction", select_fraction, "fraction of words kept, in (0, 1]");
    select->add_option("--scoring", select_scoring, "first-last or all-slices (decides slice coverage needed)");
    select->add_option("-o,--out-dir", select_out, "output directory");
    select->add_option("-j,--jobs", select_jobs, "worker threads");

    // cluster
    auto* cluster = app.add_subcommand("cluster", "cluster each target word's occurrences");
    std::string cluster_store;
    std::string cluster_targets;
    std::vector<std::string> cluster_words_list;
    fs::path cluster_out = default_out_dir();
    ClusterFlags cluster_flags;
    cluster->add_option("-s,--store", cluster_store, "input .embs")->required();
    cluster->add_option("--targets", cluster_targets, "file with one word per line (default: all eligible words)");
    cluster->add_option("--word", cluster_words_list, "word to cluster (repeatable)");
    cluster->add_option("-o,--out-dir", cluster_out, "output directory; records go to <dir>/clusters");
    cluster_flags.attach(*cluster, false);

    // score
    auto* score = app.add_subcommand("score", "change scores from clustering records or the averaging baseline");
    std::string score_store;
    std::string score_clusters;
    std::string score_targets;
    std::string score_scoring = "first-last";
    bool score_averaging = false;
    std::string score_out;
    unsigned score_jobs = 1;
    score->add_option("-s,--store", score_store, "input .embs (slice table, or vectors for --averaging)")->required();
    score->add_option("--clusters", score_clusters, "directory of clustering records (default: <out-dir>/clusters)");
    score->add_flag("--averaging", score_averaging, "score with the averaging baseline instead of clusters");
    score->add_option("--targets", score_targets, "words to score with --averaging (default: all eligible)");
    score->add_option("--scoring", score_scoring, "first-last or all-slices");
    score->add_option("-o,--out", score_out, "scores TSV (default: <out-dir>/scores.tsv, '-' for stdout)");
    score->add_option("-j,--jobs", score_jobs, "worker threads");

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "correlate change scores with gold annotations");
    std::string eval_scores;
    std::string eval_gold;
    std::string eval_method;
    std::string eval_store;
    std::string eval_out;
    evaluate_cmd->add_option("--scores", eval_scores, "scores TSV")->required();
    evaluate_cmd->add_option("--gold", eval_gold, "gold TSV with word and score columns")->required();
    evaluate_cmd->add_option("--method", eval_method, "method tag to evaluate when scores hold several");
    evaluate_cmd->add_option("-s,--store", eval_store, "store whose multi-piece words are reported as excluded");
    evaluate_cmd->add_option("-o,--out", eval_out, "write the report as JSON");

    // pca
    auto* pca = app.add_subcommand("pca", "2-D PCA of one word's occurrences, tagged by cluster and slice");
    std::string pca_store;
    std::string pca_word;
    std::string pca_record;
    std::string pca_out = "-";
    ClusterFlags pca_flags;
    pca->add_option("-s,--store", pca_store, "input .embs")->required();
    pca->add_option("-w,--word", pca_word, "word to project")->required();
    pca->add_option("--record", pca_record, "clustering record for the word (default: cluster it now)");
    pca->add_option("-o,--out", pca_out, "CSV output ('-' for stdout)");
    pca_flags.attach(*pca, false);

    // run
    auto* run = app.add_subcommand("run", "full pipeline: select, cluster, score, evaluate");
    std::string run_store;
    std::string run_gold;
    std::string run_metric;
    std::string run_scoring;
    std::optional<double> run_fraction;
    std::string run_out;
    ClusterFlags run_flags;
    run->add_option("-s,--store", run_store, "input .embs");
    run->add_option("--gold", run_gold, "gold TSV; enables the evaluate stage");
    run->add_option("--metric", run_metric, "target-selection metric");
    run->add_option("--fraction", run_fraction, "fraction of words kept, in (0, 1]");
    run->add_option("--scoring", run_scoring, "first-last or all-slices");
    run->add_option("-o,--out-dir", run_out, "output directory (default: $SEMSHIFT_OUT_DIR or semshift-out)");
    run_flags.attach(*run, true);

    // figure
    auto* figure = app.add_subcommand("figure", "figure data as CSV");
    figure->require_subcommand(1);
    auto* fig_freq = figure->add_subcommand("freq", "clusters per word against frequency");
    std::string freq_clusters;
    std::string freq_out = "-";
    fig_freq->add_option("--clusters", freq_clusters, "directory of clustering records")->required();
    fig_freq->add_option("-o,--out", freq_out, "CSV output ('-' for stdout)");
    auto* fig_epochs = figure->add_subcommand("epochs", "Spearman against fine-tuning epoch");
    std::string epochs_dir;
    std::string epochs_out = "-";
    fig_epochs->add_option("--reports", epochs_dir, "directory of epoch-named evaluation reports")->required();
    fig_epochs->add_option("-o,--out", epochs_out, "CSV output ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    if (*synth) {
        std::vector<DriftSpec> specs;
        std::uint32_t d = kDefaultSuiteDimension;
        std::vector<std::string> labels;
        if (synth_specs_in.empty()) {
            specs = default_suite_specs(synth_seed);
            labels = {"1960s", "1990s"};
        } else {
            specs = specs_from_json(read_json_file(synth_specs_in), d);
        }
        const auto suite = generate(specs, d, synth_seed, labels);
        StoreMetadata meta{"synthetic (seed " + std::to_string(synth_seed) + ")", "none", 0, "none"};
        write_store_file(synth_store, suite.store, meta);
        const fs::path truth = synth_truth.empty() ? fs::path(synth_store).replace_extension(".truth.tsv") : fs::path(synth_truth);
        write_truth_file(truth, suite.truth);
        if (!synth_specs_out.empty()) write_json_file(synth_specs_out, specs_to_json(specs, d));
        std::printf("%zu words, %zu occurrences -> %s\n", suite.store.words().size(), suite.store.occurrence_count(),
                    synth_store.c_str());
        return 0;
    }

    if (*select) {
        if (select_jobs == 0) throw ParameterError("jobs must be at least 1");
        const auto store = read_store_file(select_store);
        const auto sel = select_words(store, parse_scoring_mode(select_scoring), parse_metric(select_metric),
                                      select_fraction, select_jobs);
        ensure_dir(select_out);
        auto sorted = sel.metrics;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.word < b.word; });
        with_output((select_out / "metrics.tsv").string(), [&](std::ostream& o) { write_metrics(o, sorted); });
        with_output((select_out / "targets.txt").string(), [&](std::ostream& o) {
            for (const auto& w : sel.targets.words) o << w << '\n';
        });
        for (const auto& s : sel.skipped) std::fprintf(stderr, "skipped %s: %s\n", s.word.c_str(), s.reason.c_str());
        std::printf("%zu of %zu words selected -> %s\n", sel.targets.words.size(), sel.metrics.size(),
                    (select_out / "targets.txt").c_str());
        return 0;
    }

    if (*cluster) {
        PipelineConfig config;
        cluster_flags.apply(config);
        if (config.method == "averaging") throw ParameterError("cluster needs a clustering method");
        const auto store = read_store_file(cluster_store);
        std::vector<WordId> words;
        if (!cluster_words_list.empty()) {
            for (const auto& w : cluster_words_list) words.push_back(lookup(store, w));
        } else if (!cluster_targets.empty()) {
            for (const auto& w : read_lines(cluster_targets)) words.push_back(lookup(store, w));
        } else {
            words = eligible_words(store);
        }
        std::sort(words.begin(), words.end());
        words.erase(std::unique(words.begin(), words.end()), words.end());
        const auto records = cluster_words(store, words, config.clustering, config.seed, config.jobs);
        const auto dir = cluster_out / "clusters";
        ensure_dir(dir);
        std::size_t unconverged = 0;
        for (const auto& r : records) {
            write_record_file(dir / record_file_name(r.word), r);
            unconverged += r.converged ? 0 : 1;
        }
        std::printf("%zu words clustered (%zu did not converge) -> %s\n", records.size(), unconverged, dir.c_str());
        return 0;
    }

    if (*score) {
        if (score_jobs == 0) throw ParameterError("jobs must be at least 1");
        const auto store = read_store_file(score_store);
        const auto mode = parse_scoring_mode(score_scoring);
        std::vector<ChangeScore> scores;
        if (score_averaging) {
            std::vector<WordId> words;
            if (!score_targets.empty()) {
                for (const auto& w : read_lines(score_targets)) words.push_back(lookup(store, w));
            } else {
                words = eligible_words(store);
            }
            scores.resize(words.size());
            parallel_for(words.size(), score_jobs, [&](std::size_t i) { scores[i] = averaging_score(store, words[i], mode); });
        } else {
            const fs::path dir = score_clusters.empty() ? default_out_dir() / "clusters" : fs::path(score_clusters);
            for (const auto& r : read_record_dir(dir)) scores.push_back(score_record(r, store.slices().size(), mode));
        }
        scores = rank_words(std::move(scores));
        const std::string out = score_out.empty() ? (default_out_dir() / "scores.tsv").string() : score_out;
        with_output(out, [&](std::ostream& o) { write_scores(o, scores); });
        if (out != "-") std::printf("%zu words scored -> %s\n", scores.size(), out.c_str());
        return 0;
    }

    if (*evaluate_cmd) {
        const auto scores = read_scores_file(eval_scores);
        const auto gold = load_gold_file(eval_gold);
        std::vector<std::string> multi;
        if (!eval_store.empty()) {
            for (const auto& w : read_store_file(eval_store).words()) {
                if (!w.is_single_piece) multi.push_back(w.surface);
            }
        }
        const auto report =
            evaluate(scores, gold, eval_method.empty() ? std::nullopt : std::optional<std::string>(eval_method), multi);
        if (!eval_out.empty()) write_json_file(eval_out, report_to_json(report));
        std::cout << format_report(report);
        return 0;
    }

    if (*pca) {
        const auto store = read_store_file(pca_store);
        const auto word = lookup(store, pca_word);
        ClusterRecord record;
        if (!pca_record.empty()) {
            record = read_record_file(pca_record);
        } else {
            PipelineConfig config;
            config.clustering.max_occurrences = 0;
            pca_flags.apply(config);
            config.clustering.seed = word_seed(config.seed, word);
            record = cluster_word(store, word, config.clustering);
        }
        const auto points = cluster_scatter(store, record);
        with_output(pca_out, [&](std::ostream& o) { write_cluster_scatter(o, points); });
        const auto proj = pca_2d(word_points(store, word));
        std::fprintf(stderr, "explained variance ratio: %.4f %.4f\n", proj.explained_variance_ratio[0],
                     proj.explained_variance_ratio[1]);
        return 0;
    }

    if (*run) {
        PipelineConfig config;
        config.output_dir = default_out_dir();
        run_flags.apply(config);
        if (!run_store.empty()) config.store_path = run_store;
        if (config.store_path.empty()) throw ParameterError("run needs --store (or store_path in --config)");
        if (!run_gold.empty()) config.gold_path = run_gold;
        if (!run_metric.empty()) config.target_metric = parse_metric(run_metric);
        if (run_fraction) config.threshold_fraction = *run_fraction;
        if (!run_scoring.empty()) config.scoring = parse_scoring_mode(run_scoring);
        if (!run_out.empty()) config.output_dir = run_out;
        const auto out = run_pipeline(config);
        std::printf("%zu words scored -> %s\n", out.scores.size(), (config.output_dir / "scores.tsv").c_str());
        if (out.report) std::cout << format_report(*out.report);
        return 0;
    }

    if (*fig_freq) {
        const auto rows = frequency_scatter(read_record_dir(freq_clusters));
        with_output(freq_out, [&](std::ostream& o) { write_frequency_scatter(o, rows); });
        return 0;
    }
    if (*fig_epochs) {
        const auto rows = epoch_curve(epochs_dir);
        with_output(epochs_out, [&](std::ostream& o) { write_epoch_curve(o, rows); });
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
}
