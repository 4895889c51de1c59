#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "semshift/clustering.hpp"
#include "semshift/divergence.hpp"
#include "semshift/error.hpp"
#include "semshift/eval.hpp"
#include "semshift/formats.hpp"
#include "semshift/pca.hpp"
#include "semshift/pipeline.hpp"
#include "semshift/shift_metrics.hpp"
#include "semshift/store.hpp"
#include "semshift/synth.hpp"

namespace py = pybind11;
using namespace semshift;

namespace {

using FloatRows = py::array_t<float, py::array::c_style | py::array::forcecast>;

WordId word_id(const EmbeddingStore& store, const py::object& word) {
    if (py::isinstance<py::str>(word)) {
        const auto surface = word.cast<std::string>();
        const auto id = store.find_word(surface);
        if (!id) throw LookupError("word '" + surface + "' not in store");
        return *id;
    }
    return word.cast<WordId>();
}

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

EmbeddingStore build_store(std::uint32_t dimension, const std::vector<std::string>& slice_labels,
                           const std::vector<std::string>& words, const std::vector<bool>& single_piece,
                           const std::vector<WordId>& word_ids, const std::vector<SliceId>& slice_ids,
                           const FloatRows& vectors) {
    if (!single_piece.empty() && single_piece.size() != words.size()) {
        throw ValidationError("single_piece must have one flag per word");
    }
    const auto n = word_ids.size();
    if (slice_ids.size() != n) throw ValidationError("word_ids and slice_ids differ in length");
    if (vectors.ndim() != 2 || static_cast<std::size_t>(vectors.shape(0)) != n ||
        static_cast<std::uint32_t>(vectors.shape(1)) != dimension) {
        throw ValidationError("vectors must have shape (occurrences, dimension)");
    }
    StoreBuilder b(dimension);
    for (const auto& label : slice_labels) b.add_slice(label);
    for (std::size_t w = 0; w < words.size(); ++w) b.add_word(words[w], single_piece.empty() || single_piece[w]);
    const float* data = vectors.data();
    for (std::size_t i = 0; i < n; ++i) {
        b.add_occurrence(word_ids[i], slice_ids[i], std::span<const float>(data + i * dimension, dimension));
    }
    return std::move(b).build();
}

ClusteringConfig clustering_config(const std::string& method, int k, std::uint64_t seed,
                                   const std::optional<double>& preference, double damping, int max_iter,
                                   int convergence_iter, bool tie_noise) {
    ClusteringConfig c;
    apply_method_tag(c, method);
    c.k = k;
    c.seed = seed;
    c.ap_preference = preference;
    c.ap_damping = damping;
    c.ap_max_iter = max_iter;
    c.kmeans_max_iter = max_iter == 200 ? c.kmeans_max_iter : max_iter;
    c.ap_convergence_iter = convergence_iter;
    c.ap_tie_noise = tie_noise;
    c.validate();
    return c;
}

py::dict result_dict(const ClusteringResult& r) {
    py::dict d;
    d["labels"] = r.labels;
    d["n_clusters"] = r.n_clusters;
    d["centroids"] = r.centroids;
    d["exemplars"] = r.exemplar_indices;
    d["converged"] = r.converged;
    d["iterations"] = r.iterations_run;
    d["inertia"] = r.inertia;
    return d;
}

}  // namespace

PYBIND11_MODULE(_semshift, m) {
    m.doc() = "Semantic shift detection core";
    m.attr("__version__") = kVersion;

    auto base = py::register_exception<Error>(m, "SemshiftError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
    py::register_exception<LookupError>(m, "LookupError", base.ptr());
    py::register_exception<IncompatibleError>(m, "IncompatibleError", base.ptr());
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
    py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
    py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
    py::register_exception<UndefinedScoreError>(m, "UndefinedScoreError", base.ptr());
    py::register_exception<StageError>(m, "StageError", base.ptr());
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<EmbeddingStore>(m, "Store")
        .def_property_readonly("dimension", &EmbeddingStore::dimension)
        .def_property_readonly("occurrence_count", &EmbeddingStore::occurrence_count)
        .def_property_readonly("slices",
                               [](const EmbeddingStore& s) {
                                   std::vector<std::string> out;
                                   for (const auto& t : s.slices()) out.push_back(t.label);
                                   return out;
                               })
        .def_property_readonly("words",
                               [](const EmbeddingStore& s) {
                                   std::vector<std::string> out;
                                   for (const auto& w : s.words()) out.push_back(w.surface);
                                   return out;
                               })
        .def("is_single_piece", [](const EmbeddingStore& s, const py::object& w) {
            return s.words().at(word_id(s, w)).is_single_piece;
        })
        .def("slice_counts", [](const EmbeddingStore& s, const py::object& w) { return s.slice_counts(word_id(s, w)); })
        .def(
            "points", [](const EmbeddingStore& s, const py::object& w) { return word_points(s, word_id(s, w)); },
            "Occurrence vectors of a word as a float64 (n, d) array, grouped by slice.")
        .def("slice_ids",
             [](const EmbeddingStore& s, const py::object& w) {
                 std::vector<SliceId> out;
                 for (const auto& [slice, vec] : s.occurrences_of(word_id(s, w))) out.push_back(slice);
                 return out;
             })
        .def("to_bytes",
             [](const EmbeddingStore& s) {
                 const auto bytes = encode_store(s);
                 return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
             })
        .def_static("from_bytes",
                    [](const py::bytes& b) {
                        const std::string_view v = b;
                        return decode_store(std::span<const std::uint8_t>(
                            reinterpret_cast<const std::uint8_t*>(v.data()), v.size()));
                    })
        .def("__eq__", [](const EmbeddingStore& a, const EmbeddingStore& b) { return a == b; })
        .def("__len__", &EmbeddingStore::occurrence_count)
        .def("__repr__", [](const EmbeddingStore& s) {
            return "<Store d=" + std::to_string(s.dimension()) + " words=" + std::to_string(s.words().size()) +
                   " slices=" + std::to_string(s.slices().size()) +
                   " occurrences=" + std::to_string(s.occurrence_count()) + ">";
        });

    m.def("build_store", &build_store, py::arg("dimension"), py::arg("slice_labels"), py::arg("words"),
          py::arg("single_piece"), py::arg("word_ids"), py::arg("slice_ids"), py::arg("vectors"),
          "Validate and build a store from per-occurrence word ids, slice ids and an (n, d) vector array.");
    m.def("read_store", &read_store_file, py::arg("path"));
    m.def(
        "write_store",
        [](const std::filesystem::path& path, const EmbeddingStore& store, const py::object& metadata) {
            std::optional<StoreMetadata> meta;
            if (!metadata.is_none()) {
                const auto d = metadata.cast<py::dict>();
                StoreMetadata sm;
                sm.source_corpus = d.contains("source_corpus") ? d["source_corpus"].cast<std::string>() : "";
                sm.extractor_model = d.contains("extractor_model") ? d["extractor_model"].cast<std::string>() : "";
                sm.fine_tune_epochs = d.contains("fine_tune_epochs") ? d["fine_tune_epochs"].cast<int>() : 0;
                sm.layer_aggregation = d.contains("layer_aggregation") ? d["layer_aggregation"].cast<std::string>() : "";
                meta = sm;
            }
            write_store_file(path, store, meta);
        },
        py::arg("path"), py::arg("store"), py::arg("metadata") = py::none());
    m.def("merge_stores", &merge_stores, py::arg("a"), py::arg("b"));

    m.def(
        "metric",
        [](const EmbeddingStore& s, const py::object& w, const std::string& metric) {
            return compute_metric(s, word_id(s, w), parse_metric(metric)).value;
        },
        py::arg("store"), py::arg("word"), py::arg("metric") = "averaging");
    m.def("variation_coefficient", &variation_coefficient, py::arg("points"));
    m.def("cosine_distance", &cosine_distance, py::arg("a"), py::arg("b"));

    m.def(
        "cluster",
        [](const Eigen::MatrixXd& points, const std::string& method, int k, std::uint64_t seed,
           std::optional<double> preference, double damping, int max_iter, int convergence_iter, bool tie_noise) {
            return result_dict(cluster_points(
                points, clustering_config(method, k, seed, preference, damping, max_iter, convergence_iter, tie_noise)));
        },
        py::arg("points"), py::arg("method") = "ap", py::arg("k") = 5, py::arg("seed") = 0,
        py::arg("preference") = py::none(), py::arg("damping") = 0.5, py::arg("max_iter") = 200,
        py::arg("convergence_iter") = 15, py::arg("tie_noise") = false,
        "Cluster the rows of `points`. method: ap, kmeans, two-stage-ap or two-stage-kmeans.");
    m.def("silhouette", &silhouette, py::arg("points"), py::arg("labels"));

    m.def(
        "jsd", [](const std::vector<double>& p, const std::vector<double>& q) { return jsd(p, q); }, py::arg("p"),
        py::arg("q"));
    m.def("jsd_multi", &jsd_multi, py::arg("distributions"));
    m.def(
        "usage_distributions",
        [](const std::vector<int>& labels, const std::vector<SliceId>& slice_ids, int n_clusters, std::size_t n_slices) {
            const auto d = usage_distribution(labels, slice_ids, n_clusters, n_slices);
            py::list out;
            for (std::size_t t = 0; t < d.probabilities.size(); ++t) {
                if (d.present[t]) {
                    out.append(py::cast(d.probabilities[t]));
                } else {
                    out.append(py::none());
                }
            }
            return out;
        },
        py::arg("labels"), py::arg("slice_ids"), py::arg("n_clusters"), py::arg("n_slices") = 0,
        "Per-slice cluster usage probabilities; None for slices without occurrences.");
    m.def(
        "change_score",
        [](const std::vector<int>& labels, const std::vector<SliceId>& slice_ids, int n_clusters, std::size_t n_slices,
           const std::string& mode) {
            return change_score(usage_distribution(labels, slice_ids, n_clusters, n_slices), parse_scoring_mode(mode));
        },
        py::arg("labels"), py::arg("slice_ids"), py::arg("n_clusters"), py::arg("n_slices") = 0,
        py::arg("mode") = "first-last");

    m.def(
        "pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); },
        py::arg("x"), py::arg("y"));
    m.def(
        "spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
        py::arg("x"), py::arg("y"));
    m.def(
        "average_ranks", [](const std::vector<double>& v) { return average_ranks(v); }, py::arg("values"));

    m.def(
        "pca_2d",
        [](const Eigen::MatrixXd& points) {
            const auto p = pca_2d(points);
            return py::make_tuple(p.coordinates, p.components,
                                  py::make_tuple(p.explained_variance_ratio[0], p.explained_variance_ratio[1]));
        },
        py::arg("points"), "Returns (coordinates, components, explained_variance_ratio).");

    m.def(
        "default_suite",
        [](std::uint64_t seed) {
            auto suite = default_suite(seed);
            py::dict truth;
            for (const auto& t : suite.truth) truth[py::str(t.word)] = t.true_drift;
            return py::make_tuple(std::move(suite.store), truth);
        },
        py::arg("seed") = 0, "Returns (store, {word: true_drift}).");
    m.def(
        "generate",
        [](const py::object& specs, std::uint64_t seed, const std::vector<std::string>& slice_labels) {
            std::uint32_t d = 0;
            const auto parsed = specs_from_json(py_to_json(specs), d);
            auto suite = generate(parsed, d, seed, slice_labels);
            py::dict truth;
            for (const auto& t : suite.truth) truth[py::str(t.word)] = t.true_drift;
            return py::make_tuple(std::move(suite.store), truth);
        },
        py::arg("specs"), py::arg("seed") = 0, py::arg("slice_labels") = std::vector<std::string>{},
        "Generate from a spec dict {dimension, words: [{word, senses, mixtures, occurrences_per_slice}]}.");
    m.def(
        "default_suite_specs", [](std::uint64_t seed) { return json_to_py(specs_to_json(default_suite_specs(seed), kDefaultSuiteDimension)); },
        py::arg("seed") = 0);

    m.def(
        "run_pipeline",
        [](const py::dict& config) {
            PipelineConfig c;
            pipeline_config_from_json(py_to_json(config), c);
            RunOutputs out;
            {
                py::gil_scoped_release release;
                out = run_pipeline(c);
            }
            py::dict result;
            py::list scores;
            for (const auto& s : out.scores) scores.append(py::make_tuple(s.word, s.method, s.value));
            result["scores"] = scores;
            result["manifest"] = json_to_py(out.manifest);
            result["report"] = out.report ? json_to_py(report_to_json(*out.report)) : py::none();
            return result;
        },
        py::arg("config"),
        "Run select, cluster, score and (with gold) evaluate. `config` uses the manifest's config keys.");
}
