#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "semshift/eval.hpp"
#include "semshift/formats.hpp"
#include "semshift/pca.hpp"
#include "semshift/store.hpp"

namespace semshift {

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    int cluster = 0;
    std::string slice;
};

/// PCA projection of one word's occurrences, tagged with cluster and slice.
/// The record must hold the word's labels in store order (no subsampling).
std::vector<ScatterPoint> cluster_scatter(const EmbeddingStore& store, const ClusterRecord& record);
void write_cluster_scatter(std::ostream& out, const std::vector<ScatterPoint>& points);

/// One row per record: word, frequency (occurrences clustered), n_clusters.
std::vector<ClusterCount> frequency_scatter(const std::vector<ClusterRecord>& records);
void write_frequency_scatter(std::ostream& out, const std::vector<ClusterCount>& rows);

struct EpochPoint {
    int epoch = 0;
    std::string method;
    double spearman = 0.0;
};

/// Reads every *.json evaluation report in `dir`. The epoch is the first
/// integer in the file name; a file may hold one report or an array.
/// Rows are sorted by method, then epoch.
std::vector<EpochPoint> epoch_curve(const std::filesystem::path& dir);
void write_epoch_curve(std::ostream& out, const std::vector<EpochPoint>& rows);

std::string csv_field(const std::string& text);

}  // namespace semshift
