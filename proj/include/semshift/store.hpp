#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace semshift {

using WordId = std::uint32_t;
using SliceId = std::uint16_t;

struct TimeSlice {
    SliceId id = 0;
    std::uint16_t order = 0;
    std::string label;

    bool operator==(const TimeSlice&) const = default;
};

struct WordEntry {
    WordId id = 0;
    std::string surface;
    /// False when the embedding model splits the word into several pieces;
    /// such words carry no occurrences and are excluded from evaluation.
    bool is_single_piece = true;

    bool operator==(const WordEntry&) const = default;
};

/// Non-owning view of one stored occurrence.
struct OccurrenceView {
    WordId word_id;
    SliceId slice_id;
    std::span<const float> vector;
};

/// Provenance written next to a store as `<basename>.meta.json`.
struct StoreMetadata {
    std::string source_corpus;
    std::string extractor_model;
    int fine_tune_epochs = 0;
    std::string layer_aggregation;

    bool operator==(const StoreMetadata&) const = default;
};

class StoreBuilder;

/// Immutable container of token embeddings plus word and slice tables.
///
/// Occurrences are kept grouped by word id, then slice id (insertion order is
/// preserved inside a group), so all occurrences of a word form one contiguous
/// run. Vectors are single precision; equality compares raw bit patterns.
class EmbeddingStore {
public:
    EmbeddingStore() = default;

    std::uint32_t dimension() const noexcept { return dimension_; }
    const std::vector<TimeSlice>& slices() const noexcept { return slices_; }
    const std::vector<WordEntry>& words() const noexcept { return words_; }
    std::size_t occurrence_count() const noexcept { return word_ids_.size(); }

    OccurrenceView occurrence(std::size_t index) const;

    /// Half-open index range of the word's occurrences.
    std::pair<std::size_t, std::size_t> word_range(WordId word) const;

    /// All occurrences of `word` in store order. Throws LookupError for an
    /// unknown id.
    std::vector<std::pair<SliceId, std::span<const float>>> occurrences_of(WordId word) const;

    std::optional<WordId> find_word(std::string_view surface) const;

    /// Per-slice occurrence counts of one word, indexed by slice id.
    std::vector<std::size_t> slice_counts(WordId word) const;

    bool operator==(const EmbeddingStore& other) const;

private:
    friend class StoreBuilder;

    std::uint32_t dimension_ = 0;
    std::vector<TimeSlice> slices_;
    std::vector<WordEntry> words_;
    std::vector<WordId> word_ids_;
    std::vector<SliceId> slice_ids_;
    std::vector<float> values_;
    std::vector<std::size_t> word_offsets_{0};
};

/// Accumulates tables and occurrences, then validates and freezes them.
class StoreBuilder {
public:
    explicit StoreBuilder(std::uint32_t dimension);

    /// Appends a slice; its id is the current slice count.
    SliceId add_slice(std::string label);
    SliceId add_slice(std::string label, std::uint16_t order);
    /// Appends a word; its id is the current word count.
    WordId add_word(std::string surface, bool is_single_piece = true);

    void add_occurrence(WordId word, SliceId slice, std::span<const float> vector);
    void add_occurrence(WordId word, SliceId slice, std::span<const double> vector);

    std::uint32_t dimension() const noexcept { return dimension_; }
    std::size_t word_count() const noexcept { return words_.size(); }

    /// Validates every invariant and returns the store. Throws
    /// ValidationError naming the first offending record.
    EmbeddingStore build() &&;

private:
    std::uint32_t dimension_;
    std::vector<TimeSlice> slices_;
    std::vector<WordEntry> words_;
    std::vector<WordId> word_ids_;
    std::vector<SliceId> slice_ids_;
    std::vector<float> values_;
};

/// Size in bytes of the fixed EMBS header.
inline constexpr std::size_t kStoreHeaderSize = 28;
inline constexpr std::uint8_t kStoreVersion = 1;

std::vector<std::uint8_t> encode_store(const EmbeddingStore& store);
EmbeddingStore decode_store(std::span<const std::uint8_t> bytes);

/// Writes the EMBS v1 encoding; returns the number of bytes written.
std::uint64_t write_store(const EmbeddingStore& store, std::ostream& sink);
EmbeddingStore read_store(std::istream& source);

void write_store_file(const std::filesystem::path& path, const EmbeddingStore& store,
                      const std::optional<StoreMetadata>& metadata = std::nullopt);
EmbeddingStore read_store_file(const std::filesystem::path& path);

std::filesystem::path metadata_path(const std::filesystem::path& store_path);
void write_metadata(const std::filesystem::path& path, const StoreMetadata& metadata);
StoreMetadata read_metadata(const std::filesystem::path& path);

/// Union of word tables by surface; b's occurrences are appended with
/// remapped word ids. Requires equal dimension and identical slice tables.
EmbeddingStore merge_stores(const EmbeddingStore& a, const EmbeddingStore& b);

}  // namespace semshift
