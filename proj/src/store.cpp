#include "semshift/store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "semshift/error.hpp"

namespace semshift {

namespace {

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t> take() && { return std::move(out_); }

private:
    template <typename T>
    void put(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    void require(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(std::string("truncated payload while reading ") + what, pos_);
        }
    }

    std::uint8_t u8() { return get<std::uint8_t>("u8"); }
    std::uint16_t u16() { return get<std::uint16_t>("u16"); }
    std::uint32_t u32() { return get<std::uint32_t>("u32"); }
    std::uint64_t u64() { return get<std::uint64_t>("u64"); }

    std::string string16(const char* what) {
        const std::size_t start = pos_;
        require(2, what);
        const std::uint16_t len = u16();
        if (remaining() < len) {
            throw FormatError(std::string("truncated payload while reading ") + what, start);
        }
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }

    // Caller checks bounds.
    float f32_unchecked() {
        std::uint32_t bits = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            bits |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += 4;
        return std::bit_cast<float>(bits);
    }

private:
    template <typename T>
    T get(const char* what) {
        require(sizeof(T), what);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
        }
        pos_ += sizeof(T);
        return v;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'E', 'M', 'B', 'S'};

}  // namespace

// ---------------------------------------------------------------------------
// EmbeddingStore

OccurrenceView EmbeddingStore::occurrence(std::size_t index) const {
    if (index >= word_ids_.size()) {
        throw LookupError("occurrence index " + std::to_string(index) + " out of range");
    }
    return {word_ids_[index], slice_ids_[index],
            std::span<const float>(values_).subspan(index * dimension_, dimension_)};
}

std::pair<std::size_t, std::size_t> EmbeddingStore::word_range(WordId word) const {
    if (word >= words_.size()) {
        throw LookupError("unknown word id " + std::to_string(word));
    }
    return {word_offsets_[word], word_offsets_[word + 1]};
}

std::vector<std::pair<SliceId, std::span<const float>>> EmbeddingStore::occurrences_of(WordId word) const {
    const auto [begin, end] = word_range(word);
    std::vector<std::pair<SliceId, std::span<const float>>> out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        out.emplace_back(slice_ids_[i], std::span<const float>(values_).subspan(i * dimension_, dimension_));
    }
    return out;
}

std::optional<WordId> EmbeddingStore::find_word(std::string_view surface) const {
    for (const auto& w : words_) {
        if (w.surface == surface) return w.id;
    }
    return std::nullopt;
}

std::vector<std::size_t> EmbeddingStore::slice_counts(WordId word) const {
    const auto [begin, end] = word_range(word);
    std::vector<std::size_t> counts(slices_.size(), 0);
    for (std::size_t i = begin; i < end; ++i) ++counts[slice_ids_[i]];
    return counts;
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
    if (dimension_ != other.dimension_ || slices_ != other.slices_ || words_ != other.words_ ||
        word_ids_ != other.word_ids_ || slice_ids_ != other.slice_ids_ ||
        values_.size() != other.values_.size()) {
        return false;
    }
    return std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(float)) == 0;
}

// ---------------------------------------------------------------------------
// StoreBuilder

StoreBuilder::StoreBuilder(std::uint32_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw ValidationError("store dimension must be positive");
}

SliceId StoreBuilder::add_slice(std::string label) {
    return add_slice(std::move(label), static_cast<std::uint16_t>(slices_.size()));
}

SliceId StoreBuilder::add_slice(std::string label, std::uint16_t order) {
    if (slices_.size() > std::numeric_limits<SliceId>::max()) {
        throw ValidationError("too many time slices");
    }
    const auto id = static_cast<SliceId>(slices_.size());
    slices_.push_back({id, order, std::move(label)});
    return id;
}

WordId StoreBuilder::add_word(std::string surface, bool is_single_piece) {
    const auto id = static_cast<WordId>(words_.size());
    words_.push_back({id, std::move(surface), is_single_piece});
    return id;
}

void StoreBuilder::add_occurrence(WordId word, SliceId slice, std::span<const float> vector) {
    const std::size_t index = word_ids_.size();
    if (vector.size() != dimension_) {
        throw ValidationError("occurrence " + std::to_string(index) + ": vector length " +
                              std::to_string(vector.size()) + " != dimension " + std::to_string(dimension_));
    }
    word_ids_.push_back(word);
    slice_ids_.push_back(slice);
    values_.insert(values_.end(), vector.begin(), vector.end());
}

void StoreBuilder::add_occurrence(WordId word, SliceId slice, std::span<const double> vector) {
    std::vector<float> narrowed(vector.begin(), vector.end());
    add_occurrence(word, slice, std::span<const float>(narrowed));
}

EmbeddingStore StoreBuilder::build() && {
    for (std::size_t i = 0; i < slices_.size(); ++i) {
        const auto& s = slices_[i];
        if (s.label.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw ValidationError("slice " + std::to_string(i) + ": label too long");
        }
        if (i > 0 && s.order <= slices_[i - 1].order) {
            throw ValidationError("slice " + std::to_string(i) + ": order must increase with id");
        }
    }
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < words_.size(); ++i) {
        const auto& w = words_[i];
        if (w.surface.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw ValidationError("word " + std::to_string(i) + ": surface too long");
        }
        if (!seen.insert(w.surface).second) {
            throw ValidationError("word " + std::to_string(i) + ": duplicate surface '" + w.surface + "'");
        }
    }
    const std::size_t n = word_ids_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (word_ids_[i] >= words_.size()) {
            throw ValidationError("occurrence " + std::to_string(i) + ": unknown word id " +
                                  std::to_string(word_ids_[i]));
        }
        if (slice_ids_[i] >= slices_.size()) {
            throw ValidationError("occurrence " + std::to_string(i) + ": unknown slice id " +
                                  std::to_string(slice_ids_[i]));
        }
        for (std::size_t j = 0; j < dimension_; ++j) {
            if (!std::isfinite(values_[i * dimension_ + j])) {
                throw ValidationError("occurrence " + std::to_string(i) + ": non-finite vector entry");
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (word_ids_[a] != word_ids_[b]) return word_ids_[a] < word_ids_[b];
        return slice_ids_[a] < slice_ids_[b];
    });

    EmbeddingStore store;
    store.dimension_ = dimension_;
    store.slices_ = std::move(slices_);
    store.words_ = std::move(words_);
    store.word_ids_.reserve(n);
    store.slice_ids_.reserve(n);
    store.values_.reserve(values_.size());
    for (std::size_t idx : order) {
        store.word_ids_.push_back(word_ids_[idx]);
        store.slice_ids_.push_back(slice_ids_[idx]);
        const auto* src = values_.data() + idx * dimension_;
        store.values_.insert(store.values_.end(), src, src + dimension_);
    }
    store.word_offsets_.assign(store.words_.size() + 1, 0);
    for (WordId w : store.word_ids_) ++store.word_offsets_[w + 1];
    std::partial_sum(store.word_offsets_.begin(), store.word_offsets_.end(), store.word_offsets_.begin());
    return store;
}

// ---------------------------------------------------------------------------
// Codec

std::vector<std::uint8_t> encode_store(const EmbeddingStore& store) {
    const auto& slices = store.slices();
    const auto& words = store.words();
    if (slices.size() > std::numeric_limits<SliceId>::max() + std::size_t{1}) {
        throw ValidationError("too many time slices for the slice table");
    }
    ByteWriter w;
    w.bytes(std::string_view(kMagic, 4));
    w.u8(kStoreVersion);
    w.u8(0);
    w.u8(0);
    w.u8(0);
    w.u32(store.dimension());
    w.u32(static_cast<std::uint32_t>(slices.size()));
    w.u32(static_cast<std::uint32_t>(words.size()));
    w.u64(store.occurrence_count());
    for (const auto& s : slices) {
        w.u16(s.id);
        w.u16(s.order);
        w.u16(static_cast<std::uint16_t>(s.label.size()));
        w.bytes(s.label);
    }
    for (const auto& word : words) {
        w.u32(word.id);
        w.u8(word.is_single_piece ? 1 : 0);
        w.u16(static_cast<std::uint16_t>(word.surface.size()));
        w.bytes(word.surface);
    }
    for (std::size_t i = 0; i < store.occurrence_count(); ++i) {
        const auto occ = store.occurrence(i);
        w.u32(occ.word_id);
        w.u16(occ.slice_id);
        for (float v : occ.vector) {
            if (!std::isfinite(v)) {
                throw ValidationError("occurrence " + std::to_string(i) + ": non-finite vector entry");
            }
            w.f32(v);
        }
    }
    return std::move(w).take();
}

EmbeddingStore decode_store(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("bad magic, expected \"EMBS\"", 0);
    }
    r.require(kStoreHeaderSize, "header");
    for (int i = 0; i < 4; ++i) r.u8();
    const std::size_t version_offset = r.offset();
    const std::uint8_t version = r.u8();
    if (version != kStoreVersion) {
        throw UnsupportedVersionError("unsupported EMBS version " + std::to_string(version), version_offset);
    }
    r.u8();
    r.u8();
    r.u8();
    const std::uint32_t dimension = r.u32();
    if (dimension == 0) throw FormatError("dimension must be positive", 8);
    const std::uint32_t n_slices = r.u32();
    const std::uint32_t n_words = r.u32();
    const std::uint64_t n_occurrences = r.u64();

    StoreBuilder builder(dimension);
    for (std::uint32_t i = 0; i < n_slices; ++i) {
        const std::size_t at = r.offset();
        r.require(4, "slice table");
        const std::uint16_t id = r.u16();
        const std::uint16_t order = r.u16();
        std::string label = r.string16("slice label");
        if (id != i) throw FormatError("slice ids must be dense and ordered", at);
        builder.add_slice(std::move(label), order);
    }
    for (std::uint32_t i = 0; i < n_words; ++i) {
        const std::size_t at = r.offset();
        r.require(5, "word table");
        const std::uint32_t id = r.u32();
        const std::uint8_t flags = r.u8();
        std::string surface = r.string16("word surface");
        if (id != i) throw FormatError("word ids must be dense and ordered", at);
        builder.add_word(std::move(surface), (flags & 1u) != 0);
    }

    const std::size_t record_size = 6 + std::size_t{4} * dimension;
    std::vector<float> vec(dimension);
    for (std::uint64_t i = 0; i < n_occurrences; ++i) {
        const std::size_t at = r.offset();
        if (r.remaining() < record_size) {
            throw FormatError("truncated record " + std::to_string(i), at);
        }
        const std::uint32_t word = r.u32();
        const std::uint16_t slice = r.u16();
        if (word >= n_words) throw FormatError("record references unknown word id", at);
        if (slice >= n_slices) throw FormatError("record references unknown slice id", at);
        for (std::uint32_t j = 0; j < dimension; ++j) {
            const std::size_t value_at = r.offset();
            vec[j] = r.f32_unchecked();
            if (!std::isfinite(vec[j])) throw FormatError("non-finite vector entry", value_at);
        }
        builder.add_occurrence(word, slice, std::span<const float>(vec));
    }
    if (r.remaining() != 0) {
        throw FormatError("trailing bytes after last record", r.offset());
    }
    try {
        return std::move(builder).build();
    } catch (const ValidationError& e) {
        throw FormatError(e.what(), kStoreHeaderSize);
    }
}

std::uint64_t write_store(const EmbeddingStore& store, std::ostream& sink) {
    const auto bytes = encode_store(store);
    sink.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!sink) throw IoError("failed writing store bytes");
    return bytes.size();
}

EmbeddingStore read_store(std::istream& source) {
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
    if (source.bad()) throw IoError("failed reading store bytes");
    return decode_store(bytes);
}

std::filesystem::path metadata_path(const std::filesystem::path& store_path) {
    auto p = store_path;
    p.replace_extension(".meta.json");
    return p;
}

void write_metadata(const std::filesystem::path& path, const StoreMetadata& metadata) {
    nlohmann::ordered_json j;
    j["source_corpus"] = metadata.source_corpus;
    j["extractor_model"] = metadata.extractor_model;
    j["fine_tune_epochs"] = metadata.fine_tune_epochs;
    j["layer_aggregation"] = metadata.layer_aggregation;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

StoreMetadata read_metadata(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        StoreMetadata m;
        m.source_corpus = j.value("source_corpus", "");
        m.extractor_model = j.value("extractor_model", "");
        m.fine_tune_epochs = j.value("fine_tune_epochs", 0);
        m.layer_aggregation = j.value("layer_aggregation", "");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad metadata JSON: ") + e.what(), 0);
    }
}

void write_store_file(const std::filesystem::path& path, const EmbeddingStore& store,
                      const std::optional<StoreMetadata>& metadata) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_store(store, out);
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
    if (metadata) write_metadata(metadata_path(path), *metadata);
}

EmbeddingStore read_store_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_store(in);
}

EmbeddingStore merge_stores(const EmbeddingStore& a, const EmbeddingStore& b) {
    if (a.dimension() != b.dimension()) {
        throw IncompatibleError("cannot merge stores of dimension " + std::to_string(a.dimension()) + " and " +
                                std::to_string(b.dimension()));
    }
    if (a.slices() != b.slices()) throw IncompatibleError("cannot merge stores with different slice tables");

    StoreBuilder builder(a.dimension());
    for (const auto& s : a.slices()) builder.add_slice(s.label, s.order);
    std::unordered_map<std::string, WordId> by_surface;
    for (const auto& w : a.words()) {
        by_surface.emplace(w.surface, builder.add_word(w.surface, w.is_single_piece));
    }
    std::vector<WordId> remap(b.words().size());
    for (const auto& w : b.words()) {
        auto it = by_surface.find(w.surface);
        if (it == by_surface.end()) {
            remap[w.id] = builder.add_word(w.surface, w.is_single_piece);
        } else {
            if (a.words()[it->second].is_single_piece != w.is_single_piece) {
                throw IncompatibleError("word '" + w.surface + "' has conflicting single-piece flags");
            }
            remap[w.id] = it->second;
        }
    }
    for (std::size_t i = 0; i < a.occurrence_count(); ++i) {
        const auto occ = a.occurrence(i);
        builder.add_occurrence(occ.word_id, occ.slice_id, occ.vector);
    }
    for (std::size_t i = 0; i < b.occurrence_count(); ++i) {
        const auto occ = b.occurrence(i);
        builder.add_occurrence(remap[occ.word_id], occ.slice_id, occ.vector);
    }
    return std::move(builder).build();
}

}  // namespace semshift
