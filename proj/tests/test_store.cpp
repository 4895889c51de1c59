#include <doctest.h>

#include <bit>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "semshift/error.hpp"
#include "semshift/store.hpp"
#include "semshift/synth.hpp"

using namespace semshift;

namespace {

EmbeddingStore random_store(std::uint64_t seed, std::size_t n_words, std::size_t n_slices, std::size_t per_cell,
                            std::uint32_t d) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.0f, 3.0f);
    StoreBuilder b(d);
    for (std::size_t s = 0; s < n_slices; ++s) b.add_slice("slice" + std::to_string(s));
    for (std::size_t w = 0; w < n_words; ++w) b.add_word("word" + std::to_string(w), w % 3 != 2);
    std::vector<float> v(d);
    for (std::size_t w = 0; w < n_words; ++w) {
        for (std::size_t s = 0; s < n_slices; ++s) {
            for (std::size_t i = 0; i < per_cell; ++i) {
                for (auto& x : v) x = g(rng);
                b.add_occurrence(static_cast<WordId>(w), static_cast<SliceId>(s), std::span<const float>(v));
            }
        }
    }
    return std::move(b).build();
}

}  // namespace

TEST_CASE("empty store encodes to the fixed header") {
    StoreBuilder b(4);
    const auto store = std::move(b).build();
    const auto bytes = encode_store(store);
    CHECK(bytes.size() == kStoreHeaderSize);
    CHECK(bytes[0] == 'E');
    CHECK(bytes[4] == 1);
    CHECK(decode_store(bytes) == store);
}

TEST_CASE("single occurrence round-trips bit-exactly") {
    StoreBuilder b(2);
    b.add_slice("1960s");
    b.add_word("gay");
    const float v[] = {1.0f, 0.0f};
    b.add_occurrence(0, 0, std::span<const float>(v));
    const auto store = std::move(b).build();

    std::stringstream buf;
    const auto written = write_store(store, buf);
    CHECK(written == buf.str().size());
    // header + slice (2+2+2+5) + word (4+1+2+3) + record (4+2+8)
    CHECK(written == kStoreHeaderSize + 11 + 10 + 14);
    const auto back = read_store(buf);
    CHECK(back == store);
    CHECK(back.occurrence(0).vector[0] == 1.0f);
}

TEST_CASE("randomized round-trip compares raw bit patterns") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto store = random_store(seed, 2, 2, 3, 1 + static_cast<std::uint32_t>(seed % 7));
        const auto back = decode_store(encode_store(store));
        REQUIRE(back.occurrence_count() == store.occurrence_count());
        for (std::size_t i = 0; i < store.occurrence_count(); ++i) {
            const auto a = store.occurrence(i);
            const auto b = back.occurrence(i);
            CHECK(a.word_id == b.word_id);
            CHECK(a.slice_id == b.slice_id);
            for (std::size_t j = 0; j < a.vector.size(); ++j) {
                CHECK(std::bit_cast<std::uint32_t>(a.vector[j]) == std::bit_cast<std::uint32_t>(b.vector[j]));
            }
        }
        CHECK(back == store);
    }
}

TEST_CASE("negative zero and subnormals survive the codec") {
    StoreBuilder b(3);
    b.add_slice("a");
    b.add_word("w");
    const float v[] = {-0.0f, std::numeric_limits<float>::denorm_min(), 3.4e38f};
    b.add_occurrence(0, 0, std::span<const float>(v));
    const auto store = std::move(b).build();
    const auto back = decode_store(encode_store(store));
    CHECK(back == store);
    CHECK(std::signbit(back.occurrence(0).vector[0]));
}

TEST_CASE("occurrences are grouped by word then slice") {
    StoreBuilder b(1);
    b.add_slice("a");
    b.add_slice("b");
    b.add_word("x");
    b.add_word("y");
    const float one[] = {1.0f}, two[] = {2.0f}, three[] = {3.0f}, four[] = {4.0f};
    b.add_occurrence(1, 1, std::span<const float>(one));
    b.add_occurrence(0, 1, std::span<const float>(two));
    b.add_occurrence(1, 0, std::span<const float>(three));
    b.add_occurrence(0, 0, std::span<const float>(four));
    const auto store = std::move(b).build();
    CHECK(store.occurrence(0).vector[0] == 4.0f);
    CHECK(store.occurrence(1).vector[0] == 2.0f);
    CHECK(store.occurrence(2).vector[0] == 3.0f);
    CHECK(store.occurrence(3).vector[0] == 1.0f);
}

TEST_CASE("occurrences_of") {
    StoreBuilder b(2);
    b.add_slice("a");
    b.add_slice("b");
    b.add_word("empty");
    b.add_word("full");
    const float v[] = {0.5f, 0.5f};
    for (int i = 0; i < 3; ++i) b.add_occurrence(1, 0, std::span<const float>(v));
    for (int i = 0; i < 4; ++i) b.add_occurrence(1, 1, std::span<const float>(v));
    const auto store = std::move(b).build();

    CHECK(store.occurrences_of(0).empty());
    const auto occ = store.occurrences_of(1);
    CHECK(occ.size() == 7);
    CHECK(std::count_if(occ.begin(), occ.end(), [](const auto& o) { return o.first == 0; }) == 3);
    CHECK(std::count_if(occ.begin(), occ.end(), [](const auto& o) { return o.first == 1; }) == 4);
    CHECK_THROWS_AS(store.occurrences_of(2), LookupError);
}

TEST_CASE("occurrences_of on a generated store follows generator bookkeeping") {
    DriftSpec spec;
    spec.word = "w0";
    spec.senses = {{Eigen::VectorXd::Ones(4), 1.0}};
    spec.mixtures = {{1.0}, {1.0}};
    spec.occurrences_per_slice = {10, 20};
    const auto suite = generate({spec}, 4, 3);
    const auto occ = suite.store.occurrences_of(0);
    CHECK(occ.size() == 30);
    CHECK(suite.store.slice_counts(0) == std::vector<std::size_t>{10, 20});
}

TEST_CASE("decoder rejects malformed payloads") {
    const auto store = random_store(7, 2, 2, 3, 4);
    const auto bytes = encode_store(store);

    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'X';
        CHECK_THROWS_AS(decode_store(bad), FormatError);
    }
    SUBCASE("unsupported version") {
        auto bad = bytes;
        bad[4] = 255;
        CHECK_THROWS_AS(decode_store(bad), UnsupportedVersionError);
    }
    SUBCASE("truncated mid-record reports the record boundary") {
        const std::size_t record = 6 + 4 * 4;
        const std::size_t records_start = bytes.size() - store.occurrence_count() * record;
        // cut inside the third record
        const std::size_t cut = records_start + 2 * record + 5;
        std::vector<std::uint8_t> bad(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        try {
            decode_store(bad);
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(e.offset() == records_start + 2 * record);
        }
    }
    SUBCASE("NaN vector entry") {
        auto bad = bytes;
        const std::size_t value_at = bytes.size() - 4;
        const auto nan = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
        for (int i = 0; i < 4; ++i) bad[value_at + i] = static_cast<std::uint8_t>(nan >> (8 * i));
        try {
            decode_store(bad);
            FAIL("expected a format error");
        } catch (const FormatError& e) {
            CHECK(e.offset() == value_at);
        }
    }
    SUBCASE("trailing bytes") {
        auto bad = bytes;
        bad.push_back(0);
        CHECK_THROWS_AS(decode_store(bad), FormatError);
    }
}

TEST_CASE("builder validation names the offending record") {
    StoreBuilder b(2);
    b.add_slice("a");
    b.add_word("w");
    const float ok[] = {1.0f, 2.0f};
    const float bad[] = {1.0f, std::numeric_limits<float>::infinity()};
    b.add_occurrence(0, 0, std::span<const float>(ok));
    b.add_occurrence(0, 0, std::span<const float>(bad));
    try {
        std::move(b).build();
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("occurrence 1") != std::string::npos);
    }

    StoreBuilder dup(2);
    dup.add_word("same");
    dup.add_word("same");
    CHECK_THROWS_AS(std::move(dup).build(), ValidationError);

    StoreBuilder wrong_len(3);
    wrong_len.add_slice("a");
    wrong_len.add_word("w");
    CHECK_THROWS_AS(wrong_len.add_occurrence(0, 0, std::span<const float>(ok)), ValidationError);

    StoreBuilder bad_ref(2);
    bad_ref.add_slice("a");
    bad_ref.add_occurrence(5, 0, std::span<const float>(ok));
    CHECK_THROWS_AS(std::move(bad_ref).build(), ValidationError);
}

TEST_CASE("merge_stores") {
    auto single = [](const std::string& surface, std::size_t count) {
        StoreBuilder b(2);
        b.add_slice("a");
        b.add_slice("b");
        b.add_word(surface);
        const float v[] = {1.0f, 2.0f};
        for (std::size_t i = 0; i < count; ++i) b.add_occurrence(0, static_cast<SliceId>(i % 2), std::span<const float>(v));
        return std::move(b).build();
    };

    SUBCASE("identity with an empty store") {
        const auto s = random_store(1, 3, 2, 2, 3);
        StoreBuilder e(3);
        e.add_slice("slice0");
        e.add_slice("slice1");
        CHECK(merge_stores(s, std::move(e).build()) == s);
    }
    SUBCASE("disjoint words add up") {
        const auto m = merge_stores(single("x", 3), single("y", 4));
        CHECK(m.words().size() == 2);
        CHECK(m.occurrence_count() == 7);
    }
    SUBCASE("shared surface keeps one id and sums counts") {
        const auto m = merge_stores(single("x", 3), single("x", 4));
        CHECK(m.words().size() == 1);
        CHECK(m.occurrences_of(0).size() == 7);
    }
    SUBCASE("incompatible stores") {
        StoreBuilder other(3);
        other.add_slice("a");
        other.add_slice("b");
        CHECK_THROWS_AS(merge_stores(single("x", 1), std::move(other).build()), IncompatibleError);
        StoreBuilder slices(2);
        slices.add_slice("a");
        CHECK_THROWS_AS(merge_stores(single("x", 1), std::move(slices).build()), IncompatibleError);
    }
}

TEST_CASE("store files carry a metadata sidecar") {
    const auto dir = std::filesystem::temp_directory_path() / "semshift_store_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "toy.embs";
    const auto store = random_store(11, 2, 2, 2, 3);
    StoreMetadata meta{"toy corpus", "bert-base-uncased", 5, "sum of last four layers"};
    write_store_file(path, store, meta);
    CHECK(read_store_file(path) == store);
    CHECK(metadata_path(path).filename() == "toy.meta.json");
    CHECK(read_metadata(metadata_path(path)) == meta);
    CHECK_THROWS_AS(read_store_file(dir / "missing.embs"), IoError);
    std::filesystem::remove_all(dir);
}
