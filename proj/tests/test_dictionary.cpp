#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>

#include "helpers.hpp"
#include "kbist/dictionary.hpp"
#include "kbist/faultsim.hpp"
#include "kbist/ora.hpp"
#include "kbist/tpg.hpp"

using namespace kbist;
using kbist::testing::data_path;

namespace {

DeviceKey test_key() { return DeviceKey::from_hex("00112233445566778899aabbccddeeff"); }

Netlist c17() { return parse_bench_file(data_path("iscas85/c17.bench")); }

// Pattern-at-a-time mirror of the dictionary builder, grouped on the raw
// response bit string instead of packed bytes.
struct OracleEntry {
    std::vector<std::string> fault_ids;  // empty = golden
    Signature signature;
};

std::vector<OracleEntry> oracle_entries(const Netlist& nl, std::uint32_t seed,
                                        std::size_t pattern_count, const DeviceKey& key,
                                        std::size_t digest_bits) {
    Lfsr lfsr(Lfsr::kDefaultDegree, Lfsr::default_taps(), seed);
    auto patterns = lfsr.patterns(nl.inputs.size(), pattern_count);

    auto sign_bits = [&](const BitVec& bits) {
        ResponseStream rs{bits, pattern_count, nl.outputs.size()};
        return sign_response(key, rs, digest_bits);
    };

    ResponseStream golden = simulate_batch_scalar(nl, patterns);
    std::vector<OracleEntry> out;
    out.push_back({{}, sign_bits(golden.bits)});

    std::map<std::string, std::size_t> class_of;
    std::vector<OracleEntry> classes;
    for (const Fault& f : enumerate_faults(nl)) {
        ResponseStream faulty = simulate_faulty_scalar(nl, f, patterns);
        if (faulty.bits == golden.bits) continue;
        auto [it, inserted] = class_of.emplace(faulty.bits.to_string(), classes.size());
        if (inserted) classes.push_back({{}, sign_bits(faulty.bits)});
        classes[it->second].fault_ids.push_back(f.id(nl));
    }
    out.insert(out.end(), classes.begin(), classes.end());
    return out;
}

void check_against_oracle(const Netlist& nl, std::uint32_t seed, std::size_t pattern_count) {
    auto expected = oracle_entries(nl, seed, pattern_count, test_key(), 256);
    std::uint32_t seeds[] = {seed};
    FaultDictionary dict = build_fault_dictionary(nl, seeds, pattern_count, test_key(), 256);

    REQUIRE(dict.entries.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(dict.entries[i].fault_ids == expected[i].fault_ids);
        CHECK(dict.entries[i].signature == expected[i].signature);
    }
}

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "kbist_dict_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("build_golden produces one entry per seed") {
    Netlist nl = c17();
    std::uint32_t seeds[] = {1, 0xBEEF};
    auto entries = build_golden(nl, seeds, 7, test_key(), 256);
    REQUIRE(entries.size() == 2);
    CHECK((entries[0].key == DictionaryKey{"c17", 1, 7, 256}));
    CHECK((entries[1].key == DictionaryKey{"c17", 0xBEEF, 7, 256}));
    for (const auto& e : entries) {
        CHECK(e.is_golden());
        CHECK(e.response_length_bits == 14);  // 2 outputs x 7 patterns
        CHECK(e.signature.digest.size() == 32);
        CHECK_FALSE(e.response.has_value());
    }
    CHECK(entries[0].signature != entries[1].signature);
}

TEST_CASE("embed_responses stores the raw response") {
    Netlist nl = c17();
    std::uint32_t seeds[] = {1};
    BuildOptions opts;
    opts.embed_responses = true;
    auto entries = build_golden(nl, seeds, 7, test_key(), 256, opts);
    REQUIRE(entries.size() == 1);
    REQUIRE(entries[0].response.has_value());
    CHECK(entries[0].response->size() == 14);
}

TEST_CASE("builder rejects bad arguments") {
    Netlist nl = c17();
    auto kind_of = [&](auto&& fn) {
        try {
            fn();
        } catch (const DictionaryError& e) {
            return e.kind();
        }
        return DictionaryError::Kind::Io;  // sentinel: no throw
    };

    std::vector<std::uint32_t> none;
    std::uint32_t zero[] = {0};
    std::uint32_t dup[] = {7, 7};
    std::uint32_t ok[] = {1};
    CHECK(kind_of([&] { build_golden(nl, none, 7, test_key(), 256); }) ==
          DictionaryError::Kind::BadArg);
    CHECK(kind_of([&] { build_golden(nl, zero, 7, test_key(), 256); }) ==
          DictionaryError::Kind::BadArg);
    CHECK(kind_of([&] { build_golden(nl, dup, 7, test_key(), 256); }) ==
          DictionaryError::Kind::BadArg);
    CHECK(kind_of([&] { build_golden(nl, ok, 0, test_key(), 256); }) ==
          DictionaryError::Kind::BadArg);
    CHECK(kind_of([&] { build_golden(nl, ok, 7, test_key(), 12); }) ==
          DictionaryError::Kind::BadArg);

    Netlist no_po = parse_bench("INPUT(a)\nb = NOT(a)\n", "nopo");
    CHECK(kind_of([&] { build_golden(no_po, ok, 7, test_key(), 256); }) ==
          DictionaryError::Kind::BadArg);
}

TEST_CASE("dictionary matches a scalar brute-force oracle") {
    SUBCASE("single AND gate") {
        Netlist nl = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n", "and2");
        check_against_oracle(nl, 5, 8);
    }
    SUBCASE("c17") { check_against_oracle(c17(), 0xC0FFEE, 7); }
}

TEST_CASE("identical-response faults land in one equivalence class") {
    Netlist nl = parse_bench("INPUT(a)\nOUTPUT(y)\nx = BUF(a)\ny = BUF(x)\n", "chain");
    std::uint32_t seeds[] = {1};
    std::size_t n_patterns = 8;

    // premise: the pattern set exercises both input values
    Lfsr lfsr = Lfsr::with_default_polynomial(1);
    auto pats = lfsr.patterns(1, n_patterns);
    bool saw0 = false, saw1 = false;
    for (const auto& p : pats) (p.get(0) ? saw1 : saw0) = true;
    REQUIRE(saw0);
    REQUIRE(saw1);

    FaultDictionary dict = build_fault_dictionary(nl, seeds, n_patterns, test_key(), 256);
    REQUIRE(dict.entries.size() == 3);
    CHECK(dict.entries[0].is_golden());
    // every stuck-at-0 along the chain forces y to 0; same for stuck-at-1
    std::vector<std::string> sa0 = {"a@sa0", "x@sa0", "x.in0@sa0", "y@sa0", "y.in0@sa0"};
    std::vector<std::string> sa1 = {"a@sa1", "x@sa1", "x.in0@sa1", "y@sa1", "y.in0@sa1"};
    CHECK(dict.entries[1].fault_ids == sa0);
    CHECK(dict.entries[2].fault_ids == sa1);
}

TEST_CASE("dictionary metadata records the generator") {
    Netlist nl = c17();
    std::uint32_t seeds[] = {1, 2};
    FaultDictionary dict = build_fault_dictionary(nl, seeds, 7, test_key(), 256);
    CHECK(dict.dut_id == "c17");
    CHECK(dict.digest_bits == 256);
    CHECK(dict.lfsr_degree == 32);
    CHECK((dict.lfsr_taps == std::vector<int>{32, 22, 2, 1}));
    CHECK(dict.po_count == 2);

    auto keys = dict.keys();
    REQUIRE(keys.size() == 2);
    CHECK(keys[0].seed == 1);
    CHECK(keys[1].seed == 2);
    CHECK(dict.has_key(keys[0]));
    CHECK_FALSE(dict.has_key(DictionaryKey{"c17", 3, 7, 256}));
    CHECK(dict.golden(keys[0]) != nullptr);
    CHECK(dict.golden(keys[0])->is_golden());
    CHECK(dict.golden(DictionaryKey{"c17", 3, 7, 256}) == nullptr);
}

TEST_CASE("save and load round-trips exactly") {
    Netlist nl = c17();
    std::uint32_t seeds[] = {1, 0xABCD};
    BuildOptions opts;

    SUBCASE("plain") {}
    SUBCASE("with embedded responses") { opts.embed_responses = true; }

    FaultDictionary dict = build_fault_dictionary(nl, seeds, 7, test_key(), 256, opts);
    auto path = temp_file(opts.embed_responses ? "c17_embed.fdict" : "c17.fdict");
    save_dictionary(dict, path);
    FaultDictionary loaded = load_dictionary(path);
    CHECK(loaded == dict);
    std::filesystem::remove(path);
}

TEST_CASE("serialized form is two lines, body plus checksum") {
    Netlist nl = c17();
    std::uint32_t seeds[] = {1};
    FaultDictionary dict = build_fault_dictionary(nl, seeds, 7, test_key(), 256);
    std::string text = serialize_dictionary(dict);
    auto first_nl = text.find('\n');
    REQUIRE(first_nl != std::string::npos);
    CHECK(text.back() == '\n');
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    // checksum line: 32 hex chars (128-bit digest)
    std::string checksum = text.substr(first_nl + 1, text.size() - first_nl - 2);
    CHECK(checksum.size() == 32);
    CHECK(checksum.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("the device key never appears in the serialized dictionary") {
    Netlist nl = c17();
    std::uint32_t seeds[] = {1};
    BuildOptions opts;
    opts.embed_responses = true;
    FaultDictionary dict = build_fault_dictionary(nl, seeds, 7, test_key(), 256, opts);
    std::string text = serialize_dictionary(dict);
    CHECK(text.find("00112233445566778899aabbccddeeff") == std::string::npos);
    // raw key bytes as a substring of the body
    auto key_bytes = test_key().bytes();
    std::string raw(key_bytes.begin(), key_bytes.end());
    CHECK(text.find(raw) == std::string::npos);
}

TEST_CASE("corrupted files are rejected before parsing") {
    Netlist nl = c17();
    std::uint32_t seeds[] = {1};
    FaultDictionary dict = build_fault_dictionary(nl, seeds, 7, test_key(), 256);
    std::string text = serialize_dictionary(dict);

    auto kind_of = [](const std::string& t) {
        try {
            deserialize_dictionary(t);
        } catch (const DictionaryError& e) {
            return e.kind();
        }
        return DictionaryError::Kind::Io;  // sentinel: no throw
    };

    SUBCASE("truncation") {
        CHECK(kind_of(text.substr(0, text.size() - 10)) == DictionaryError::Kind::Checksum);
        CHECK(kind_of("") == DictionaryError::Kind::Checksum);
        CHECK(kind_of(text.substr(0, text.find('\n') / 2)) == DictionaryError::Kind::Checksum);
    }
    SUBCASE("single byte flip in the body") {
        std::string flipped = text;
        flipped[text.find("c17") + 1] = 'X';
        CHECK(kind_of(flipped) == DictionaryError::Kind::Checksum);
    }
    SUBCASE("valid checksum over a non-JSON body") {
        std::string body = "this is not json";
        std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(body.data()),
                                            body.size());
        std::string bad = body + "\n" + to_hex(shake128(bytes, 128)) + "\n";
        CHECK(kind_of(bad) == DictionaryError::Kind::Malformed);
    }
    SUBCASE("valid checksum over a body missing a field") {
        std::string body = "{\"format_version\":1}";
        std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(body.data()),
                                            body.size());
        std::string bad = body + "\n" + to_hex(shake128(bytes, 128)) + "\n";
        CHECK(kind_of(bad) == DictionaryError::Kind::Malformed);
    }
    SUBCASE("unknown format version") {
        std::string body = text.substr(0, text.find('\n'));
        auto pos = body.find("\"format_version\":1");
        REQUIRE(pos != std::string::npos);
        body.replace(pos, 18, "\"format_version\":2");
        std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(body.data()),
                                            body.size());
        std::string v2 = body + "\n" + to_hex(shake128(bytes, 128)) + "\n";
        CHECK(kind_of(v2) == DictionaryError::Kind::Version);
    }
}

TEST_CASE("lookup classifies signatures") {
    Netlist nl = c17();
    std::uint32_t seeds[] = {1};
    FaultDictionary dict = build_fault_dictionary(nl, seeds, 7, test_key(), 256);
    DictionaryKey key{"c17", 1, 7, 256};

    Diagnosis d = lookup(dict, key, dict.golden(key)->signature);
    CHECK(d.verdict == Verdict::FaultFree);
    CHECK(d.fault_ids.empty());

    REQUIRE(dict.entries.size() >= 2);
    const DictionaryEntry& faulty = dict.entries[1];
    d = lookup(dict, key, faulty.signature);
    CHECK(d.verdict == Verdict::Faulty);
    CHECK(d.fault_ids == faulty.fault_ids);

    Signature garbage;
    garbage.digest.assign(32, 0x5A);
    d = lookup(dict, key, garbage);
    CHECK(d.verdict == Verdict::InvalidSignature);
    CHECK(d.fault_ids.empty());

    CHECK_THROWS_AS(lookup(dict, DictionaryKey{"c17", 99, 7, 256}, garbage), DictionaryError);
    CHECK_THROWS_AS(lookup(dict, DictionaryKey{"c432", 1, 7, 256}, garbage), DictionaryError);
}

TEST_CASE("every injected fault is diagnosed by its dictionary") {
    for (const char* name : {"iscas85/c17.bench", "iscas85/c432.bench"}) {
        Netlist nl = parse_bench_file(data_path(name));
        std::size_t n_patterns = nl.name == "c17" ? 7 : 63;
        std::uint32_t seeds[] = {0xF00D};
        FaultDictionary dict = build_fault_dictionary(nl, seeds, n_patterns, test_key(), 256);
        DictionaryKey key{nl.name, 0xF00D, n_patterns, 256};

        Lfsr lfsr(Lfsr::kDefaultDegree, Lfsr::default_taps(), 0xF00D);
        auto patterns = lfsr.patterns(nl.inputs.size(), n_patterns);
        ResponseStream golden = simulate_batch(nl, patterns);

        for (const Fault& f : enumerate_faults(nl)) {
            ResponseStream faulty = simulate_faulty(nl, f, patterns);
            Signature sig = sign_response(test_key(), faulty, 256);
            Diagnosis d = lookup(dict, key, sig);
            if (faulty.bits == golden.bits) {
                CHECK(d.verdict == Verdict::FaultFree);
            } else {
                REQUIRE(d.verdict == Verdict::Faulty);
                std::string id = f.id(nl);
                CHECK(std::find(d.fault_ids.begin(), d.fault_ids.end(), id) != d.fault_ids.end());
            }
        }
    }
}
