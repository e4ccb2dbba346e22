#include "kbist/dictionary.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "kbist/faultsim.hpp"
#include "kbist/ora.hpp"
#include "kbist/tpg.hpp"
#include "parallel.hpp"

namespace kbist {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::string body_checksum(std::string_view body) {
    std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(body.data()),
                                        body.size());
    return to_hex(shake128(bytes, 128));
}

void check_build_args(const Netlist& nl, std::span<const std::uint32_t> seeds,
                      std::size_t pattern_count, std::size_t digest_bits) {
    if (seeds.empty())
        throw DictionaryError(DictionaryError::Kind::BadArg, "seed list is empty");
    std::set<std::uint32_t> seen;
    for (std::uint32_t s : seeds) {
        if (s == 0)
            throw DictionaryError(DictionaryError::Kind::BadArg, "LFSR seed must be nonzero");
        if (!seen.insert(s).second)
            throw DictionaryError(DictionaryError::Kind::BadArg,
                                  "duplicate seed " + std::to_string(s));
    }
    if (pattern_count == 0)
        throw DictionaryError(DictionaryError::Kind::BadArg, "pattern count must be positive");
    if (digest_bits == 0 || digest_bits % 8 != 0)
        throw DictionaryError(DictionaryError::Kind::BadArg,
                              "digest bits must be a positive multiple of 8");
    if (nl.outputs.empty())
        throw DictionaryError(DictionaryError::Kind::BadArg,
                              "netlist " + nl.name + " has no primary outputs");
}

std::vector<BitVec> seed_patterns(const Netlist& nl, const BuildOptions& options,
                                  std::uint32_t seed, std::size_t pattern_count) {
    Lfsr lfsr(options.lfsr_degree, options.lfsr_taps, seed);
    return lfsr.patterns(nl.inputs.size(), pattern_count);
}

}  // namespace

BuildOptions::BuildOptions() : lfsr_degree(Lfsr::kDefaultDegree) {
    auto taps = Lfsr::default_taps();
    lfsr_taps.assign(taps.begin(), taps.end());
}

bool FaultDictionary::has_key(const DictionaryKey& key) const {
    return std::any_of(entries.begin(), entries.end(),
                       [&](const DictionaryEntry& e) { return e.key == key; });
}

std::vector<DictionaryKey> FaultDictionary::keys() const {
    std::vector<DictionaryKey> out;
    for (const DictionaryEntry& e : entries)
        if (std::find(out.begin(), out.end(), e.key) == out.end()) out.push_back(e.key);
    return out;
}

const DictionaryEntry* FaultDictionary::golden(const DictionaryKey& key) const {
    for (const DictionaryEntry& e : entries)
        if (e.key == key && e.is_golden()) return &e;
    return nullptr;
}

const DictionaryEntry* FaultDictionary::find(const DictionaryKey& key, const Signature& sig) const {
    for (const DictionaryEntry& e : entries)
        if (e.key == key && e.signature == sig) return &e;
    return nullptr;
}

std::vector<DictionaryEntry> build_golden(const Netlist& nl, std::span<const std::uint32_t> seeds,
                                          std::size_t pattern_count, const DeviceKey& key,
                                          std::size_t digest_bits, const BuildOptions& options) {
    check_build_args(nl, seeds, pattern_count, digest_bits);
    std::vector<DictionaryEntry> out;
    for (std::uint32_t seed : seeds) {
        std::vector<BitVec> patterns = seed_patterns(nl, options, seed, pattern_count);
        ResponseStream golden = simulate_batch(nl, patterns);
        DictionaryEntry entry;
        entry.key = DictionaryKey{nl.name, seed, pattern_count, digest_bits};
        entry.signature = sign_response(key, golden, digest_bits);
        entry.response_length_bits = golden.bits.size();
        if (options.embed_responses) entry.response = golden.bits;
        out.push_back(std::move(entry));
    }
    return out;
}

FaultDictionary build_fault_dictionary(const Netlist& nl, std::span<const std::uint32_t> seeds,
                                       std::size_t pattern_count, const DeviceKey& key,
                                       std::size_t digest_bits, const BuildOptions& options) {
    check_build_args(nl, seeds, pattern_count, digest_bits);

    FaultDictionary dict;
    dict.dut_id = nl.name;
    dict.digest_bits = digest_bits;
    dict.lfsr_degree = options.lfsr_degree;
    dict.lfsr_taps = options.lfsr_taps;
    dict.po_count = nl.outputs.size();

    std::vector<Fault> faults = enumerate_faults(nl);

    for (std::uint32_t seed : seeds) {
        DictionaryKey dkey{nl.name, seed, pattern_count, digest_bits};
        std::vector<BitVec> patterns = seed_patterns(nl, options, seed, pattern_count);
        ResponseStream golden = simulate_batch(nl, patterns);

        DictionaryEntry gentry;
        gentry.key = dkey;
        gentry.signature = sign_response(key, golden, digest_bits);
        gentry.response_length_bits = golden.bits.size();
        if (options.embed_responses) gentry.response = golden.bits;
        dict.entries.push_back(gentry);

        std::vector<BitVec> responses(faults.size());
        std::vector<std::uint8_t> detected(faults.size(), 0);
        detail::parallel_for(faults.size(), [&](std::size_t i) {
            ResponseStream faulty = simulate_faulty(nl, faults[i], patterns);
            if (faulty.bits == golden.bits) return;
            detected[i] = 1;
            responses[i] = std::move(faulty.bits);
        });

        // Merge faults whose faulty responses are bit-identical into one
        // equivalence class, keyed by the packed response bytes.
        std::map<std::vector<std::uint8_t>, std::size_t> class_of;
        std::vector<std::vector<std::size_t>> classes;
        for (std::size_t i = 0; i < faults.size(); ++i) {
            if (!detected[i]) continue;
            auto bytes = responses[i].to_bytes_msb_first();
            auto [it, inserted] = class_of.emplace(std::move(bytes), classes.size());
            if (inserted) classes.emplace_back();
            classes[it->second].push_back(i);
        }

        std::map<std::string, std::size_t> sig_seen;  // hex -> entry index
        sig_seen[gentry.signature.hex()] = dict.entries.size() - 1;
        for (const std::vector<std::size_t>& cls : classes) {
            DictionaryEntry entry;
            entry.key = dkey;
            for (std::size_t i : cls) entry.fault_ids.push_back(faults[i].id(nl));
            ResponseStream rs{responses[cls.front()], pattern_count, nl.outputs.size()};
            entry.signature = sign_response(key, rs, digest_bits);
            entry.response_length_bits = rs.bits.size();
            if (options.embed_responses) entry.response = rs.bits;

            auto [it, inserted] = sig_seen.emplace(entry.signature.hex(), dict.entries.size());
            if (!inserted) {
                const DictionaryEntry& other = dict.entries[it->second];
                std::string who = other.is_golden() ? std::string("golden response")
                                                    : "fault " + other.fault_ids.front();
                throw DictionaryError(DictionaryError::Kind::Collision,
                                      "signature collision between distinct responses: fault " +
                                          entry.fault_ids.front() + " vs " + who +
                                          " under seed " + std::to_string(seed));
            }
            dict.entries.push_back(std::move(entry));
        }
    }
    return dict;
}

std::string serialize_dictionary(const FaultDictionary& dict) {
    json doc;
    doc["format_version"] = kFormatVersion;
    doc["dut_id"] = dict.dut_id;
    doc["digest_bits"] = dict.digest_bits;
    doc["lfsr_degree"] = dict.lfsr_degree;
    doc["lfsr_taps"] = dict.lfsr_taps;
    doc["po_count"] = dict.po_count;
    json entries = json::array();
    for (const DictionaryEntry& e : dict.entries) {
        json je;
        je["seed"] = e.key.seed;
        je["pattern_count"] = e.key.pattern_count;
        je["fault_ids"] = e.fault_ids;
        je["signature_hex"] = e.signature.hex();
        je["response_bits"] = e.response_length_bits;
        if (e.response) je["response_hex"] = to_hex(e.response->to_bytes_msb_first());
        entries.push_back(std::move(je));
    }
    doc["entries"] = std::move(entries);

    std::string body = doc.dump();
    return body + "\n" + body_checksum(body) + "\n";
}

FaultDictionary deserialize_dictionary(const std::string& text) {
    std::size_t nl_pos = text.find('\n');
    if (nl_pos == std::string::npos)
        throw DictionaryError(DictionaryError::Kind::Checksum,
                              "dictionary file has no checksum line");
    std::string_view body(text.data(), nl_pos);
    std::string_view rest(text.data() + nl_pos + 1, text.size() - nl_pos - 1);
    while (!rest.empty() && (rest.back() == '\n' || rest.back() == '\r')) rest.remove_suffix(1);
    if (rest != body_checksum(body))
        throw DictionaryError(DictionaryError::Kind::Checksum, "dictionary checksum mismatch");

    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw DictionaryError(DictionaryError::Kind::Malformed,
                              std::string("malformed dictionary body: ") + e.what());
    }

    try {
        int version = doc.at("format_version").get<int>();
        if (version != kFormatVersion)
            throw DictionaryError(DictionaryError::Kind::Version,
                                  "unsupported dictionary format version " +
                                      std::to_string(version));
        FaultDictionary dict;
        dict.dut_id = doc.at("dut_id").get<std::string>();
        dict.digest_bits = doc.at("digest_bits").get<std::size_t>();
        dict.lfsr_degree = doc.at("lfsr_degree").get<int>();
        dict.lfsr_taps = doc.at("lfsr_taps").get<std::vector<int>>();
        dict.po_count = doc.at("po_count").get<std::size_t>();
        for (const json& je : doc.at("entries")) {
            DictionaryEntry e;
            e.key = DictionaryKey{dict.dut_id, je.at("seed").get<std::uint32_t>(),
                                  je.at("pattern_count").get<std::size_t>(), dict.digest_bits};
            e.fault_ids = je.at("fault_ids").get<std::vector<std::string>>();
            e.signature = Signature::from_hex(je.at("signature_hex").get<std::string>());
            e.response_length_bits = je.at("response_bits").get<std::uint64_t>();
            if (je.contains("response_hex")) {
                std::vector<std::uint8_t> bytes = from_hex(je.at("response_hex").get<std::string>());
                BitVec bits(e.response_length_bits);
                for (std::size_t i = 0; i < bits.size(); ++i)
                    bits.set(i, (bytes.at(i / 8) >> (7 - i % 8)) & 1);
                e.response = std::move(bits);
            }
            dict.entries.push_back(std::move(e));
        }
        return dict;
    } catch (const DictionaryError&) {
        throw;
    } catch (const std::exception& e) {
        throw DictionaryError(DictionaryError::Kind::Malformed,
                              std::string("malformed dictionary body: ") + e.what());
    }
}

void save_dictionary(const FaultDictionary& dict, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DictionaryError(DictionaryError::Kind::Io,
                              "cannot open " + path.string() + " for writing");
    out << serialize_dictionary(dict);
    if (!out) throw DictionaryError(DictionaryError::Kind::Io, "write failed: " + path.string());
}

FaultDictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DictionaryError(DictionaryError::Kind::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_dictionary(buf.str());
}

Diagnosis lookup(const FaultDictionary& dict, const DictionaryKey& key,
                 const Signature& observed) {
    if (!dict.has_key(key))
        throw DictionaryError(DictionaryError::Kind::BadKey,
                              "no dictionary entries for dut " + key.dut_id + " seed " +
                                  std::to_string(key.seed));
    const DictionaryEntry* hit = dict.find(key, observed);
    if (hit == nullptr) return Diagnosis{Verdict::InvalidSignature, {}};
    if (hit->is_golden()) return Diagnosis{Verdict::FaultFree, {}};
    return Diagnosis{Verdict::Faulty, hit->fault_ids};
}

}  // namespace kbist
