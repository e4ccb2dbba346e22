#include "kbist/testflow.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <mutex>
#include <thread>

#include "kbist/ora.hpp"

namespace kbist {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

LfsrConfig::LfsrConfig() : degree(Lfsr::kDefaultDegree) {
    auto t = Lfsr::default_taps();
    taps.assign(t.begin(), t.end());
}

const Netlist& SocConfig::dut(const std::string& dut_id) const {
    auto it = duts.find(dut_id);
    if (it == duts.end()) throw FlowError("unknown DUT " + dut_id);
    return it->second;
}

void SocConfig::validate() const {
    for (const auto& [dut_id, dict] : dictionaries) {
        if (!duts.contains(dut_id))
            throw FlowError("dictionary references unknown DUT " + dut_id);
        for (const DictionaryEntry& e : dict.entries)
            if (!duts.contains(e.key.dut_id))
                throw FlowError("dictionary entry references unknown DUT " + e.key.dut_id);
    }
    for (const auto& [dut_id, fault] : injected) {
        (void)fault;
        if (!duts.contains(dut_id))
            throw FlowError("fault injection references unknown DUT " + dut_id);
    }
}

Signature compute_dut_signature(const SocConfig& soc, const std::string& dut_id,
                                std::uint32_t seed, std::size_t pattern_count,
                                std::size_t digest_bits) {
    const Netlist& nl = soc.dut(dut_id);
    Lfsr lfsr(soc.lfsr.degree, soc.lfsr.taps, seed);
    std::vector<BitVec> patterns = lfsr.patterns(nl.inputs.size(), pattern_count);
    auto it = soc.injected.find(dut_id);
    ResponseStream response = it == soc.injected.end()
                                  ? simulate_batch(nl, patterns)
                                  : simulate_faulty(nl, it->second, patterns);
    return sign_response(soc.key, response, digest_bits);
}

TestVerdict run_onchip_test(const SocConfig& soc, const std::string& dut_id, std::uint32_t seed) {
    soc.dut(dut_id);  // unknown-DUT check first
    auto dict_it = soc.dictionaries.find(dut_id);
    if (dict_it == soc.dictionaries.end())
        throw FlowError("no local dictionary for DUT " + dut_id);
    const FaultDictionary& dict = dict_it->second;

    // The session configuration comes from the dictionary: the seed selects
    // the entry, which fixes pattern_count.
    std::optional<DictionaryKey> dkey;
    for (const DictionaryKey& k : dict.keys()) {
        if (k.seed == seed && k.digest_bits == soc.digest_bits) {
            dkey = k;
            break;
        }
    }
    if (!dkey)
        throw FlowError("seed " + std::to_string(seed) + " not in local dictionary for DUT " +
                        dut_id);

    auto start = std::chrono::steady_clock::now();
    Signature sig =
        compute_dut_signature(soc, dut_id, seed, dkey->pattern_count, soc.digest_bits);
    Diagnosis diag = lookup(dict, *dkey, sig);
    auto stop = std::chrono::steady_clock::now();

    TestVerdict v;
    v.dut_id = dut_id;
    v.seed = seed;
    v.diagnosis = std::move(diag);
    v.signature = std::move(sig);
    v.duration = std::chrono::duration_cast<std::chrono::microseconds>(stop - start);
    return v;
}

ScheduleOutcome schedule_tests(const SocConfig& soc,
                               const std::map<std::string, Availability>& availability,
                               const std::vector<std::pair<std::string, std::uint32_t>>& queue) {
    ScheduleOutcome outcome;

    auto idle = [&](const std::string& dut_id) {
        auto it = availability.find(dut_id);
        return it == availability.end() || it->second == Availability::Idle;
    };

    // Per-DUT work lists, each serialized; DUTs run concurrently.
    std::map<std::string, std::vector<std::size_t>> per_dut;
    std::vector<std::optional<TestVerdict>> slots(queue.size());
    for (std::size_t i = 0; i < queue.size(); ++i) {
        if (idle(queue[i].first))
            per_dut[queue[i].first].push_back(i);
        else
            outcome.skipped.push_back(queue[i]);
    }

    std::vector<std::thread> workers;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (auto& [dut_id, indices] : per_dut) {
        workers.emplace_back([&, &indices = indices]() {
            try {
                for (std::size_t i : indices)
                    slots[i] = run_onchip_test(soc, queue[i].first, queue[i].second);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (std::thread& w : workers) w.join();
    if (failure) std::rethrow_exception(failure);

    for (std::optional<TestVerdict>& slot : slots)
        if (slot) outcome.executed.push_back(std::move(*slot));
    return outcome;
}

SocConfig load_soc_config(const std::filesystem::path& path,
                          const std::optional<std::filesystem::path>& key_file_override) {
    std::ifstream in(path);
    if (!in) throw FlowError("cannot open SoC config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw FlowError("malformed SoC config " + path.string() + ": " + e.what());
    }

    std::filesystem::path base = path.parent_path();
    try {
        std::filesystem::path key_file =
            key_file_override ? *key_file_override
                              : resolve(base, doc.at("key_file").get<std::string>());
        SocConfig soc(DeviceKey::load(key_file));

        for (const auto& [dut_id, bench] : doc.at("duts").items()) {
            Netlist nl = parse_bench_file(resolve(base, bench.get<std::string>()));
            nl.name = dut_id;
            soc.duts.emplace(dut_id, std::move(nl));
        }
        if (doc.contains("digest_bits")) soc.digest_bits = doc["digest_bits"].get<std::size_t>();
        if (doc.contains("lfsr")) {
            const json& l = doc["lfsr"];
            if (l.contains("degree")) soc.lfsr.degree = l["degree"].get<int>();
            if (l.contains("taps")) soc.lfsr.taps = l["taps"].get<std::vector<int>>();
        }
        if (doc.contains("dictionaries"))
            for (const auto& [dut_id, dict_path] : doc["dictionaries"].items())
                soc.dictionaries.emplace(dut_id,
                                         load_dictionary(resolve(base, dict_path.get<std::string>())));
        if (doc.contains("inject")) {
            for (const auto& [dut_id, fault_id] : doc["inject"].items()) {
                const Netlist& nl = soc.dut(dut_id);
                auto fault = parse_fault_id(nl, fault_id.get<std::string>());
                if (!fault)
                    throw FlowError("unknown fault id " + fault_id.get<std::string>() +
                                    " for DUT " + dut_id);
                soc.injected.emplace(dut_id, *fault);
            }
        }
        soc.validate();
        return soc;
    } catch (const json::exception& e) {
        throw FlowError("malformed SoC config " + path.string() + ": " + e.what());
    }
}

}  // namespace kbist
