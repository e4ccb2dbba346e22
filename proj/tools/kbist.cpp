// kbist: secure self-test experiments on gate-level netlists.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "kbist/dictionary.hpp"
#include "kbist/faultsim.hpp"
#include "kbist/kmac.hpp"
#include "kbist/netlist.hpp"
#include "kbist/ora.hpp"
#include "kbist/remote.hpp"
#include "kbist/testflow.hpp"
#include "kbist/tpg.hpp"

namespace {

using namespace kbist;

std::string verdict_name(const Diagnosis& diag) {
    switch (diag.verdict) {
        case Verdict::FaultFree: return "FAULT_FREE";
        case Verdict::Faulty: {
            std::string s = "FAULT(";
            for (std::size_t i = 0; i < diag.fault_ids.size(); ++i) {
                if (i > 0) s += ", ";
                s += diag.fault_ids[i];
            }
            return s + ")";
        }
        default: return "INVALID_SIGNATURE";
    }
}

std::filesystem::path key_file_path(const std::string& flag_value) {
    if (const char* env = std::getenv("KBIST_KEY_FILE"); env != nullptr && *env != '\0')
        return env;
    if (flag_value.empty())
        throw FlowError("no key file: pass --key or set KBIST_KEY_FILE");
    return flag_value;
}

std::vector<BitVec> make_patterns(const Netlist& nl, const LfsrConfig& cfg, std::uint32_t seed,
                                  std::size_t count) {
    Lfsr lfsr(cfg.degree, cfg.taps, seed);
    return lfsr.patterns(nl.inputs.size(), count);
}

struct AnalyzeArgs {
    std::vector<std::string> benches;
    std::vector<std::size_t> patterns;
    std::uint32_t seed = 1;
    std::string key_file;
    std::size_t digest_bits = 256;
    std::string csv_path;
};

int run_analyze(const AnalyzeArgs& args) {
    if (args.patterns.size() != args.benches.size())
        throw FlowError("need one --patterns value per --bench");
    DeviceKey key = DeviceKey::load(key_file_path(args.key_file));
    LfsrConfig lfsr;

    std::vector<AliasingReport> rows;
    for (std::size_t i = 0; i < args.benches.size(); ++i) {
        Netlist nl = parse_bench_file(args.benches[i]);
        std::vector<BitVec> pats = make_patterns(nl, lfsr, args.seed, args.patterns[i]);
        rows.push_back(aliasing_analysis(nl, pats, key, args.digest_bits));
    }

    std::printf("%-10s %6s %10s %10s %12s %10s\n", "circuit", "POs", "patterns", "L", "CR%",
                "aliasing%");
    for (const AliasingReport& r : rows)
        std::printf("%-10s %6zu %10zu %10llu %12.2f %10.2f\n", r.circuit.c_str(), r.po_count,
                    r.pattern_count, static_cast<unsigned long long>(r.response_length_bits),
                    r.compaction_rate * 100.0, r.aliasing_rate * 100.0);

    if (!args.csv_path.empty()) {
        std::ofstream csv(args.csv_path);
        if (!csv) throw FlowError("cannot write " + args.csv_path);
        csv << "circuit,po_count,pattern_count,response_bits,compaction_rate_pct,aliasing_rate_"
               "pct\n";
        for (const AliasingReport& r : rows) {
            char line[256];
            std::snprintf(line, sizeof(line), "%s,%zu,%zu,%llu,%.2f,%.2f\n", r.circuit.c_str(),
                          r.po_count, r.pattern_count,
                          static_cast<unsigned long long>(r.response_length_bits),
                          r.compaction_rate * 100.0, r.aliasing_rate * 100.0);
            csv << line;
        }
        std::printf("csv written to %s\n", args.csv_path.c_str());
    }
    return 0;
}

int run_selftest() {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::printf("%s: %s\n", ok ? "ok" : "FAIL", name.c_str());
        if (!ok) ++failures;
    };

    // FIPS 202 / SP 800-185 sample vectors.
    check("SHAKE128 empty message",
          to_hex(shake128({}, 256)) ==
              "7f9c2ba4e88f827d616045507605853ed73b8093f6efbc88eb1a6eacfa66ef26");
    std::vector<std::uint8_t> a3(200, 0xA3);
    check("SHAKE128 200x0xA3",
          to_hex(shake128(a3, 256)) ==
              "131ab8d2b594946b9c81333f9bb6e0ce75c3b93104fa3469d3917457385da037");

    std::vector<std::uint8_t> msg4 = {0x00, 0x01, 0x02, 0x03};
    std::vector<std::uint8_t> msg200(200);
    for (int i = 0; i < 200; ++i) msg200[i] = static_cast<std::uint8_t>(i);
    std::string email = "Email Signature";
    std::span<const std::uint8_t> email_span(reinterpret_cast<const std::uint8_t*>(email.data()),
                                             email.size());
    check("cSHAKE128 sample 1",
          to_hex(cshake128(msg4, 256, {}, email_span)) ==
              "c1c36925b6409a04f1b504fcbca9d82b4017277cb5ed2b2065fc1d3814d5aaf5");
    check("cSHAKE128 sample 2",
          to_hex(cshake128(msg200, 256, {}, email_span)) ==
              "c5221d50e4f822d96a2e8881a961420f294b7b24fe3d2094baed2c6524cc166b");

    std::vector<std::uint8_t> key_bytes(32);
    for (int i = 0; i < 32; ++i) key_bytes[i] = static_cast<std::uint8_t>(0x40 + i);
    DeviceKey key(key_bytes);
    std::string tagged = "My Tagged Application";
    std::span<const std::uint8_t> tagged_span(reinterpret_cast<const std::uint8_t*>(tagged.data()),
                                              tagged.size());
    check("KMAC128 sample 1",
          kmac128(key, msg4, 256).hex() ==
              "e5780b0d3ea6f7d3a429c5706aa43a00fadbd7d49628839e3187243f456ee14e");
    check("KMAC128 sample 2",
          kmac128(key, msg4, 256, tagged_span).hex() ==
              "3b1fba963cd8b0b59e8c1a6d71888b7143651af8ba0a7070c0979e2811324aa5");
    check("KMAC128 sample 3",
          kmac128(key, msg200, 256, tagged_span).hex() ==
              "1f5b4e6cca02209e0dcb5ca635b89a15e271ecc760071dfd805faa38f9729230");

    // SISR brute force: every signature class of a maximal-length register
    // has exactly 2^(L-n) preimages, so empirical aliasing equals pa_sr.
    for (int n = 2; n <= 4; ++n) {
        bool ok = true;
        for (int L = n + 1; L <= 12 && ok; ++L) {
            std::vector<std::size_t> bucket(std::size_t{1} << n, 0);
            for (std::uint64_t r = 0; r < (std::uint64_t{1} << L); ++r) {
                BitVec bits(static_cast<std::size_t>(L));
                for (int j = 0; j < L; ++j) bits.set(j, (r >> j) & 1);
                ++bucket[sisr_compact(Sisr(n), bits)];
            }
            for (std::size_t sig = 0; sig < bucket.size(); ++sig)
                if (bucket[sig] != (std::uint64_t{1} << (L - n))) ok = false;
            // responses aliasing with a fixed golden one, over all others
            std::uint64_t aliasing_pairs = (std::uint64_t{1} << (L - n)) - 1;
            std::uint64_t total = (std::uint64_t{1} << L) - 1;
            if (!pa_sr(n, L).equals_fraction(aliasing_pairs, total)) ok = false;
        }
        check("SISR exhaustive preimage uniformity n=" + std::to_string(n), ok);
    }

    std::printf("%s\n", failures == 0 ? "selftest passed" : "selftest FAILED");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"keyed-signature BIST workbench"};
    app.require_subcommand(1);

    std::string bench, key_file, out_path, dict_path, soc_path, listen_addr, connect_addr;
    std::string pattern_file, dut_id, csv_path;
    std::vector<std::string> inject_specs;
    std::vector<std::uint32_t> seeds;
    std::uint32_t seed = 1;
    std::size_t pattern_count = 0;
    std::size_t digest_bits = 256;
    bool embed_responses = false;
    bool show_undetected = false;
    bool once = false;
    unsigned timeout_ms = 30000;
    AnalyzeArgs analyze_args;

    CLI::App* parse_cmd = app.add_subcommand("parse", "parse and validate a .bench netlist");
    parse_cmd->add_option("--bench", bench, "netlist file")->required();

    CLI::App* coverage_cmd =
        app.add_subcommand("coverage", "stuck-at fault coverage of a pattern set");
    coverage_cmd->add_option("--bench", bench, "netlist file")->required();
    coverage_cmd->add_option("--patterns", pattern_count, "LFSR pattern count");
    coverage_cmd->add_option("--seed", seed, "LFSR seed (nonzero)");
    coverage_cmd->add_option("--pattern-file", pattern_file, "explicit 0/1 pattern file");
    coverage_cmd->add_flag("--show-undetected", show_undetected, "list undetected fault ids");

    CLI::App* golden_cmd = app.add_subcommand("gen-golden", "golden reference signatures");
    golden_cmd->add_option("--bench", bench, "netlist file")->required();
    golden_cmd->add_option("--seeds", seeds, "LFSR seeds")->required()->delimiter(',');
    golden_cmd->add_option("--patterns", pattern_count, "patterns per seed")->required();
    golden_cmd->add_option("--key", key_file, "device key file (hex line)");
    golden_cmd->add_option("--digest-bits", digest_bits, "KMAC digest bits");
    golden_cmd->add_option("--out", out_path, "write golden-only dictionary here");

    CLI::App* dict_cmd = app.add_subcommand("build-dict", "build a fault dictionary");
    dict_cmd->add_option("--bench", bench, "netlist file")->required();
    dict_cmd->add_option("--seeds", seeds, "LFSR seeds")->required()->delimiter(',');
    dict_cmd->add_option("--patterns", pattern_count, "patterns per seed")->required();
    dict_cmd->add_option("--key", key_file, "device key file (hex line)");
    dict_cmd->add_option("--digest-bits", digest_bits, "KMAC digest bits");
    dict_cmd->add_option("--out", dict_path, "output dictionary file")->required();
    dict_cmd->add_flag("--embed-responses", embed_responses,
                       "embed raw responses (debug builds only)");

    CLI::App* onchip_cmd = app.add_subcommand("test-onchip", "run the local five-step test flow");
    onchip_cmd->add_option("--soc", soc_path, "SoC config JSON")->required();
    onchip_cmd->add_option("--dut", dut_id, "DUT id")->required();
    onchip_cmd->add_option("--seed", seed, "dictionary seed")->required();

    CLI::App* tester_cmd = app.add_subcommand("serve-tester", "run the remote tester service");
    tester_cmd->add_option("--dict", dict_path, "fault dictionary file")->required();
    tester_cmd->add_option("--listen", listen_addr, "host:port")->required();
    tester_cmd->add_option("--timeout-ms", timeout_ms, "response timeout");
    tester_cmd->add_option("--seeds", seeds, "explicit session seed order")->delimiter(',');
    tester_cmd->add_flag("--once", once, "exit after one session");

    CLI::App* agent_cmd = app.add_subcommand("run-agent", "run the SoC DUT agent");
    agent_cmd->add_option("--soc", soc_path, "SoC config JSON")->required();
    agent_cmd->add_option("--connect", connect_addr, "tester host:port")->required();
    agent_cmd->add_option("--inject-fault", inject_specs,
                          "fault to emulate, [dut=]fault-id, repeatable");

    CLI::App* analyze_cmd = app.add_subcommand("analyze", "compaction and aliasing report");
    analyze_cmd->add_option("--bench", analyze_args.benches, "netlist files")->required();
    analyze_cmd->add_option("--patterns", analyze_args.patterns, "pattern count per bench")
        ->required();
    analyze_cmd->add_option("--seed", analyze_args.seed, "LFSR seed (nonzero)");
    analyze_cmd->add_option("--key", analyze_args.key_file, "device key file");
    analyze_cmd->add_option("--digest-bits", analyze_args.digest_bits, "KMAC digest bits");
    analyze_cmd->add_option("--csv", analyze_args.csv_path, "also write CSV here");

    CLI::App* selftest_cmd =
        app.add_subcommand("selftest", "hash sample vectors and SISR brute-force oracle");
    (void)selftest_cmd;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (parse_cmd->parsed()) {
            Netlist nl = parse_bench_file(bench);
            std::vector<std::size_t> depth(nl.net_count(), 0);
            std::size_t logic_depth = 0;
            for (std::uint32_t gi : nl.level_order) {
                const Gate& g = nl.gates[gi];
                std::size_t d = 0;
                for (std::uint32_t in : g.inputs) d = std::max(d, depth[in]);
                depth[g.output] = d + 1;
                logic_depth = std::max(logic_depth, d + 1);
            }
            std::printf("%s: %zu inputs, %zu outputs, %zu gates, depth %zu\n", nl.name.c_str(),
                        nl.inputs.size(), nl.outputs.size(), nl.gates.size(), logic_depth);
            return 0;
        }
        if (coverage_cmd->parsed()) {
            Netlist nl = parse_bench_file(bench);
            std::vector<BitVec> pats;
            if (!pattern_file.empty()) {
                pats = load_pattern_file(pattern_file, nl.inputs.size());
            } else {
                if (pattern_count == 0) throw FlowError("need --patterns or --pattern-file");
                pats = make_patterns(nl, LfsrConfig(), seed, pattern_count);
            }
            CoverageReport rep = fault_coverage(nl, pats);
            std::printf("%s: %zu patterns, %zu/%zu faults detected, coverage %.2f%%\n",
                        nl.name.c_str(), pats.size(), rep.detected_faults, rep.total_faults,
                        rep.coverage * 100.0);
            if (show_undetected)
                for (const std::string& id : rep.undetected)
                    std::printf("undetected: %s\n", id.c_str());
            return 0;
        }
        if (golden_cmd->parsed() || dict_cmd->parsed()) {
            Netlist nl = parse_bench_file(bench);
            DeviceKey key = DeviceKey::load(key_file_path(key_file));
            BuildOptions opts;
            opts.embed_responses = embed_responses;
            if (dict_cmd->parsed()) {
                FaultDictionary dict =
                    build_fault_dictionary(nl, seeds, pattern_count, key, digest_bits, opts);
                save_dictionary(dict, dict_path);
                std::printf("%s: %zu entries (%zu seeds) -> %s\n", nl.name.c_str(),
                            dict.entries.size(), seeds.size(), dict_path.c_str());
                return 0;
            }
            std::vector<DictionaryEntry> entries =
                build_golden(nl, seeds, pattern_count, key, digest_bits, opts);
            for (const DictionaryEntry& e : entries)
                std::printf("seed %u: L=%llu signature %s\n", e.key.seed,
                            static_cast<unsigned long long>(e.response_length_bits),
                            e.signature.hex().c_str());
            if (!out_path.empty()) {
                FaultDictionary dict;
                dict.dut_id = nl.name;
                dict.digest_bits = digest_bits;
                dict.lfsr_degree = opts.lfsr_degree;
                dict.lfsr_taps = opts.lfsr_taps;
                dict.po_count = nl.outputs.size();
                dict.entries = std::move(entries);
                save_dictionary(dict, out_path);
                std::printf("golden dictionary -> %s\n", out_path.c_str());
            }
            return 0;
        }
        if (onchip_cmd->parsed()) {
            std::optional<std::filesystem::path> override_key;
            if (const char* env = std::getenv("KBIST_KEY_FILE"); env != nullptr && *env != '\0')
                override_key = env;
            SocConfig soc = load_soc_config(soc_path, override_key);
            TestVerdict v = run_onchip_test(soc, dut_id, seed);
            std::printf("%s seed %u: %s (signature %s, %lld us)\n", v.dut_id.c_str(), v.seed,
                        verdict_name(v.diagnosis).c_str(), v.signature.hex().c_str(),
                        static_cast<long long>(v.duration.count()));
            return 0;
        }
        if (tester_cmd->parsed()) {
            TesterOptions opts;
            opts.response_timeout = std::chrono::milliseconds(timeout_ms);
            opts.seed_order = seeds;
            TesterServer server(load_dictionary(dict_path), opts);
            TcpListener listener(listen_addr);
            std::printf("tester listening on port %u\n", listener.local_port());
            if (once) {
                std::unique_ptr<TcpStream> conn = listener.accept();
                if (!conn) throw ProtocolError(ProtocolError::Kind::Transport, "accept failed");
                conn->set_read_timeout(opts.response_timeout);
                SessionLog log = server.handle_session(*conn);
                if (!log.completed) throw FlowError("session failed: " + log.error);
                std::printf("%s seed %u: %s\n", log.request.dut_id.c_str(), log.request.seed,
                            verdict_name(log.diagnosis).c_str());
                return 0;
            }
            server.serve(listener);
            return 0;
        }
        if (agent_cmd->parsed()) {
            std::optional<std::filesystem::path> override_key;
            if (const char* env = std::getenv("KBIST_KEY_FILE"); env != nullptr && *env != '\0')
                override_key = env;
            SocConfig soc = load_soc_config(soc_path, override_key);
            for (const std::string& spec : inject_specs) {
                std::size_t eq = spec.find('=');
                std::string target, fid;
                if (eq == std::string::npos) {
                    if (soc.duts.size() != 1)
                        throw FlowError("--inject-fault needs dut=fault-id with multiple DUTs");
                    target = soc.duts.begin()->first;
                    fid = spec;
                } else {
                    target = spec.substr(0, eq);
                    fid = spec.substr(eq + 1);
                }
                auto fault = parse_fault_id(soc.dut(target), fid);
                if (!fault) throw FlowError("unknown fault id " + fid + " for DUT " + target);
                soc.injected[target] = *fault;
            }
            std::optional<DiagResult> diag = agent_run(soc, connect_addr);
            if (diag) {
                Diagnosis d{diag->verdict, diag->fault_ids};
                std::printf("tester verdict: %s\n", verdict_name(d).c_str());
            } else {
                std::printf("session ended without a verdict\n");
            }
            return 0;
        }
        if (analyze_cmd->parsed()) return run_analyze(analyze_args);
        return run_selftest();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
