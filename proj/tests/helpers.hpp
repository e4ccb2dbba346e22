#ifndef KBIST_TESTS_HELPERS_HPP
#define KBIST_TESTS_HELPERS_HPP

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "kbist/bitvec.hpp"
#include "kbist/netlist.hpp"

namespace kbist::testing {

inline std::filesystem::path data_path(const std::string& rel) {
    return std::filesystem::path(KBIST_DATA_DIR) / rel;
}

inline std::vector<BitVec> exhaustive_patterns(std::size_t width) {
    std::vector<BitVec> out;
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << width); ++v) {
        BitVec p(width);
        for (std::size_t i = 0; i < width; ++i) p.set(i, (v >> i) & 1);
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<BitVec> random_patterns(std::mt19937_64& rng, std::size_t width,
                                           std::size_t count) {
    std::vector<BitVec> out;
    for (std::size_t p = 0; p < count; ++p) {
        BitVec v(width);
        for (std::size_t i = 0; i < width; ++i) v.set(i, rng() & 1);
        out.push_back(std::move(v));
    }
    return out;
}

// Random layered combinational netlist, emitted as .bench text and parsed,
// so generated circuits also exercise the parser.
inline Netlist random_netlist(std::mt19937_64& rng, std::size_t n_inputs, std::size_t n_gates) {
    static const char* kKinds[] = {"AND", "NAND", "OR", "NOR", "XOR", "XNOR", "NOT", "BUF"};
    std::string text;
    std::vector<std::string> nets;
    for (std::size_t i = 0; i < n_inputs; ++i) {
        nets.push_back("i" + std::to_string(i));
        text += "INPUT(" + nets.back() + ")\n";
    }
    std::string gates_text;
    std::vector<std::string> gate_outs;
    for (std::size_t g = 0; g < n_gates; ++g) {
        std::string kind = kKinds[rng() % 8];
        std::size_t arity = kind == "NOT" || kind == "BUF" ? 1 : 2 + rng() % 2;
        std::string out = "g" + std::to_string(g);
        gates_text += out + " = " + kind + "(";
        for (std::size_t a = 0; a < arity; ++a) {
            if (a > 0) gates_text += ", ";
            gates_text += nets[rng() % nets.size()];
        }
        gates_text += ")\n";
        nets.push_back(out);
        gate_outs.push_back(out);
    }
    // last gate is always observable; a few more POs widen the response
    std::vector<std::string> outs = {gate_outs.back()};
    for (int i = 0; i < 3 && gate_outs.size() > 1; ++i) {
        std::string cand = gate_outs[rng() % gate_outs.size()];
        if (std::find(outs.begin(), outs.end(), cand) == outs.end()) outs.push_back(cand);
    }
    for (const std::string& o : outs) text += "OUTPUT(" + o + ")\n";
    text += gates_text;
    return parse_bench(text, "rand" + std::to_string(rng() % 100000));
}

}  // namespace kbist::testing

#endif
