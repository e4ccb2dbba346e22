#ifndef KBIST_NETLIST_HPP
#define KBIST_NETLIST_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kbist {

enum class GateKind : std::uint8_t { And, Nand, Or, Nor, Xor, Xnor, Not, Buf };

std::string_view gate_kind_name(GateKind kind);

struct Gate {
    std::uint32_t output;               // net driven by this gate
    GateKind kind;
    std::vector<std::uint32_t> inputs;  // net ids, pin order
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line_no)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg),
          line(line_no) {}
    int line;
};

// Levelized combinational gate graph. Net identifiers are interned to dense
// indices; `inputs`/`outputs` keep the .bench declaration order, which fixes
// pattern-bit and response-bit ordering everywhere downstream.
class Netlist {
public:
    std::string name;
    std::vector<std::uint32_t> inputs;       // primary-input nets
    std::vector<std::uint32_t> outputs;      // primary-output nets
    std::vector<Gate> gates;                 // in source order
    std::vector<std::uint32_t> level_order;  // gate indices, topological

    std::size_t net_count() const { return net_names_.size(); }
    const std::string& net_name(std::uint32_t net) const { return net_names_[net]; }
    std::optional<std::uint32_t> find_net(std::string_view name) const;
    std::uint32_t intern_net(std::string_view name);

    // gate index driving a net, or -1 for primary inputs
    const std::vector<std::int32_t>& driver_of() const { return driver_; }

    void rebuild_drivers();  // recompute driver_ from gates; checks duplicates
    void validate() const;   // structural invariants (arity, references)

private:
    std::vector<std::string> net_names_;
    std::unordered_map<std::string, std::uint32_t> net_index_;
    std::vector<std::int32_t> driver_;
};

Netlist parse_bench(std::string_view text, std::string_view name = "");
Netlist parse_bench_file(const std::filesystem::path& path);
std::string to_bench(const Netlist& nl);

// Populates level_order. Gates at equal depth keep their source order.
// Throws on combinational cycles, naming one net on the cycle.
void levelize(Netlist& nl);

}  // namespace kbist

#endif
