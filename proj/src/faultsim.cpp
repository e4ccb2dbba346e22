#include "kbist/faultsim.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <stdexcept>

#include "parallel.hpp"

namespace kbist {

namespace {

constexpr std::uint64_t kAllOnes = ~std::uint64_t{0};

void check_pattern_widths(const Netlist& nl, std::span<const BitVec> patterns) {
    for (const auto& p : patterns)
        if (p.size() != nl.inputs.size())
            throw std::invalid_argument("pattern width " + std::to_string(p.size()) +
                                        " does not match " + std::to_string(nl.inputs.size()) +
                                        " primary inputs");
}

void check_fault(const Netlist& nl, const Fault& f) {
    if (f.is_pin()) {
        if (f.gate >= static_cast<std::int32_t>(nl.gates.size()) || f.pin < 0 ||
            f.pin >= static_cast<std::int32_t>(nl.gates[f.gate].inputs.size()))
            throw std::invalid_argument("fault site outside this netlist");
    } else if (f.net >= nl.net_count()) {
        throw std::invalid_argument("fault site outside this netlist");
    }
}

// ---- bit-parallel path: one 64-bit word per net, one pattern per lane ----

std::uint64_t eval_gate_word(const Gate& g, const std::vector<std::uint64_t>& val,
                             const Fault* pin_fault, std::int32_t gate_index) {
    auto in = [&](std::size_t k) -> std::uint64_t {
        if (pin_fault && pin_fault->gate == gate_index &&
            pin_fault->pin == static_cast<std::int32_t>(k))
            return pin_fault->polarity == StuckAt::One ? kAllOnes : 0;
        return val[g.inputs[k]];
    };
    std::uint64_t w = in(0);
    switch (g.kind) {
        case GateKind::And:
        case GateKind::Nand:
            for (std::size_t k = 1; k < g.inputs.size(); ++k) w &= in(k);
            return g.kind == GateKind::Nand ? ~w : w;
        case GateKind::Or:
        case GateKind::Nor:
            for (std::size_t k = 1; k < g.inputs.size(); ++k) w |= in(k);
            return g.kind == GateKind::Nor ? ~w : w;
        case GateKind::Xor:
        case GateKind::Xnor:
            for (std::size_t k = 1; k < g.inputs.size(); ++k) w ^= in(k);
            return g.kind == GateKind::Xnor ? ~w : w;
        case GateKind::Not:
            return ~w;
        case GateKind::Buf:
            return w;
    }
    return 0;
}

ResponseStream run_batch(const Netlist& nl, std::span<const BitVec> patterns,
                         const Fault* fault) {
    check_pattern_widths(nl, patterns);
    ResponseStream rs;
    rs.pattern_count = patterns.size();
    rs.po_count = nl.outputs.size();
    rs.bits = BitVec(rs.pattern_count * rs.po_count);

    const Fault* pin_fault = fault && fault->is_pin() ? fault : nullptr;
    const bool net_fault = fault && !fault->is_pin();
    const std::uint64_t forced =
        fault && fault->polarity == StuckAt::One ? kAllOnes : 0;

    std::vector<std::uint64_t> val(nl.net_count(), 0);
    for (std::size_t base = 0; base < patterns.size(); base += 64) {
        const std::size_t lanes = std::min<std::size_t>(64, patterns.size() - base);
        for (std::size_t i = 0; i < nl.inputs.size(); ++i) {
            std::uint64_t w = 0;
            for (std::size_t lane = 0; lane < lanes; ++lane)
                w |= std::uint64_t{patterns[base + lane].get(i)} << lane;
            val[nl.inputs[i]] = w;
        }
        if (net_fault) val[fault->net] = forced;
        for (auto gi : nl.level_order) {
            const Gate& g = nl.gates[gi];
            std::uint64_t w = eval_gate_word(g, val, pin_fault, static_cast<std::int32_t>(gi));
            if (net_fault && fault->net == g.output) w = forced;
            val[g.output] = w;
        }
        for (std::size_t lane = 0; lane < lanes; ++lane)
            for (std::size_t j = 0; j < rs.po_count; ++j)
                rs.bits.set((base + lane) * rs.po_count + j,
                            (val[nl.outputs[j]] >> lane) & 1u);
    }
    return rs;
}

// ---- scalar reference path, kept structurally independent ----

bool eval_gate_scalar(const Gate& g, const std::vector<std::uint8_t>& val,
                      const Fault* pin_fault, std::int32_t gate_index) {
    std::size_t ones = 0, total = g.inputs.size();
    for (std::size_t k = 0; k < total; ++k) {
        bool v;
        if (pin_fault && pin_fault->gate == gate_index &&
            pin_fault->pin == static_cast<std::int32_t>(k))
            v = pin_fault->polarity == StuckAt::One;
        else
            v = val[g.inputs[k]] != 0;
        ones += v;
    }
    switch (g.kind) {
        case GateKind::And: return ones == total;
        case GateKind::Nand: return ones != total;
        case GateKind::Or: return ones > 0;
        case GateKind::Nor: return ones == 0;
        case GateKind::Xor: return ones % 2 == 1;
        case GateKind::Xnor: return ones % 2 == 0;
        case GateKind::Not: return ones == 0;
        case GateKind::Buf: return ones == 1;
    }
    return false;
}

BitVec simulate_one(const Netlist& nl, const BitVec& pattern, const Fault* fault) {
    if (pattern.size() != nl.inputs.size())
        throw std::invalid_argument("pattern width " + std::to_string(pattern.size()) +
                                    " does not match " + std::to_string(nl.inputs.size()) +
                                    " primary inputs");
    const Fault* pin_fault = fault && fault->is_pin() ? fault : nullptr;
    const bool net_fault = fault && !fault->is_pin();
    const std::uint8_t forced = fault && fault->polarity == StuckAt::One ? 1 : 0;

    std::vector<std::uint8_t> val(nl.net_count(), 0);
    for (std::size_t i = 0; i < nl.inputs.size(); ++i) val[nl.inputs[i]] = pattern.get(i);
    if (net_fault) val[fault->net] = forced;
    for (auto gi : nl.level_order) {
        const Gate& g = nl.gates[gi];
        std::uint8_t v = eval_gate_scalar(g, val, pin_fault, static_cast<std::int32_t>(gi));
        if (net_fault && fault->net == g.output) v = forced;
        val[g.output] = v;
    }
    BitVec out(nl.outputs.size());
    for (std::size_t j = 0; j < nl.outputs.size(); ++j) out.set(j, val[nl.outputs[j]] != 0);
    return out;
}

ResponseStream run_batch_scalar(const Netlist& nl, std::span<const BitVec> patterns,
                                const Fault* fault) {
    ResponseStream rs;
    rs.pattern_count = patterns.size();
    rs.po_count = nl.outputs.size();
    for (const auto& p : patterns) rs.bits.append(simulate_one(nl, p, fault));
    return rs;
}

}  // namespace

std::string Fault::id(const Netlist& nl) const {
    const char* suffix = polarity == StuckAt::Zero ? "@sa0" : "@sa1";
    if (is_pin())
        return nl.net_name(nl.gates[gate].output) + ".in" + std::to_string(pin) + suffix;
    return nl.net_name(net) + suffix;
}

std::optional<Fault> parse_fault_id(const Netlist& nl, std::string_view id) {
    auto at = id.rfind('@');
    if (at == std::string_view::npos) return std::nullopt;
    auto polarity_str = id.substr(at + 1);
    StuckAt sa;
    if (polarity_str == "sa0")
        sa = StuckAt::Zero;
    else if (polarity_str == "sa1")
        sa = StuckAt::One;
    else
        return std::nullopt;

    auto site = id.substr(0, at);
    if (auto dot = site.rfind(".in"); dot != std::string_view::npos) {
        auto pin_str = site.substr(dot + 3);
        int pin = -1;
        auto [ptr, ec] = std::from_chars(pin_str.data(), pin_str.data() + pin_str.size(), pin);
        if (ec == std::errc() && ptr == pin_str.data() + pin_str.size()) {
            if (auto net = nl.find_net(site.substr(0, dot))) {
                auto gi = nl.driver_of()[*net];
                if (gi >= 0 && pin >= 0 &&
                    pin < static_cast<int>(nl.gates[gi].inputs.size()))
                    return Fault::at_pin(gi, pin, sa);
            }
        }
        // fall through: a net literally named "x.inN" still resolves below
    }
    if (auto net = nl.find_net(site)) return Fault::at_net(*net, sa);
    return std::nullopt;
}

std::vector<Fault> enumerate_faults(const Netlist& nl) {
    std::vector<Fault> out;
    for (auto net : nl.inputs) {
        out.push_back(Fault::at_net(net, StuckAt::Zero));
        out.push_back(Fault::at_net(net, StuckAt::One));
    }
    for (auto gi : nl.level_order) {
        const Gate& g = nl.gates[gi];
        out.push_back(Fault::at_net(g.output, StuckAt::Zero));
        out.push_back(Fault::at_net(g.output, StuckAt::One));
        for (std::size_t pin = 0; pin < g.inputs.size(); ++pin) {
            out.push_back(Fault::at_pin(static_cast<std::int32_t>(gi),
                                        static_cast<std::int32_t>(pin), StuckAt::Zero));
            out.push_back(Fault::at_pin(static_cast<std::int32_t>(gi),
                                        static_cast<std::int32_t>(pin), StuckAt::One));
        }
    }
    return out;
}

BitVec simulate(const Netlist& nl, const BitVec& pattern) {
    return simulate_one(nl, pattern, nullptr);
}

ResponseStream simulate_batch(const Netlist& nl, std::span<const BitVec> patterns) {
    return run_batch(nl, patterns, nullptr);
}

ResponseStream simulate_faulty(const Netlist& nl, const Fault& fault,
                               std::span<const BitVec> patterns) {
    check_fault(nl, fault);
    return run_batch(nl, patterns, &fault);
}

ResponseStream simulate_batch_scalar(const Netlist& nl, std::span<const BitVec> patterns) {
    return run_batch_scalar(nl, patterns, nullptr);
}

ResponseStream simulate_faulty_scalar(const Netlist& nl, const Fault& fault,
                                      std::span<const BitVec> patterns) {
    check_fault(nl, fault);
    return run_batch_scalar(nl, patterns, &fault);
}

CoverageReport fault_coverage(const Netlist& nl, std::span<const BitVec> patterns) {
    if (patterns.empty()) throw std::invalid_argument("fault coverage needs at least one pattern");
    const auto golden = simulate_batch(nl, patterns);
    const auto faults = enumerate_faults(nl);

    std::vector<std::uint8_t> detected(faults.size(), 0);
    detail::parallel_for(faults.size(), [&](std::size_t i) {
        detected[i] = simulate_faulty(nl, faults[i], patterns).bits != golden.bits;
    });

    CoverageReport report;
    report.total_faults = faults.size();
    for (std::size_t i = 0; i < faults.size(); ++i) {
        if (detected[i])
            ++report.detected_faults;
        else
            report.undetected.push_back(faults[i].id(nl));
    }
    report.coverage = report.total_faults
                          ? static_cast<double>(report.detected_faults) / report.total_faults
                          : 0.0;
    return report;
}

std::vector<BitVec> load_pattern_file(const std::filesystem::path& path,
                                      std::size_t expected_width) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pattern file " + path.string());
    std::vector<BitVec> patterns;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        BitVec p;
        try {
            p = BitVec::from_string(line);
        } catch (const std::invalid_argument&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": patterns must be 0/1 strings");
        }
        if (p.size() != expected_width)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": pattern width " + std::to_string(p.size()) +
                                     " does not match " + std::to_string(expected_width) +
                                     " primary inputs");
        patterns.push_back(std::move(p));
    }
    return patterns;
}

}  // namespace kbist
