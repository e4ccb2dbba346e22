#include "kbist/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace kbist {

std::string_view gate_kind_name(GateKind kind) {
    switch (kind) {
        case GateKind::And: return "AND";
        case GateKind::Nand: return "NAND";
        case GateKind::Or: return "OR";
        case GateKind::Nor: return "NOR";
        case GateKind::Xor: return "XOR";
        case GateKind::Xnor: return "XNOR";
        case GateKind::Not: return "NOT";
        case GateKind::Buf: return "BUF";
    }
    return "?";
}

namespace {

std::optional<GateKind> kind_from_name(std::string upper) {
    if (upper == "AND") return GateKind::And;
    if (upper == "NAND") return GateKind::Nand;
    if (upper == "OR") return GateKind::Or;
    if (upper == "NOR") return GateKind::Nor;
    if (upper == "XOR") return GateKind::Xor;
    if (upper == "XNOR") return GateKind::Xnor;
    if (upper == "NOT") return GateKind::Not;
    if (upper == "BUF" || upper == "BUFF") return GateKind::Buf;
    return std::nullopt;
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool valid_net_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' &&
           c != ',' && c != '=' && c != '#';
}

}  // namespace

std::optional<std::uint32_t> Netlist::find_net(std::string_view name) const {
    auto it = net_index_.find(std::string(name));
    if (it == net_index_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t Netlist::intern_net(std::string_view name) {
    auto it = net_index_.find(std::string(name));
    if (it != net_index_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(net_names_.size());
    net_names_.emplace_back(name);
    net_index_.emplace(net_names_.back(), id);
    return id;
}

void Netlist::rebuild_drivers() {
    driver_.assign(net_count(), -1);
    std::vector<bool> is_input(net_count(), false);
    for (auto net : inputs) {
        if (is_input[net])
            throw std::runtime_error("duplicate INPUT declaration for net " + net_name(net));
        is_input[net] = true;
    }
    for (std::size_t g = 0; g < gates.size(); ++g) {
        auto out = gates[g].output;
        if (is_input[out])
            throw std::runtime_error("net " + net_name(out) + " is both a primary input and a gate output");
        if (driver_[out] != -1)
            throw std::runtime_error("duplicate driver for net " + net_name(out));
        driver_[out] = static_cast<std::int32_t>(g);
    }
}

void Netlist::validate() const {
    std::vector<bool> driven(net_count(), false);
    for (auto net : inputs) driven[net] = true;
    for (const auto& g : gates) driven[g.output] = true;

    for (const auto& g : gates) {
        const bool unary = g.kind == GateKind::Not || g.kind == GateKind::Buf;
        if (unary && g.inputs.size() != 1)
            throw std::runtime_error(std::string(gate_kind_name(g.kind)) + " gate " +
                                     net_name(g.output) + " must have exactly one input");
        if (!unary && g.inputs.size() < 2)
            throw std::runtime_error(std::string(gate_kind_name(g.kind)) + " gate " +
                                     net_name(g.output) + " needs at least two inputs");
        for (auto in : g.inputs)
            if (!driven[in])
                throw std::runtime_error("undefined net " + net_name(in) + " used by gate " +
                                         net_name(g.output));
    }
    for (auto out : outputs)
        if (!driven[out]) throw std::runtime_error("undefined net " + net_name(out) + " declared OUTPUT");
}

Netlist parse_bench(std::string_view text, std::string_view name) {
    Netlist nl;
    nl.name = name;

    struct PendingGate {
        std::string out;
        GateKind kind;
        std::vector<std::string> ins;
        int line;
    };
    std::vector<std::string> input_decls, output_decls;
    std::vector<PendingGate> pending;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        auto expect_paren_arg = [&](std::string_view rest) -> std::string {
            rest = trim(rest);
            if (rest.empty() || rest.front() != '(' || rest.back() != ')')
                throw ParseError("expected '(net)'", line_no);
            auto arg = trim(rest.substr(1, rest.size() - 2));
            if (arg.empty() || !std::all_of(arg.begin(), arg.end(), valid_net_char))
                throw ParseError("bad net identifier '" + std::string(arg) + "'", line_no);
            return std::string(arg);
        };

        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            // INPUT(x) / OUTPUT(y)
            auto paren = line.find('(');
            if (paren == std::string_view::npos)
                throw ParseError("unrecognized statement '" + std::string(line) + "'", line_no);
            auto keyword = to_upper(trim(line.substr(0, paren)));
            auto arg = expect_paren_arg(line.substr(paren));
            if (keyword == "INPUT")
                input_decls.push_back(arg);
            else if (keyword == "OUTPUT")
                output_decls.push_back(arg);
            else
                throw ParseError("unrecognized keyword '" + keyword + "'", line_no);
            continue;
        }

        // y = KIND(a, b, ...)
        auto lhs = trim(line.substr(0, eq));
        if (lhs.empty() || !std::all_of(lhs.begin(), lhs.end(), valid_net_char))
            throw ParseError("bad net identifier '" + std::string(lhs) + "'", line_no);
        auto rhs = trim(line.substr(eq + 1));
        auto paren = rhs.find('(');
        if (paren == std::string_view::npos || rhs.back() != ')')
            throw ParseError("expected KIND(net, ...)", line_no);
        auto kind_name = to_upper(trim(rhs.substr(0, paren)));
        auto kind = kind_from_name(kind_name);
        if (!kind) throw ParseError("unknown gate kind '" + kind_name + "'", line_no);

        PendingGate g{std::string(lhs), *kind, {}, line_no};
        std::string_view args = rhs.substr(paren + 1, rhs.size() - paren - 2);
        std::size_t start = 0;
        while (true) {
            auto comma = args.find(',', start);
            auto piece = trim(args.substr(start, comma == std::string_view::npos
                                                     ? std::string_view::npos
                                                     : comma - start));
            if (piece.empty() || !std::all_of(piece.begin(), piece.end(), valid_net_char))
                throw ParseError("bad net identifier in gate input list", line_no);
            g.ins.emplace_back(piece);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        pending.push_back(std::move(g));
    }

    std::unordered_map<std::string, int> seen_inputs, seen_outputs;
    for (const auto& in : input_decls) {
        if (!seen_inputs.emplace(in, 1).second)
            throw std::runtime_error("duplicate INPUT declaration for net " + in);
        nl.inputs.push_back(nl.intern_net(in));
    }
    for (const auto& g : pending) nl.intern_net(g.out);
    for (const auto& out : output_decls) {
        if (!seen_outputs.emplace(out, 1).second)
            throw std::runtime_error("duplicate OUTPUT declaration for net " + out);
        auto net = nl.find_net(out);
        if (!net) throw std::runtime_error("undefined net " + out + " declared OUTPUT");
        nl.outputs.push_back(*net);
    }
    for (auto& g : pending) {
        Gate gate;
        gate.output = *nl.find_net(g.out);
        gate.kind = g.kind;
        for (const auto& in : g.ins) {
            auto net = nl.find_net(in);
            if (!net)
                throw ParseError("undefined net " + in + " used by gate " + g.out, g.line);
            gate.inputs.push_back(*net);
        }
        nl.gates.push_back(std::move(gate));
    }

    nl.rebuild_drivers();
    nl.validate();
    levelize(nl);
    return nl;
}

Netlist parse_bench_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_bench(buf.str(), path.stem().string());
}

std::string to_bench(const Netlist& nl) {
    std::ostringstream out;
    if (!nl.name.empty()) out << "# " << nl.name << "\n";
    for (auto net : nl.inputs) out << "INPUT(" << nl.net_name(net) << ")\n";
    for (auto net : nl.outputs) out << "OUTPUT(" << nl.net_name(net) << ")\n";
    for (const auto& g : nl.gates) {
        out << nl.net_name(g.output) << " = " << gate_kind_name(g.kind) << "(";
        for (std::size_t i = 0; i < g.inputs.size(); ++i) {
            if (i) out << ", ";
            out << nl.net_name(g.inputs[i]);
        }
        out << ")\n";
    }
    return out.str();
}

void levelize(Netlist& nl) {
    nl.rebuild_drivers();
    nl.validate();
    const auto& driver = nl.driver_of();

    const std::size_t n_gates = nl.gates.size();
    std::vector<std::uint32_t> depth(n_gates, 0);
    std::vector<std::uint32_t> unresolved(n_gates, 0);
    std::vector<std::vector<std::uint32_t>> consumers(n_gates);

    for (std::size_t g = 0; g < n_gates; ++g) {
        for (auto in : nl.gates[g].inputs) {
            auto d = driver[in];
            if (d >= 0) {
                ++unresolved[g];
                consumers[d].push_back(static_cast<std::uint32_t>(g));
            }
        }
    }

    std::vector<std::uint32_t> ready;
    for (std::size_t g = 0; g < n_gates; ++g)
        if (unresolved[g] == 0) ready.push_back(static_cast<std::uint32_t>(g));

    std::size_t resolved = 0;
    while (!ready.empty()) {
        std::vector<std::uint32_t> next;
        for (auto g : ready) {
            ++resolved;
            for (auto c : consumers[g]) {
                depth[c] = std::max(depth[c], depth[g] + 1);
                if (--unresolved[c] == 0) next.push_back(c);
            }
        }
        ready = std::move(next);
    }

    if (resolved != n_gates) {
        // walk the driver chain inside the unresolved set until a repeat
        std::uint32_t g = 0;
        while (unresolved[g] == 0) ++g;
        std::vector<bool> on_path(n_gates, false);
        while (!on_path[g]) {
            on_path[g] = true;
            for (auto in : nl.gates[g].inputs) {
                auto d = driver[in];
                if (d >= 0 && unresolved[d] > 0) {
                    g = static_cast<std::uint32_t>(d);
                    break;
                }
            }
        }
        throw std::runtime_error("combinational cycle through net " +
                                 nl.net_name(nl.gates[g].output));
    }

    nl.level_order.resize(n_gates);
    for (std::size_t g = 0; g < n_gates; ++g) nl.level_order[g] = static_cast<std::uint32_t>(g);
    std::stable_sort(nl.level_order.begin(), nl.level_order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return depth[a] < depth[b]; });
}

}  // namespace kbist
