#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "kbist/faultsim.hpp"

using namespace kbist;
using kbist::testing::data_path;
using kbist::testing::exhaustive_patterns;
using kbist::testing::random_netlist;
using kbist::testing::random_patterns;

namespace {

Netlist c17() { return parse_bench_file(data_path("iscas85/c17.bench")); }

BitVec pattern(std::initializer_list<int> bits) {
    BitVec p(bits.size());
    std::size_t i = 0;
    for (int b : bits) p.set(i++, b != 0);
    return p;
}

}  // namespace

TEST_CASE("c17 hand-computed responses") {
    Netlist nl = c17();
    // input order 1,2,3,6,7; output order 22,23
    BitVec r1 = simulate(nl, pattern({0, 1, 0, 1, 1}));
    CHECK(r1.get(0) == 1);
    CHECK(r1.get(1) == 1);
    BitVec r2 = simulate(nl, pattern({1, 1, 1, 1, 1}));
    CHECK(r2.get(0) == 1);
    CHECK(r2.get(1) == 0);
    BitVec r3 = simulate(nl, pattern({0, 0, 0, 0, 0}));
    CHECK(r3.get(0) == 0);
    CHECK(r3.get(1) == 0);
}

TEST_CASE("gate truth tables via single-gate netlists") {
    struct Row {
        const char* kind;
        int a, b, expect;
    };
    const Row rows[] = {
        {"AND", 1, 1, 1},  {"AND", 1, 0, 0},  {"NAND", 1, 1, 0}, {"NAND", 0, 1, 1},
        {"OR", 0, 0, 0},   {"OR", 0, 1, 1},   {"NOR", 0, 0, 1},  {"NOR", 1, 0, 0},
        {"XOR", 1, 0, 1},  {"XOR", 1, 1, 0},  {"XNOR", 1, 1, 1}, {"XNOR", 0, 1, 0},
    };
    for (const Row& r : rows) {
        Netlist nl = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = " + std::string(r.kind) +
                                 "(a, b)\n");
        CHECK(simulate(nl, pattern({r.a, r.b})).get(0) == (r.expect != 0));
    }
    Netlist not_nl = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n");
    CHECK(simulate(not_nl, pattern({0})).get(0) == 1);
    CHECK(simulate(not_nl, pattern({1})).get(0) == 0);
    Netlist buf_nl = parse_bench("INPUT(a)\nOUTPUT(y)\ny = BUF(a)\n");
    CHECK(simulate(buf_nl, pattern({1})).get(0) == 1);
    CHECK(simulate(buf_nl, pattern({0})).get(0) == 0);
}

TEST_CASE("multi-input gates reduce across all pins") {
    Netlist nl = parse_bench("INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\ny = NAND(a, b, c)\n");
    CHECK(simulate(nl, pattern({1, 1, 1})).get(0) == 0);
    CHECK(simulate(nl, pattern({1, 1, 0})).get(0) == 1);
}

TEST_CASE("fault enumeration counts and order") {
    Netlist and_nl = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n");
    std::vector<Fault> faults = enumerate_faults(and_nl);
    REQUIRE(faults.size() == 10);  // 2 PIs + 1 output + 2 pins, both polarities
    CHECK(faults[0].id(and_nl) == "a@sa0");
    CHECK(faults[1].id(and_nl) == "a@sa1");
    CHECK(faults[2].id(and_nl) == "b@sa0");
    CHECK(faults[3].id(and_nl) == "b@sa1");
    CHECK(faults[4].id(and_nl) == "y@sa0");
    CHECK(faults[5].id(and_nl) == "y@sa1");
    CHECK(faults[6].id(and_nl) == "y.in0@sa0");
    CHECK(faults[7].id(and_nl) == "y.in0@sa1");
    CHECK(faults[8].id(and_nl) == "y.in1@sa0");
    CHECK(faults[9].id(and_nl) == "y.in1@sa1");

    Netlist not_nl = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n");
    CHECK(enumerate_faults(not_nl).size() == 6);
    Netlist buf_nl = parse_bench("INPUT(a)\nOUTPUT(y)\ny = BUF(a)\n");
    CHECK(enumerate_faults(buf_nl).size() == 6);

    Netlist c = c17();
    // 11 nets and 12 gate input pins, both polarities
    CHECK(enumerate_faults(c).size() == 46);
}

TEST_CASE("fault ids parse back to the same fault") {
    Netlist nl = c17();
    for (const Fault& f : enumerate_faults(nl)) {
        auto parsed = parse_fault_id(nl, f.id(nl));
        REQUIRE(parsed.has_value());
        CHECK(parsed->net == f.net);
        CHECK(parsed->gate == f.gate);
        CHECK(parsed->pin == f.pin);
        CHECK(parsed->polarity == f.polarity);
    }
    CHECK_FALSE(parse_fault_id(nl, "nosuchnet@sa0").has_value());
    CHECK_FALSE(parse_fault_id(nl, "22@sa2").has_value());
    CHECK_FALSE(parse_fault_id(nl, "22").has_value());
}

TEST_CASE("stuck output fault pins the response bit") {
    Netlist nl = c17();
    auto pats = exhaustive_patterns(5);
    Fault f = *parse_fault_id(nl, "22@sa0");
    ResponseStream rs = simulate_faulty(nl, f, pats);
    for (std::size_t p = 0; p < pats.size(); ++p) CHECK(rs.bits.get(p * 2 + 0) == 0);

    Fault f1 = *parse_fault_id(nl, "23@sa1");
    ResponseStream rs1 = simulate_faulty(nl, f1, pats);
    for (std::size_t p = 0; p < pats.size(); ++p) CHECK(rs1.bits.get(p * 2 + 1) == 1);
}

TEST_CASE("primary input fault overrides the applied pattern") {
    Netlist nl = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n");
    Fault f = *parse_fault_id(nl, "a@sa1");
    auto pats = exhaustive_patterns(2);
    ResponseStream rs = simulate_faulty(nl, f, pats);
    // with a stuck at 1, y == b
    for (std::size_t p = 0; p < 4; ++p) CHECK(rs.bits.get(p) == pats[p].get(1));
}

TEST_CASE("pin fault hits one fanout branch only") {
    // net 11 feeds both gate 16 (pin 1) and gate 19 (pin 0)
    Netlist nl = c17();
    auto pats = exhaustive_patterns(5);
    Fault net_fault = *parse_fault_id(nl, "11@sa0");
    Fault pin_fault = *parse_fault_id(nl, "16.in1@sa0");
    ResponseStream whole = simulate_faulty(nl, net_fault, pats);
    ResponseStream branch = simulate_faulty(nl, pin_fault, pats);
    CHECK(whole.bits != branch.bits);

    // the branch fault must leave gate 19's view of net 11 intact: outputs
    // differ from the net fault somewhere on PO 23
    bool differs_on_23 = false;
    for (std::size_t p = 0; p < pats.size(); ++p)
        if (whole.bits.get(p * 2 + 1) != branch.bits.get(p * 2 + 1)) differs_on_23 = true;
    CHECK(differs_on_23);
}

TEST_CASE("batch simulation matches scalar reference") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 30; ++trial) {
        Netlist nl = random_netlist(rng, 4 + rng() % 8, 5 + rng() % 40);
        auto pats = random_patterns(rng, nl.inputs.size(), 1 + rng() % 130);
        CHECK(simulate_batch(nl, pats) == simulate_batch_scalar(nl, pats));
    }
}

TEST_CASE("faulty simulation matches scalar reference") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 8; ++trial) {
        Netlist nl = random_netlist(rng, 5, 12);
        auto pats = random_patterns(rng, nl.inputs.size(), 65);  // straddles a word boundary
        for (const Fault& f : enumerate_faults(nl))
            CHECK(simulate_faulty(nl, f, pats) == simulate_faulty_scalar(nl, f, pats));
    }
}

TEST_CASE("response stream layout is pattern-major") {
    Netlist nl = c17();
    auto pats = exhaustive_patterns(5);
    ResponseStream rs = simulate_batch(nl, pats);
    CHECK(rs.pattern_count == 32);
    CHECK(rs.po_count == 2);
    CHECK(rs.bits.size() == 64);
    for (std::size_t p = 0; p < pats.size(); ++p) {
        BitVec single = simulate(nl, pats[p]);
        CHECK(rs.bits.get(p * 2 + 0) == single.get(0));
        CHECK(rs.bits.get(p * 2 + 1) == single.get(1));
    }
}

TEST_CASE("c17 exhaustive coverage finds every fault") {
    Netlist nl = c17();
    CoverageReport rep = fault_coverage(nl, exhaustive_patterns(5));
    CHECK(rep.total_faults == 46);
    CHECK(rep.detected_faults == 46);
    CHECK(rep.coverage == doctest::Approx(1.0));
    CHECK(rep.undetected.empty());
}

TEST_CASE("redundant fault stays undetected") {
    // y = OR(a, NOT(a)) is constant 1: y@sa1 can never be observed
    Netlist nl = parse_bench("INPUT(a)\nOUTPUT(y)\nn = NOT(a)\ny = OR(a, n)\n");
    CoverageReport rep = fault_coverage(nl, exhaustive_patterns(1));
    CHECK(rep.detected_faults < rep.total_faults);
    bool found = false;
    for (const std::string& id : rep.undetected)
        if (id == "y@sa1") found = true;
    CHECK(found);
}

TEST_CASE("pattern width is validated") {
    Netlist nl = c17();
    std::vector<BitVec> bad = {BitVec(4)};
    CHECK_THROWS_AS(simulate_batch(nl, bad), std::invalid_argument);
    CHECK_THROWS_AS(simulate(nl, BitVec(6)), std::invalid_argument);
}

TEST_CASE("pattern file loader") {
    auto path = std::filesystem::temp_directory_path() / "kbist_patterns.txt";
    {
        std::ofstream out(path);
        out << "# two c17 patterns\n01011\n11111\n\n";
    }
    auto pats = load_pattern_file(path, 5);
    REQUIRE(pats.size() == 2);
    CHECK(pats[0].get(0) == 0);
    CHECK(pats[0].get(1) == 1);
    CHECK(pats[1].get(4) == 1);
    {
        std::ofstream out(path);
        out << "0101\n";
    }
    CHECK_THROWS_AS(load_pattern_file(path, 5), std::runtime_error);
    {
        std::ofstream out(path);
        out << "0101x\n";
    }
    CHECK_THROWS_AS(load_pattern_file(path, 5), std::runtime_error);
    std::filesystem::remove(path);
}
