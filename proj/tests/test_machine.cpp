#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "iflow/machine.hpp"
#include "support.hpp"

using namespace iflow;
using namespace testutil;

TEST_CASE("run: constant machine base case") {
    auto m = constant_machine();
    auto dist = run(m, 0, {});
    REQUIRE(dist.size() == 1);
    Trace expected{{OutSym{0, 0}}, {0}};
    CHECK(dist.mass(expected) == 1);
}

TEST_CASE("run: deterministic echo machine is a point mass on its unique trace") {
    auto m = echo_machine();
    InputSeq inputs = {InSym{1, 0}, InSym{0, 0}, InSym{1, 0}};
    auto dist = run(m, m.initial(), inputs);
    REQUIRE(dist.size() == 1);
    const auto& [trace, p] = *dist.support().begin();
    CHECK(p == 1);
    CHECK(trace.outputs == OutputSeq{OutSym{0, 0}, OutSym{0, 1}, OutSym{0, 0}, OutSym{0, 1}});
    CHECK(trace.states == StateSeq{0, 1, 0, 1});
    // Any other trace gets probability zero.
    Trace other{{OutSym{0, 0}, OutSym{0, 0}, OutSym{0, 0}, OutSym{0, 1}}, {0, 1, 0, 1}};
    CHECK(dist.mass(other) == 0);
}

TEST_CASE("run: fair-coin machine splits one step into two half-probability traces") {
    auto m = coin_machine();
    auto dist = run(m, 0, {InSym{0, 0}});
    REQUIRE(dist.size() == 2);
    Trace stay{{OutSym{0, 0}, OutSym{0, 0}}, {0, 0}};
    Trace move{{OutSym{0, 0}, OutSym{0, 1}}, {0, 1}};
    CHECK(dist.mass(stay) == Rational(1, 2));
    CHECK(dist.mass(move) == Rational(1, 2));
}

TEST_CASE("run: rejects unknown states and symbols") {
    auto m = constant_machine();
    CHECK_THROWS_AS(run(m, 5, {}), ContractError);
    CHECK_THROWS_AS(run(m, 0, {InSym{7, 0}}), ContractError);
}

TEST_CASE("trace_prob_closed: base case and delta mismatch") {
    auto m = coin_machine();
    CHECK(trace_prob_closed(m, 0, {}, {OutSym{0, 0}}, {0}) == 1);
    // Output not matching sigma(state) kills the product.
    CHECK(trace_prob_closed(m, 0, {}, {OutSym{0, 1}}, {0}) == 0);
    CHECK_THROWS_AS(trace_prob_closed(m, 0, {InSym{0, 0}}, {OutSym{0, 0}}, {0}), ContractError);
}

TEST_CASE("trace_prob_closed agrees with run on random machines") {
    Rng rng(1234);
    for (int round = 0; round < 60; ++round) {
        auto m = random_machine(rng, 4, 2);
        const int k = static_cast<int>(rng.below(4));
        InputSeq inputs;
        for (int i = 0; i < k; ++i) {
            inputs.push_back(
                InSym{static_cast<Sym>(rng.below(static_cast<std::uint64_t>(m.alphabets().hi_in.size()))),
                      static_cast<Sym>(rng.below(static_cast<std::uint64_t>(m.alphabets().lo_in.size())))});
        }
        const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(m.state_count())));
        auto dist = run(m, start, inputs);

        Rational total(0);
        for (const auto& [trace, p] : dist.support()) {
            CHECK(trace_prob_closed(m, start, inputs, trace.outputs, trace.states) == p);
            total += p;
        }
        CHECK(total == 1);

        // A couple of off-support traces must evaluate to zero.
        for (int probe = 0; probe < 3; ++probe) {
            OutputSeq outputs;
            StateSeq states;
            for (int i = 0; i <= k; ++i) {
                outputs.push_back(OutSym{
                    static_cast<Sym>(rng.below(static_cast<std::uint64_t>(m.alphabets().hi_out.size()))),
                    static_cast<Sym>(rng.below(static_cast<std::uint64_t>(m.alphabets().lo_out.size())))});
                states.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(m.state_count()))));
            }
            CHECK(trace_prob_closed(m, start, inputs, outputs, states) ==
                  dist.mass(Trace{outputs, states}));
        }
    }
}

TEST_CASE("output_dist: point mass for deterministic, halves for the coin") {
    auto echo = echo_machine();
    auto d1 = output_dist(echo, {InSym{1, 0}});
    REQUIRE(d1.size() == 1);
    CHECK(d1.mass(OutputSeq{OutSym{0, 0}, OutSym{0, 1}}) == 1);

    auto coin = coin_machine();
    auto d2 = output_dist(coin, {InSym{0, 0}});
    CHECK(d2.mass(OutputSeq{OutSym{0, 0}, OutSym{0, 0}}) == Rational(1, 2));
    CHECK(d2.mass(OutputSeq{OutSym{0, 0}, OutSym{0, 1}}) == Rational(1, 2));
}

TEST_CASE("output_dist: normalization on random machines") {
    Rng rng(99);
    for (int round = 0; round < 40; ++round) {
        auto m = random_machine(rng);
        auto inputs = enumerate_inputs(m.alphabets(), 2);
        for (const auto& i : inputs) {
            CHECK(output_dist(m, i).total() == 1);
        }
    }
}

TEST_CASE("project_low: point mass, H-collapse and mass preservation") {
    Distribution<OutputSeq> point = Distribution<OutputSeq>::point({OutSym{1, 0}, OutSym{0, 1}});
    auto projected = project_low(point);
    REQUIRE(projected.size() == 1);
    CHECK(projected.mass(LowSeq{0, 1}) == 1);

    // Two outputs differing only in the high component collapse.
    Distribution<OutputSeq> two;
    two.add({OutSym{0, 1}}, Rational(1, 3));
    two.add({OutSym{1, 1}}, Rational(2, 3));
    auto collapsed = project_low(two);
    REQUIRE(collapsed.size() == 1);
    CHECK(collapsed.mass(LowSeq{1}) == 1);
}

TEST_CASE("project_low: class masses equal brute-force sums on a random distribution") {
    Rng rng(5);
    for (int round = 0; round < 50; ++round) {
        Distribution<OutputSeq> dist;
        std::vector<OutputSeq> keys;
        for (int i = 0; i < 4; ++i) {
            OutputSeq seq;
            for (int j = 0; j < 2; ++j) {
                seq.push_back(OutSym{static_cast<Sym>(rng.below(2)), static_cast<Sym>(rng.below(2))});
            }
            keys.push_back(seq);
        }
        int weights[4];
        int total = 0;
        for (auto& w : weights) {
            w = 1 + static_cast<int>(rng.below(5));
            total += w;
        }
        for (int i = 0; i < 4; ++i) dist.add(keys[static_cast<std::size_t>(i)], Rational(weights[i], total));

        auto projected = project_low(dist);
        CHECK(projected.total() == dist.total());
        for (const auto& [low, mass] : projected.support()) {
            Rational brute(0);
            for (const auto& [seq, p] : dist.support()) {
                if (low_outputs(seq) == low) brute += p;
            }
            CHECK(brute == mass);
        }

        // Idempotence: re-projecting an embedding of the projected
        // distribution (fixed high component) changes nothing.
        auto embedded = projected.pushforward([](const LowSeq& low) {
            OutputSeq seq;
            for (Sym l : low) seq.push_back(OutSym{0, l});
            return seq;
        });
        CHECK(project_low(embedded) == projected);
    }
}

TEST_CASE("check_noninterference: constant machine is noninterfering") {
    auto result = check_noninterference(constant_machine(), 3, {.probabilistic = true});
    CHECK_FALSE(result.interferes());
    CHECK(result.pairs_enumerated > 0);
}

TEST_CASE("check_noninterference: echo machine yields the first lexicographic witness") {
    auto result = check_noninterference(echo_machine(), 2, {.probabilistic = true});
    REQUIRE(result.interferes());
    // Both sequences share the low projection and differ at the first high
    // input; the lexicographically first such pair.
    CHECK(result.witness->first == InputSeq{InSym{0, 0}});
    CHECK(result.witness->second == InputSeq{InSym{1, 0}});

    // Re-verify the witness through the output distributions.
    CHECK(low_inputs(result.witness->first) == low_inputs(result.witness->second));
    CHECK(low_output_dist(echo_machine(), result.witness->first) !=
          low_output_dist(echo_machine(), result.witness->second));
}

TEST_CASE("check_noninterference: machine driven by low inputs only is noninterfering") {
    auto result = check_noninterference(low_copy_machine(), 2, {.probabilistic = true});
    CHECK_FALSE(result.interferes());
}

TEST_CASE("check_noninterference: deterministic mode equals probabilistic mode on deterministic machines") {
    Rng rng(42);
    int checked = 0;
    while (checked < 40) {
        auto m = random_machine(rng, 3, 2);
        if (!m.deterministic()) continue;
        ++checked;
        auto det = check_noninterference(m, 2, {.probabilistic = false});
        auto prob = check_noninterference(m, 2, {.probabilistic = true});
        CHECK(det.interferes() == prob.interferes());
        if (det.interferes()) {
            CHECK(det.witness->first == prob.witness->first);
            CHECK(det.witness->second == prob.witness->second);
        }
    }
}

TEST_CASE("check_noninterference: deterministic mode rejects probabilistic machines") {
    CHECK_THROWS_AS(check_noninterference(coin_machine(), 1, {.probabilistic = false}),
                    ContractError);
}

TEST_CASE("check_noninterference: witnesses re-verify on random machines") {
    Rng rng(7);
    for (int round = 0; round < 60; ++round) {
        auto m = random_machine(rng, 3, 2);
        auto result = check_noninterference(m, 2, {.probabilistic = true});
        if (result.interferes()) {
            CHECK(low_inputs(result.witness->first) == low_inputs(result.witness->second));
            CHECK(low_output_dist(m, result.witness->first) !=
                  low_output_dist(m, result.witness->second));
        }
    }
}

TEST_CASE("check_noninterference: budget errors report the enumeration size") {
    auto m = echo_machine();
    CheckOptions options;
    options.budget = 5;
    try {
        check_noninterference(m, 3, options);
        FAIL("expected BudgetError");
    } catch (const BudgetError& e) {
        CHECK(e.required > 5);
    }
}

TEST_CASE("machine construction validates totality and normalization") {
    auto a = alphabets(1, 1, 1, 1);
    // Missing transition row.
    CHECK_THROWS_AS(MooreMachine({"x"}, 0, a, {}, {OutSym{0, 0}}), ContractError);
    // Distribution not summing to 1.
    Distribution<int> bad;
    bad.add(0, Rational(1, 2));
    CHECK_THROWS_AS(MooreMachine({"x"}, 0, a, {{bad}}, {OutSym{0, 0}}), ContractError);
    // Initial state out of range.
    CHECK_THROWS_AS(
        MooreMachine({"x"}, 2, a, {{Distribution<int>::point(0)}}, {OutSym{0, 0}}),
        ContractError);
}

TEST_CASE("distribution: float mode comparison") {
    Distribution<int> a, b;
    a.add(0, Rational(1, 3));
    a.add(1, Rational(2, 3));
    b.add(0, Rational(1, 3));
    b.add(1, Rational(2, 3));
    CHECK(a.approx_equals(b, 1e-12));
    b.add(1, Rational(1, 1000000));
    CHECK_FALSE(a.approx_equals(b, 1e-12));
    CHECK(a.approx_equals(b, 1e-3));
}
