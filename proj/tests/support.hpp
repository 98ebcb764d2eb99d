#pragma once

// Shared machine/SEM builders and generators for the test suites.

#include <string>
#include <vector>

#include "iflow/machine.hpp"
#include "iflow/mimic.hpp"
#include "iflow/rng.hpp"
#include "iflow/sem.hpp"

namespace testutil {

using namespace iflow;

inline Alphabet named(const std::string& prefix, int size) {
    Alphabet a;
    for (int i = 0; i < size; ++i) a.symbols.push_back(prefix + std::to_string(i));
    return a;
}

inline ChannelAlphabets alphabets(int hi_in, int lo_in, int hi_out, int lo_out) {
    return ChannelAlphabets{named("h", hi_in), named("l", lo_in), named("a", hi_out),
                            named("b", lo_out)};
}

// Single state, self loop, constant output.
inline MooreMachine constant_machine() {
    auto a = alphabets(2, 1, 1, 2);
    std::vector<std::vector<Distribution<int>>> transition = {
        std::vector<Distribution<int>>(static_cast<std::size_t>(a.input_count()),
                                       Distribution<int>::point(0))};
    return MooreMachine({"c"}, 0, a, transition, {OutSym{0, 0}});
}

// Fair-coin transitions between two states whose low outputs differ; a single
// input pair.
inline MooreMachine coin_machine() {
    auto a = alphabets(1, 1, 1, 2);
    Distribution<int> coin;
    coin.add(0, Rational(1, 2));
    coin.add(1, Rational(1, 2));
    std::vector<std::vector<Distribution<int>>> transition = {{coin}, {coin}};
    return MooreMachine({"s0", "s1"}, 0, a, transition, {OutSym{0, 0}, OutSym{0, 1}});
}

// The low output at t+1 copies the high input at t.
inline MooreMachine echo_machine() {
    auto a = alphabets(2, 1, 1, 2);
    std::vector<std::vector<Distribution<int>>> transition(2);
    for (int s = 0; s < 2; ++s) {
        transition[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(a.input_count()));
        for (Sym h = 0; h < 2; ++h) {
            for (Sym l = 0; l < 1; ++l) {
                transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(
                    a.input_index(InSym{h, l}))] = Distribution<int>::point(h);
            }
        }
    }
    return MooreMachine({"e0", "e1"}, 0, a, transition, {OutSym{0, 0}, OutSym{0, 1}});
}

// The low output at t+1 copies the low input at t; high inputs are ignored.
inline MooreMachine low_copy_machine() {
    auto a = alphabets(2, 2, 1, 2);
    std::vector<std::vector<Distribution<int>>> transition(2);
    for (int s = 0; s < 2; ++s) {
        transition[static_cast<std::size_t>(s)].resize(static_cast<std::size_t>(a.input_count()));
        for (Sym h = 0; h < 2; ++h) {
            for (Sym l = 0; l < 2; ++l) {
                transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(
                    a.input_index(InSym{h, l}))] = Distribution<int>::point(l);
            }
        }
    }
    return MooreMachine({"f0", "f1"}, 0, a, transition, {OutSym{0, 0}, OutSym{0, 1}});
}

// Random machine with exact rational transition rows (weights 0..3).
inline MooreMachine random_machine(Rng& rng, int max_states = 3, int max_alpha = 2) {
    const int states = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_states)));
    auto pick = [&](int lo, int hi) {
        return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    };
    auto a = alphabets(pick(1, max_alpha), pick(1, max_alpha), pick(1, max_alpha),
                       pick(1, max_alpha));

    std::vector<std::string> names;
    for (int s = 0; s < states; ++s) names.push_back("r" + std::to_string(s));

    std::vector<std::vector<Distribution<int>>> transition(static_cast<std::size_t>(states));
    for (int s = 0; s < states; ++s) {
        for (int i = 0; i < a.input_count(); ++i) {
            std::vector<int> weights(static_cast<std::size_t>(states));
            int total = 0;
            while (total == 0) {
                for (auto& w : weights) {
                    w = static_cast<int>(rng.below(4));
                }
                total = 0;
                for (int w : weights) total += w;
            }
            Distribution<int> dist;
            for (int t = 0; t < states; ++t) {
                dist.add(t, Rational(weights[static_cast<std::size_t>(t)], total));
            }
            transition[static_cast<std::size_t>(s)].push_back(std::move(dist));
        }
    }
    std::vector<OutSym> output;
    for (int s = 0; s < states; ++s) {
        output.push_back(OutSym{static_cast<Sym>(rng.below(static_cast<std::uint64_t>(a.hi_out.size()))),
                                static_cast<Sym>(rng.below(static_cast<std::uint64_t>(a.lo_out.size())))});
    }
    return MooreMachine(std::move(names), 0, a, std::move(transition), std::move(output));
}

// Random observed trace over alphabets with two high inputs and two low
// outputs (the interfering construction's hypothesis).
inline ObservedTrace random_trace(const ChannelAlphabets& a, int k, Rng& rng) {
    ObservedTrace trace;
    for (int i = 0; i < k; ++i) {
        trace.inputs.push_back(
            InSym{static_cast<Sym>(rng.below(static_cast<std::uint64_t>(a.hi_in.size()))),
                  static_cast<Sym>(rng.below(static_cast<std::uint64_t>(a.lo_in.size())))});
    }
    for (int i = 0; i <= k; ++i) {
        trace.outputs.push_back(
            OutSym{static_cast<Sym>(rng.below(static_cast<std::uint64_t>(a.hi_out.size()))),
                   static_cast<Sym>(rng.below(static_cast<std::uint64_t>(a.lo_out.size())))});
    }
    return trace;
}

// Random small SEM with binary/ternary ranges and exact rational rows.
inline Sem random_sem(Rng& rng, int max_vars = 4) {
    const int n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_vars - 1)));
    std::vector<SemVariable> vars;
    for (int i = 0; i < n; ++i) {
        SemVariable v;
        v.name = "V" + std::to_string(i);
        const int range = 2 + static_cast<int>(rng.below(2));
        for (int r = 0; r < range; ++r) v.range.push_back(std::to_string(r));
        // Each earlier variable is a parent with probability 1/2; parentless
        // variables become exogenous half the time.
        for (int p = 0; p < i; ++p) {
            if (rng.below(2) == 0) v.parents.push_back(p);
        }
        v.exogenous = v.parents.empty() && rng.below(2) == 0;
        std::size_t rows = 1;
        for (int p : v.parents) rows *= vars[static_cast<std::size_t>(p)].range.size();
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<int> weights(static_cast<std::size_t>(range));
            int total = 0;
            while (total == 0) {
                for (auto& w : weights) w = static_cast<int>(rng.below(4));
                total = 0;
                for (int w : weights) total += w;
            }
            Distribution<Value> dist;
            for (int val = 0; val < range; ++val) {
                dist.add(val, Rational(weights[static_cast<std::size_t>(val)], total));
            }
            v.cpt.push_back(std::move(dist));
        }
        vars.push_back(std::move(v));
    }
    return Sem(std::move(vars));
}

// Full assignments of a SEM in lexicographic order.
inline std::vector<ValueVec> all_assignments(const Sem& sem) {
    std::vector<ValueVec> out;
    ValueVec current(static_cast<std::size_t>(sem.size()), 0);
    auto rec = [&](auto&& self, int idx) -> void {
        if (idx == sem.size()) {
            out.push_back(current);
            return;
        }
        for (Value v = 0; v < sem.range_size(idx); ++v) {
            current[static_cast<std::size_t>(idx)] = v;
            self(self, idx + 1);
        }
    };
    rec(rec, 0);
    return out;
}

// Exhaustive family of 3-variable binary SEMs: every DAG over (A,B,C) in that
// order, every CPT row probability from the grid {0, 1/2, 1}. All variables
// endogenous so every one of them can be intervened on.
inline void sweep_small_sems(const std::function<void(const Sem&)>& visit) {
    const std::vector<Rational> grid = {Rational(0), Rational(1, 2), Rational(1)};
    // Edge masks: bit 0 = A->B, bit 1 = A->C, bit 2 = B->C.
    for (int mask = 0; mask < 8; ++mask) {
        std::vector<std::vector<int>> parents(3);
        if (mask & 1) parents[1].push_back(0);
        if (mask & 2) parents[2].push_back(0);
        if (mask & 4) parents[2].push_back(1);

        std::size_t rows_total = 0;
        std::vector<std::size_t> rows(3);
        for (int v = 0; v < 3; ++v) {
            rows[static_cast<std::size_t>(v)] = std::size_t{1}
                                                << parents[static_cast<std::size_t>(v)].size();
            rows_total += rows[static_cast<std::size_t>(v)];
        }

        std::vector<std::size_t> choice(rows_total, 0);
        while (true) {
            std::vector<SemVariable> vars;
            std::size_t at = 0;
            const std::string names[3] = {"A", "B", "C"};
            for (int v = 0; v < 3; ++v) {
                SemVariable var;
                var.name = names[v];
                var.range = {"0", "1"};
                var.parents = parents[static_cast<std::size_t>(v)];
                for (std::size_t r = 0; r < rows[static_cast<std::size_t>(v)]; ++r) {
                    const Rational p1 = grid[choice[at++]];
                    Distribution<Value> d;
                    d.add(1, p1);
                    d.add(0, Rational(1) - p1);
                    var.cpt.push_back(std::move(d));
                }
                vars.push_back(std::move(var));
            }
            visit(Sem(std::move(vars)));

            // Odometer over the grid choices.
            std::size_t i = 0;
            while (i < rows_total) {
                if (++choice[i] < grid.size()) break;
                choice[i] = 0;
                ++i;
            }
            if (i == rows_total) break;
        }
    }
}

}  // namespace testutil
