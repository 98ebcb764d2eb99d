#include "iflow/machine.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace iflow {

std::optional<Sym> Alphabet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        if (symbols[i] == name) return static_cast<Sym>(i);
    }
    return std::nullopt;
}

void Alphabet::validate(const std::string& channel) const {
    if (symbols.empty()) throw ContractError("alphabet for " + channel + " is empty");
    std::set<std::string> seen;
    for (const auto& s : symbols) {
        if (!seen.insert(s).second) {
            throw ContractError("duplicate symbol '" + s + "' in " + channel + " alphabet");
        }
    }
}

void ChannelAlphabets::validate() const {
    hi_in.validate("hi_in");
    lo_in.validate("lo_in");
    hi_out.validate("hi_out");
    lo_out.validate("lo_out");
}

LowSeq low_inputs(const InputSeq& inputs) {
    LowSeq out;
    out.reserve(inputs.size());
    for (const auto& i : inputs) out.push_back(i.lo);
    return out;
}

LowSeq low_outputs(const OutputSeq& outputs) {
    LowSeq out;
    out.reserve(outputs.size());
    for (const auto& o : outputs) out.push_back(o.lo);
    return out;
}

LowSeq high_outputs(const OutputSeq& outputs) {
    LowSeq out;
    out.reserve(outputs.size());
    for (const auto& o : outputs) out.push_back(o.hi);
    return out;
}

MooreMachine::MooreMachine(std::vector<std::string> state_names, int initial,
                           ChannelAlphabets alphabets,
                           std::vector<std::vector<Distribution<int>>> transition,
                           std::vector<OutSym> output)
    : state_names_(std::move(state_names)),
      initial_(initial),
      alphabets_(std::move(alphabets)),
      transition_(std::move(transition)),
      output_(std::move(output)) {
    alphabets_.validate();
    if (state_names_.empty()) throw ContractError("machine has no states");
    std::set<std::string> seen;
    for (const auto& s : state_names_) {
        if (!seen.insert(s).second) throw ContractError("duplicate state name '" + s + "'");
    }
    if (initial_ < 0 || initial_ >= state_count()) throw ContractError("initial state out of range");
    if (transition_.size() != state_names_.size()) {
        throw ContractError("transition table must have one row block per state");
    }
    const std::size_t inputs = static_cast<std::size_t>(alphabets_.input_count());
    for (int s = 0; s < state_count(); ++s) {
        if (transition_[static_cast<std::size_t>(s)].size() != inputs) {
            throw ContractError("transition table incomplete for state '" + state_name(s) + "'");
        }
        for (const auto& dist : transition_[static_cast<std::size_t>(s)]) {
            if (!dist.is_normalized()) {
                throw ContractError("transition distribution from state '" + state_name(s) +
                                    "' does not sum to 1");
            }
            for (const auto& [succ, p] : dist.support()) {
                if (succ < 0 || succ >= state_count()) {
                    throw ContractError("transition from state '" + state_name(s) +
                                        "' targets an unknown state");
                }
                if (p < 0) throw ContractError("negative transition probability");
            }
        }
    }
    if (output_.size() != state_names_.size()) {
        throw ContractError("output table must cover every state");
    }
    for (const auto& o : output_) check_output(o);
}

std::optional<int> MooreMachine::state_index(const std::string& name) const {
    for (std::size_t i = 0; i < state_names_.size(); ++i) {
        if (state_names_[i] == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

const Distribution<int>& MooreMachine::transition(int state, InSym input) const {
    check_state(state);
    check_input(input);
    return transition_[static_cast<std::size_t>(state)][static_cast<std::size_t>(input_index(input))];
}

bool MooreMachine::deterministic() const {
    for (const auto& row : transition_) {
        for (const auto& dist : row) {
            if (dist.size() != 1) return false;
        }
    }
    return true;
}

void MooreMachine::check_state(int state) const {
    if (state < 0 || state >= state_count()) {
        throw ContractError("unknown state index " + std::to_string(state));
    }
}

void MooreMachine::check_input(InSym input) const {
    if (input.hi < 0 || input.hi >= alphabets_.hi_in.size() || input.lo < 0 ||
        input.lo >= alphabets_.lo_in.size()) {
        throw ContractError("input symbol outside the machine alphabets");
    }
}

void MooreMachine::check_output(OutSym output) const {
    if (output.hi < 0 || output.hi >= alphabets_.hi_out.size() || output.lo < 0 ||
        output.lo >= alphabets_.lo_out.size()) {
        throw ContractError("output symbol outside the machine alphabets");
    }
}

namespace {

// Memoized suffix recursion:
//   Q(s, [])    = point(([sigma(s)], [s]))
//   Q(s, i.is)  = sum_s' tau(s,i)(s') * prepend(sigma(s), s, Q(s', is))
TraceDistribution run_suffix(const MooreMachine& m, int state, const InputSeq& inputs,
                             std::size_t pos, std::vector<std::map<int, TraceDistribution>>& memo) {
    auto& slot = memo[pos];
    if (auto it = slot.find(state); it != slot.end()) return it->second;

    TraceDistribution result;
    if (pos == inputs.size()) {
        result = TraceDistribution::point(Trace{{m.output(state)}, {state}});
    } else {
        const auto& step = m.transition(state, inputs[pos]);
        for (const auto& [succ, p] : step.support()) {
            const TraceDistribution& tail = run_suffix(m, succ, inputs, pos + 1, memo);
            for (const auto& [trace, q] : tail.support()) {
                Trace extended;
                extended.outputs.reserve(trace.outputs.size() + 1);
                extended.outputs.push_back(m.output(state));
                extended.outputs.insert(extended.outputs.end(), trace.outputs.begin(),
                                        trace.outputs.end());
                extended.states.reserve(trace.states.size() + 1);
                extended.states.push_back(state);
                extended.states.insert(extended.states.end(), trace.states.begin(),
                                       trace.states.end());
                result.add(extended, p * q);
            }
        }
    }
    return slot.emplace(state, std::move(result)).first->second;
}

}  // namespace

TraceDistribution run(const MooreMachine& machine, int start, const InputSeq& inputs) {
    machine.check_state(start);
    for (const auto& i : inputs) machine.check_input(i);
    std::vector<std::map<int, TraceDistribution>> memo(inputs.size() + 1);
    return run_suffix(machine, start, inputs, 0, memo);
}

Rational trace_prob_closed(const MooreMachine& machine, int start, const InputSeq& inputs,
                           const OutputSeq& outputs, const StateSeq& states) {
    machine.check_state(start);
    for (const auto& i : inputs) machine.check_input(i);
    for (const auto& o : outputs) machine.check_output(o);
    for (int s : states) machine.check_state(s);
    const std::size_t k = inputs.size();
    if (outputs.size() != k + 1 || states.size() != k + 1) {
        throw ContractError("trace length mismatch: need |outputs| = |states| = |inputs| + 1");
    }

    if (states[0] != start) return Rational(0);
    if (machine.output(states[0]) != outputs[0]) return Rational(0);
    Rational prob(1);
    for (std::size_t step = 1; step <= k; ++step) {
        prob *= machine.transition(states[step - 1], inputs[step - 1]).mass(states[step]);
        if (prob == 0) return prob;
        if (machine.output(states[step]) != outputs[step]) return Rational(0);
    }
    return prob;
}

Distribution<OutputSeq> output_dist(const MooreMachine& machine, const InputSeq& inputs) {
    return run(machine, machine.initial(), inputs)
        .pushforward([](const Trace& t) { return t.outputs; });
}

Distribution<LowSeq> project_low(const Distribution<OutputSeq>& dist) {
    return dist.pushforward([](const OutputSeq& o) { return low_outputs(o); });
}

Distribution<LowSeq> low_output_dist(const MooreMachine& machine, const InputSeq& inputs) {
    return project_low(output_dist(machine, inputs));
}

OutputSeq run_deterministic(const MooreMachine& machine, const InputSeq& inputs) {
    if (!machine.deterministic()) {
        throw ContractError("run_deterministic requires degenerate transition distributions");
    }
    OutputSeq outputs;
    outputs.reserve(inputs.size() + 1);
    int state = machine.initial();
    outputs.push_back(machine.output(state));
    for (const auto& i : inputs) {
        state = machine.transition(state, i).support().begin()->first;
        outputs.push_back(machine.output(state));
    }
    return outputs;
}

std::vector<InputSeq> enumerate_inputs(const ChannelAlphabets& alphabets, int length) {
    std::vector<InSym> symbols;
    symbols.reserve(static_cast<std::size_t>(alphabets.input_count()));
    for (Sym h = 0; h < alphabets.hi_in.size(); ++h) {
        for (Sym l = 0; l < alphabets.lo_in.size(); ++l) symbols.push_back({h, l});
    }

    std::vector<InputSeq> out;
    InputSeq current(static_cast<std::size_t>(length));
    auto rec = [&](auto&& self, int pos) -> void {
        if (pos == length) {
            out.push_back(current);
            return;
        }
        for (const auto& s : symbols) {
            current[static_cast<std::size_t>(pos)] = s;
            self(self, pos + 1);
        }
    };
    rec(rec, 0);
    return out;
}

namespace {

// Pairs to be examined at horizon h: sum_k |hi|^2k * |lo|^k, saturating.
std::uint64_t pair_count(const ChannelAlphabets& a, int horizon) {
    const std::uint64_t hi = static_cast<std::uint64_t>(a.hi_in.size());
    const std::uint64_t lo = static_cast<std::uint64_t>(a.lo_in.size());
    std::uint64_t total = 0;
    std::uint64_t level = 1;  // |hi|^2k * |lo|^k
    for (int k = 0; k <= horizon; ++k) {
        total += level;
        if (total > (std::uint64_t{1} << 62)) return UINT64_MAX;
        if (level > (std::uint64_t{1} << 40)) return UINT64_MAX;
        level *= hi * hi * lo;
    }
    return total;
}

}  // namespace

NoninterferenceCheck check_noninterference(const MooreMachine& machine, int horizon,
                                           const CheckOptions& options) {
    if (horizon < 0) throw ContractError("horizon must be nonnegative");
    if (!options.probabilistic && !machine.deterministic()) {
        throw ContractError(
            "non-probabilistic check requires a deterministic machine; "
            "use the probabilistic mode instead");
    }
    const std::uint64_t pairs = pair_count(machine.alphabets(), horizon);
    if (pairs > options.budget) {
        throw BudgetError("noninterference enumeration needs " + std::to_string(pairs) +
                              " pairs, over the budget of " + std::to_string(options.budget),
                          pairs);
    }

    NoninterferenceCheck result;
    result.horizon = horizon;

    // Caches keyed by input sequence; cleared between lengths.
    std::map<InputSeq, Distribution<LowSeq>> dist_cache;
    std::map<InputSeq, LowSeq> det_cache;

    auto low_dist = [&](const InputSeq& i) -> const Distribution<LowSeq>& {
        auto it = dist_cache.find(i);
        if (it == dist_cache.end()) it = dist_cache.emplace(i, low_output_dist(machine, i)).first;
        return it->second;
    };
    auto det_low = [&](const InputSeq& i) -> const LowSeq& {
        auto it = det_cache.find(i);
        if (it == det_cache.end()) it = det_cache.emplace(i, low_outputs(run_deterministic(machine, i))).first;
        return it->second;
    };

    for (int k = 0; k <= horizon; ++k) {
        dist_cache.clear();
        det_cache.clear();
        const auto sequences = enumerate_inputs(machine.alphabets(), k);
        // Second sequences grouped by low projection, preserving lexicographic
        // order within each group.
        std::map<LowSeq, std::vector<const InputSeq*>> by_low;
        for (const auto& seq : sequences) by_low[low_inputs(seq)].push_back(&seq);

        for (const auto& first : sequences) {
            for (const InputSeq* second : by_low[low_inputs(first)]) {
                ++result.pairs_enumerated;
                bool equal;
                if (!options.probabilistic) {
                    equal = det_low(first) == det_low(*second);
                } else if (options.tolerance > 0) {
                    equal = low_dist(first).approx_equals(low_dist(*second), options.tolerance);
                } else {
                    equal = low_dist(first) == low_dist(*second);
                }
                if (!equal) {
                    result.witness = Witness{first, *second};
                    return result;
                }
            }
        }
    }
    return result;
}

}  // namespace iflow
