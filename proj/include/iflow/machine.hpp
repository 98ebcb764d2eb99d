#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iflow/distribution.hpp"
#include "iflow/errors.hpp"

namespace iflow {

// Symbols are indices into an Alphabet; the declared order of symbols defines
// the lexicographic order used by every enumeration in this module.
using Sym = int;

// Finite ordered symbol set. By convention symbols[0] is the designated
// "no new message" token; it is an ordinary member with no special semantics
// in any of the algorithms.
struct Alphabet {
    std::vector<std::string> symbols;

    int size() const { return static_cast<int>(symbols.size()); }
    const std::string& name(Sym s) const { return symbols.at(static_cast<std::size_t>(s)); }
    std::optional<Sym> index_of(const std::string& name) const;
    void validate(const std::string& channel) const;  // non-empty, unique tokens
};

struct InSym {
    Sym hi = 0;
    Sym lo = 0;
    auto operator<=>(const InSym&) const = default;
};

struct OutSym {
    Sym hi = 0;
    Sym lo = 0;
    auto operator<=>(const OutSym&) const = default;
};

using InputSeq = std::vector<InSym>;
using OutputSeq = std::vector<OutSym>;
using LowSeq = std::vector<Sym>;
using StateSeq = std::vector<int>;

LowSeq low_inputs(const InputSeq& inputs);
LowSeq low_outputs(const OutputSeq& outputs);
LowSeq high_outputs(const OutputSeq& outputs);

// One complete trace: outputs o_1..o_{k+1} paired with the states s_1..s_{k+1}
// that emitted them.
struct Trace {
    OutputSeq outputs;
    StateSeq states;
    auto operator<=>(const Trace&) const = default;
};

using TraceDistribution = Distribution<Trace>;

struct ChannelAlphabets {
    Alphabet hi_in, lo_in, hi_out, lo_out;

    int input_count() const { return hi_in.size() * lo_in.size(); }
    int input_index(InSym i) const { return i.hi * lo_in.size() + i.lo; }
    void validate() const;
};

// Probabilistic Moore machine over H/L partitioned input and output channels.
// The transition table is total: every (state, input pair) row holds a
// normalized distribution over successor states.
class MooreMachine {
  public:
    MooreMachine(std::vector<std::string> state_names, int initial, ChannelAlphabets alphabets,
                 std::vector<std::vector<Distribution<int>>> transition, std::vector<OutSym> output);

    int state_count() const { return static_cast<int>(state_names_.size()); }
    int initial() const { return initial_; }
    const std::string& state_name(int s) const { return state_names_.at(static_cast<std::size_t>(s)); }
    std::optional<int> state_index(const std::string& name) const;
    const ChannelAlphabets& alphabets() const { return alphabets_; }

    int input_index(InSym i) const { return alphabets_.input_index(i); }
    const Distribution<int>& transition(int state, InSym input) const;
    OutSym output(int state) const { return output_.at(static_cast<std::size_t>(state)); }

    // True when every transition distribution is degenerate.
    bool deterministic() const;

    void check_state(int state) const;
    void check_input(InSym input) const;
    void check_output(OutSym output) const;

  private:
    std::vector<std::string> state_names_;
    int initial_;
    ChannelAlphabets alphabets_;
    std::vector<std::vector<Distribution<int>>> transition_;
    std::vector<OutSym> output_;
};

// Distribution over full traces induced by feeding `inputs` from `start`,
// computed by the defining recursion. For a k-step input the support holds
// (k+1)-long output and state sequences.
TraceDistribution run(const MooreMachine& machine, int start, const InputSeq& inputs);

// Closed-form probability of one specific trace: the delta/transition product
// equivalent to looking the trace up in run().
Rational trace_prob_closed(const MooreMachine& machine, int start, const InputSeq& inputs,
                           const OutputSeq& outputs, const StateSeq& states);

// Marginalizes the state sequences out of run(machine, s0, inputs).
Distribution<OutputSeq> output_dist(const MooreMachine& machine, const InputSeq& inputs);

// Pushforward through the L projection; total mass is preserved.
Distribution<LowSeq> project_low(const Distribution<OutputSeq>& dist);

// Convenience: project_low(output_dist(...)).
Distribution<LowSeq> low_output_dist(const MooreMachine& machine, const InputSeq& inputs);

// Unique output sequence of a deterministic machine.
OutputSeq run_deterministic(const MooreMachine& machine, const InputSeq& inputs);

struct Witness {
    InputSeq first;
    InputSeq second;
};

struct NoninterferenceCheck {
    std::optional<Witness> witness;
    int horizon = 0;
    std::uint64_t pairs_enumerated = 0;

    bool interferes() const { return witness.has_value(); }
};

struct CheckOptions {
    // Compare low output distributions (Def. 2). When false the machine must
    // be deterministic and unique output sequences are compared instead.
    bool probabilistic = true;
    // Upper bound on the number of input-sequence pairs examined.
    std::uint64_t budget = 10'000'000;
    // 0 = exact rational comparison; > 0 enables the float comparison mode.
    double tolerance = 0.0;
};

// Enumerates every pair of input sequences with equal low projections, for
// lengths 0..horizon, in lexicographic order (length, first sequence, second
// sequence; symbols ordered by their declared alphabet position). Returns the
// first pair whose low output distributions differ, or no witness.
NoninterferenceCheck check_noninterference(const MooreMachine& machine, int horizon,
                                           const CheckOptions& options = {});

// All input sequences of the given length in lexicographic order.
std::vector<InputSeq> enumerate_inputs(const ChannelAlphabets& alphabets, int length);

}  // namespace iflow
