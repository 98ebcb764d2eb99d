#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iflow/distribution.hpp"
#include "iflow/machine.hpp"

namespace iflow {

// Values are indices into a variable's declared range.
using Value = int;
using ValueVec = std::vector<Value>;

// Partial assignment, keyed by variable index.
using VarAssignment = std::map<int, Value>;

// One variable of a recursive structural equation model. Randomized
// structural functions are stored as conditional probability tables: one
// normalized row per valuation of the parents. Exogenous variables have no
// parents and their single row is the marginal.
struct SemVariable {
    std::string name;
    std::vector<std::string> range;
    bool exogenous = false;
    std::vector<int> parents;               // indices of earlier variables
    std::vector<Distribution<Value>> cpt;   // one row per parent valuation
};

class Sem {
  public:
    explicit Sem(std::vector<SemVariable> variables);

    int size() const { return static_cast<int>(vars_.size()); }
    const SemVariable& var(int i) const { return vars_.at(static_cast<std::size_t>(i)); }
    std::optional<int> var_index(const std::string& name) const;
    int range_size(int i) const { return static_cast<int>(var(i).range.size()); }

    // Mixed-radix CPT row index for a variable given a full assignment of its
    // parents (taken out of `values`, which must cover all parents).
    int cpt_row(int i, const ValueVec& values) const;
    const Distribution<Value>& row(int i, const ValueVec& values) const;

  private:
    std::vector<SemVariable> vars_;
    std::map<std::string, int> index_;
};

// Product of the per-variable conditional factors over the topological order.
Rational joint_prob(const Sem& sem, const ValueVec& full_assignment);

// Sum of joint_prob over all completions of a partial assignment.
Rational marginal_prob(const Sem& sem, const VarAssignment& partial);

// Sub-model: replaces each intervened variable's equation with the constant.
// Only endogenous variables may be intervened on.
Sem intervene(const Sem& sem, const VarAssignment& assignment);

// Joint distribution of the query variables (values keyed in query order).
Distribution<ValueVec> joint_dist(const Sem& sem, const std::vector<int>& query);

// Conditional probability with the "undefined times zero is zero" convention:
// when the conditioning event has probability zero the result is undefined.
struct CondProb {
    bool defined = false;
    Rational value;
};
CondProb conditional_prob(const Sem& sem, const VarAssignment& event, const VarAssignment& given);

struct EffectWitness {
    ValueVec x1, x2;  // two factor assignments yielding different response dists
};

struct EffectCheck {
    std::optional<EffectWitness> witness;
    std::uint64_t comparisons = 0;

    bool has_effect() const { return witness.has_value(); }
};

// Enumerates all ordered pairs of assignments to the factor variables in
// lexicographic order; for each pair compares the exact distribution of the
// response variables in the two doubly-intervened sub-models (the fixed
// do-assignment is applied to both). Returns the first differing pair.
EffectCheck has_effect(const Sem& sem, const std::vector<int>& factors,
                       const std::vector<int>& response, const VarAssignment& fixed,
                       std::uint64_t budget = 10'000'000);

// Variable families of a machine compiled at a given horizon. Index j of
// state_vars/hi_out/lo_out is time j (0..t); index j of the input and user
// families is time j+1 (1..t).
struct MachineSemBinding {
    int horizon = 0;
    std::vector<int> state_vars;
    std::vector<int> hi_in, lo_in;
    std::vector<int> hi_user, lo_user;
    std::vector<int> hi_out, lo_out;
};

struct CompileOptions {
    // Marginals for the exogenous user variables; default uniform over the
    // corresponding input alphabet. The pass-through environment makes these
    // immaterial once the inputs are fixed by intervention.
    std::optional<std::vector<Rational>> hi_user_marginal;
    std::optional<std::vector<Rational>> lo_user_marginal;
};

// Unrolls the machine to horizon t >= 1: states S_0..S_t, outputs at every
// step, inputs driven by exogenous user variables through pass-through
// equations. Transition rows become the CPTs of the state variables.
std::pair<Sem, MachineSemBinding> compile_machine(const MooreMachine& machine, int horizon,
                                                  const CompileOptions& options = {});

// The distribution P(LO_0..LO_t | do(inputs)) of a compiled machine.
Distribution<LowSeq> compiled_low_output_dist(const Sem& sem, const MachineSemBinding& binding,
                                              const InputSeq& inputs);

struct Theorem3Report {
    NoninterferenceCheck machine_check;
    bool effect_found = false;
    int effect_horizon = 0;            // t at which the effect was found
    LowSeq effect_low_inputs;          // the fixed low-input sequence
    std::optional<EffectWitness> effect_witness;
    bool agree = false;
};

// Runs the white-box noninterference check and, independently, searches for a
// causal effect of the high-input variables on the low-output variables of
// the compiled model with the low inputs fixed, over every low-input sequence
// of length <= horizon. The two verdicts are reported side by side.
Theorem3Report check_theorem3(const MooreMachine& machine, int horizon,
                              std::uint64_t budget = 10'000'000);

// Streams every deterministic machine with the given number of states over
// binary channel alphabets (all transition tables x all output tables) to the
// callback.
void sweep_deterministic_machines(int states, const std::function<void(const MooreMachine&)>& visit);

}  // namespace iflow
