#include "iflow/sem.hpp"

#include <algorithm>

namespace iflow {

Sem::Sem(std::vector<SemVariable> variables) : vars_(std::move(variables)) {
    for (int i = 0; i < size(); ++i) {
        const auto& v = vars_[static_cast<std::size_t>(i)];
        if (v.range.empty()) throw ContractError("variable '" + v.name + "' has an empty range");
        if (!index_.emplace(v.name, i).second) {
            throw ContractError("duplicate variable name '" + v.name + "'");
        }
        if (v.exogenous && !v.parents.empty()) {
            throw ContractError("exogenous variable '" + v.name + "' cannot have parents");
        }
        std::size_t rows = 1;
        for (int p : v.parents) {
            if (p < 0 || p >= i) {
                throw ContractError("variable '" + v.name +
                                    "' has a parent outside the preceding order");
            }
            rows *= vars_[static_cast<std::size_t>(p)].range.size();
        }
        if (v.cpt.size() != rows) {
            throw ContractError("variable '" + v.name + "' needs " + std::to_string(rows) +
                                " table rows, got " + std::to_string(v.cpt.size()));
        }
        for (const auto& row : v.cpt) {
            if (!row.is_normalized()) {
                throw ContractError("a table row of variable '" + v.name + "' does not sum to 1");
            }
            for (const auto& [val, p] : row.support()) {
                if (val < 0 || val >= static_cast<int>(v.range.size())) {
                    throw ContractError("table row of '" + v.name + "' assigns mass outside range");
                }
                if (p < 0) throw ContractError("negative probability in table of '" + v.name + "'");
            }
        }
    }
}

std::optional<int> Sem::var_index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int Sem::cpt_row(int i, const ValueVec& values) const {
    const auto& v = var(i);
    int row = 0;
    for (int p : v.parents) {
        row = row * range_size(p) + values[static_cast<std::size_t>(p)];
    }
    return row;
}

const Distribution<Value>& Sem::row(int i, const ValueVec& values) const {
    return var(i).cpt[static_cast<std::size_t>(cpt_row(i, values))];
}

Rational joint_prob(const Sem& sem, const ValueVec& full_assignment) {
    if (static_cast<int>(full_assignment.size()) != sem.size()) {
        throw ContractError("joint_prob needs a value for every variable");
    }
    for (int i = 0; i < sem.size(); ++i) {
        Value v = full_assignment[static_cast<std::size_t>(i)];
        if (v < 0 || v >= sem.range_size(i)) {
            throw ContractError("value for '" + sem.var(i).name + "' outside its range");
        }
    }
    Rational prob(1);
    for (int i = 0; i < sem.size(); ++i) {
        prob *= sem.row(i, full_assignment).mass(full_assignment[static_cast<std::size_t>(i)]);
        if (prob == 0) return prob;
    }
    return prob;
}

namespace {

void check_assignment(const Sem& sem, const VarAssignment& a, const char* what) {
    for (const auto& [i, v] : a) {
        if (i < 0 || i >= sem.size()) throw ContractError(std::string(what) + ": unknown variable");
        if (v < 0 || v >= sem.range_size(i)) {
            throw ContractError(std::string(what) + ": value for '" + sem.var(i).name +
                                "' outside its range");
        }
    }
}

// Variables whose summation can be skipped: not queried, not pinned, and not
// an ancestor of any queried/pinned variable. Their rows sum to 1, so they
// contribute a factor of exactly 1 to every marginal term.
std::vector<bool> relevant_set(const Sem& sem, const std::vector<int>& query,
                               const VarAssignment& pinned) {
    std::vector<bool> relevant(static_cast<std::size_t>(sem.size()), false);
    for (int q : query) relevant[static_cast<std::size_t>(q)] = true;
    for (const auto& [i, v] : pinned) relevant[static_cast<std::size_t>(i)] = true;
    for (int i = sem.size() - 1; i >= 0; --i) {
        if (!relevant[static_cast<std::size_t>(i)]) continue;
        for (int p : sem.var(i).parents) relevant[static_cast<std::size_t>(p)] = true;
    }
    return relevant;
}

// Depth-first sum over the topological order with zero pruning. Calls `sink`
// with the accumulated probability once per completion with nonzero mass.
template <class Sink>
void sum_terms(const Sem& sem, const std::vector<bool>& relevant, const VarAssignment& pinned,
               int idx, ValueVec& values, const Rational& acc, Sink&& sink) {
    if (idx == sem.size()) {
        sink(values, acc);
        return;
    }
    const std::size_t ui = static_cast<std::size_t>(idx);
    if (!relevant[ui]) {
        values[ui] = 0;  // placeholder, never read downstream
        sum_terms(sem, relevant, pinned, idx + 1, values, acc, sink);
        return;
    }
    const auto& row = sem.row(idx, values);
    auto pin = pinned.find(idx);
    if (pin != pinned.end()) {
        Rational p = row.mass(pin->second);
        if (p == 0) return;
        values[ui] = pin->second;
        sum_terms(sem, relevant, pinned, idx + 1, values, acc * p, sink);
        return;
    }
    for (const auto& [v, p] : row.support()) {
        values[ui] = v;
        sum_terms(sem, relevant, pinned, idx + 1, values, acc * p, sink);
    }
}

}  // namespace

Rational marginal_prob(const Sem& sem, const VarAssignment& partial) {
    check_assignment(sem, partial, "marginal_prob");
    const auto relevant = relevant_set(sem, {}, partial);
    ValueVec values(static_cast<std::size_t>(sem.size()), 0);
    Rational total(0);
    sum_terms(sem, relevant, partial, 0, values, Rational(1),
              [&](const ValueVec&, const Rational& p) { total += p; });
    return total;
}

Sem intervene(const Sem& sem, const VarAssignment& assignment) {
    check_assignment(sem, assignment, "intervene");
    std::vector<SemVariable> vars;
    vars.reserve(static_cast<std::size_t>(sem.size()));
    for (int i = 0; i < sem.size(); ++i) vars.push_back(sem.var(i));
    for (const auto& [i, v] : assignment) {
        auto& var = vars[static_cast<std::size_t>(i)];
        if (var.exogenous) {
            throw ContractError("cannot intervene on exogenous variable '" + var.name + "'");
        }
        var.parents.clear();
        var.cpt.assign(1, Distribution<Value>::point(v));
    }
    return Sem(std::move(vars));
}

Distribution<ValueVec> joint_dist(const Sem& sem, const std::vector<int>& query) {
    for (int q : query) {
        if (q < 0 || q >= sem.size()) throw ContractError("joint_dist: unknown variable");
    }
    const auto relevant = relevant_set(sem, query, {});
    ValueVec values(static_cast<std::size_t>(sem.size()), 0);
    Distribution<ValueVec> dist;
    ValueVec key(query.size(), 0);
    sum_terms(sem, relevant, {}, 0, values, Rational(1),
              [&](const ValueVec& complete, const Rational& p) {
                  for (std::size_t j = 0; j < query.size(); ++j) {
                      key[j] = complete[static_cast<std::size_t>(query[j])];
                  }
                  dist.add(key, p);
              });
    return dist;
}

CondProb conditional_prob(const Sem& sem, const VarAssignment& event, const VarAssignment& given) {
    Rational denom = marginal_prob(sem, given);
    if (denom == 0) return {false, Rational(0)};
    VarAssignment both = given;
    for (const auto& [i, v] : event) {
        auto [it, inserted] = both.emplace(i, v);
        if (!inserted && it->second != v) return {true, Rational(0)};
    }
    return {true, marginal_prob(sem, both) / denom};
}

namespace {

std::uint64_t assignment_space(const Sem& sem, const std::vector<int>& vars) {
    std::uint64_t total = 1;
    for (int v : vars) {
        total *= static_cast<std::uint64_t>(sem.range_size(v));
        if (total > (std::uint64_t{1} << 40)) return UINT64_MAX;
    }
    return total;
}

void enumerate_values(const Sem& sem, const std::vector<int>& vars,
                      std::vector<ValueVec>& out) {
    ValueVec current(vars.size(), 0);
    auto rec = [&](auto&& self, std::size_t pos) -> void {
        if (pos == vars.size()) {
            out.push_back(current);
            return;
        }
        for (Value v = 0; v < sem.range_size(vars[pos]); ++v) {
            current[pos] = v;
            self(self, pos + 1);
        }
    };
    rec(rec, 0);
}

}  // namespace

EffectCheck has_effect(const Sem& sem, const std::vector<int>& factors,
                       const std::vector<int>& response, const VarAssignment& fixed,
                       std::uint64_t budget) {
    if (factors.empty()) throw ContractError("has_effect needs at least one factor variable");
    for (int x : factors) {
        if (x < 0 || x >= sem.size() || sem.var(x).exogenous) {
            throw ContractError("factor variables must be endogenous");
        }
        if (fixed.count(x)) throw ContractError("factor also appears in the fixed do-assignment");
    }
    for (int y : response) {
        if (y < 0 || y >= sem.size() || sem.var(y).exogenous) {
            throw ContractError("response variables must be endogenous");
        }
    }

    const std::uint64_t points = assignment_space(sem, factors);
    const std::uint64_t comparisons =
        points > (std::uint64_t{1} << 20) ? UINT64_MAX : points * points;
    if (comparisons > budget) {
        throw BudgetError("effect enumeration needs " + std::to_string(comparisons) +
                              " comparisons, over the budget of " + std::to_string(budget),
                          comparisons);
    }

    std::vector<ValueVec> assignments;
    enumerate_values(sem, factors, assignments);

    // Distribution of the response under each single intervention, computed
    // once and compared pairwise in lexicographic order.
    std::vector<Distribution<ValueVec>> dists;
    dists.reserve(assignments.size());
    for (const auto& x : assignments) {
        VarAssignment intervention = fixed;
        for (std::size_t j = 0; j < factors.size(); ++j) {
            intervention[factors[static_cast<std::size_t>(j)]] = x[j];
        }
        dists.push_back(joint_dist(intervene(sem, intervention), response));
    }

    EffectCheck result;
    for (std::size_t a = 0; a < assignments.size(); ++a) {
        for (std::size_t b = 0; b < assignments.size(); ++b) {
            if (a == b) continue;
            ++result.comparisons;
            if (dists[a] != dists[b]) {
                result.witness = EffectWitness{assignments[a], assignments[b]};
                return result;
            }
        }
    }
    return result;
}

std::pair<Sem, MachineSemBinding> compile_machine(const MooreMachine& machine, int horizon,
                                                  const CompileOptions& options) {
    if (horizon < 1) throw ContractError("compile_machine needs horizon >= 1");
    const auto& alphabets = machine.alphabets();

    auto marginal_for = [](const Alphabet& alphabet,
                           const std::optional<std::vector<Rational>>& given) {
        Distribution<Value> d;
        if (given) {
            if (static_cast<int>(given->size()) != alphabet.size()) {
                throw ContractError("user marginal size does not match the input alphabet");
            }
            for (int s = 0; s < alphabet.size(); ++s) d.add(s, (*given)[static_cast<std::size_t>(s)]);
            if (!d.is_normalized()) throw ContractError("user marginal does not sum to 1");
        } else {
            for (int s = 0; s < alphabet.size(); ++s) {
                d.add(s, Rational(1, alphabet.size()));
            }
        }
        return d;
    };

    auto symbol_range = [](const Alphabet& a) { return a.symbols; };
    auto state_range = [&machine]() {
        std::vector<std::string> names;
        for (int s = 0; s < machine.state_count(); ++s) names.push_back(machine.state_name(s));
        return names;
    };
    auto identity_cpt = [](int n) {
        std::vector<Distribution<Value>> cpt;
        cpt.reserve(static_cast<std::size_t>(n));
        for (int v = 0; v < n; ++v) cpt.push_back(Distribution<Value>::point(v));
        return cpt;
    };

    std::vector<SemVariable> vars;
    MachineSemBinding binding;
    binding.horizon = horizon;
    auto next_index = [&vars]() { return static_cast<int>(vars.size()); };

    // S_0 is a parentless endogenous point mass on the initial state.
    binding.state_vars.push_back(next_index());
    vars.push_back({"S0", state_range(), false, {}, {Distribution<Value>::point(machine.initial())}});

    auto add_outputs = [&](int time, int state_var) {
        SemVariable ho{"HO" + std::to_string(time), symbol_range(alphabets.hi_out), false,
                       {state_var}, {}};
        SemVariable lo{"LO" + std::to_string(time), symbol_range(alphabets.lo_out), false,
                       {state_var}, {}};
        for (int s = 0; s < machine.state_count(); ++s) {
            ho.cpt.push_back(Distribution<Value>::point(machine.output(s).hi));
            lo.cpt.push_back(Distribution<Value>::point(machine.output(s).lo));
        }
        binding.hi_out.push_back(next_index());
        vars.push_back(std::move(ho));
        binding.lo_out.push_back(next_index());
        vars.push_back(std::move(lo));
    };

    add_outputs(0, binding.state_vars[0]);

    for (int t = 1; t <= horizon; ++t) {
        const std::string suffix = std::to_string(t);

        binding.hi_user.push_back(next_index());
        vars.push_back({"HU" + suffix, symbol_range(alphabets.hi_in), true, {},
                        {marginal_for(alphabets.hi_in, options.hi_user_marginal)}});
        binding.lo_user.push_back(next_index());
        vars.push_back({"LU" + suffix, symbol_range(alphabets.lo_in), true, {},
                        {marginal_for(alphabets.lo_in, options.lo_user_marginal)}});

        // Pass-through environment: the default high/low user behavior feeds
        // the inputs directly.
        binding.hi_in.push_back(next_index());
        vars.push_back({"HI" + suffix, symbol_range(alphabets.hi_in), false,
                        {binding.hi_user.back()}, identity_cpt(alphabets.hi_in.size())});
        binding.lo_in.push_back(next_index());
        vars.push_back({"LI" + suffix, symbol_range(alphabets.lo_in), false,
                        {binding.lo_user.back()}, identity_cpt(alphabets.lo_in.size())});

        // S_t := tau(S_{t-1}, (HI_t, LI_t)); row order matches cpt_row's
        // mixed radix over (state, hi, lo).
        SemVariable st{"S" + suffix, state_range(), false,
                       {binding.state_vars.back(), binding.hi_in.back(), binding.lo_in.back()}, {}};
        for (int s = 0; s < machine.state_count(); ++s) {
            for (Sym h = 0; h < alphabets.hi_in.size(); ++h) {
                for (Sym l = 0; l < alphabets.lo_in.size(); ++l) {
                    st.cpt.push_back(machine.transition(s, InSym{h, l}));
                }
            }
        }
        binding.state_vars.push_back(next_index());
        vars.push_back(std::move(st));

        add_outputs(t, binding.state_vars.back());
    }

    return {Sem(std::move(vars)), std::move(binding)};
}

Distribution<LowSeq> compiled_low_output_dist(const Sem& sem, const MachineSemBinding& binding,
                                              const InputSeq& inputs) {
    if (static_cast<int>(inputs.size()) != binding.horizon) {
        throw ContractError("input sequence length must equal the compiled horizon");
    }
    VarAssignment fixed;
    for (int t = 0; t < binding.horizon; ++t) {
        fixed[binding.hi_in[static_cast<std::size_t>(t)]] = inputs[static_cast<std::size_t>(t)].hi;
        fixed[binding.lo_in[static_cast<std::size_t>(t)]] = inputs[static_cast<std::size_t>(t)].lo;
    }
    return joint_dist(intervene(sem, fixed), binding.lo_out)
        .pushforward([](const ValueVec& v) { return LowSeq(v.begin(), v.end()); });
}

Theorem3Report check_theorem3(const MooreMachine& machine, int horizon, std::uint64_t budget) {
    Theorem3Report report;
    CheckOptions options;
    options.budget = budget;
    report.machine_check = check_noninterference(machine, horizon, options);

    const auto& alphabets = machine.alphabets();
    for (int t = 1; t <= horizon && !report.effect_found; ++t) {
        auto [sem, binding] = compile_machine(machine, t);

        // Enumerate low input sequences of length t in declared-order
        // lexicographic order.
        std::vector<LowSeq> low_seqs;
        LowSeq current(static_cast<std::size_t>(t), 0);
        auto rec = [&](auto&& self, int pos) -> void {
            if (pos == t) {
                low_seqs.push_back(current);
                return;
            }
            for (Sym l = 0; l < alphabets.lo_in.size(); ++l) {
                current[static_cast<std::size_t>(pos)] = l;
                self(self, pos + 1);
            }
        };
        rec(rec, 0);

        for (const auto& low : low_seqs) {
            VarAssignment fixed;
            for (int j = 0; j < t; ++j) {
                fixed[binding.lo_in[static_cast<std::size_t>(j)]] = low[static_cast<std::size_t>(j)];
            }
            EffectCheck check = has_effect(sem, binding.hi_in, binding.lo_out, fixed, budget);
            if (check.has_effect()) {
                report.effect_found = true;
                report.effect_horizon = t;
                report.effect_low_inputs = low;
                report.effect_witness = check.witness;
                break;
            }
        }
    }

    report.agree = report.machine_check.interferes() == report.effect_found;
    return report;
}

void sweep_deterministic_machines(int states,
                                  const std::function<void(const MooreMachine&)>& visit) {
    if (states < 1 || states > 4) throw ContractError("sweep supports 1 to 4 states");
    ChannelAlphabets alphabets;
    alphabets.hi_in.symbols = {"h0", "h1"};
    alphabets.lo_in.symbols = {"l0", "l1"};
    alphabets.hi_out.symbols = {"a0", "a1"};
    alphabets.lo_out.symbols = {"b0", "b1"};
    const int inputs = alphabets.input_count();

    std::vector<std::string> names;
    for (int s = 0; s < states; ++s) names.push_back("s" + std::to_string(s));

    std::uint64_t transition_codes = 1;
    for (int i = 0; i < states * inputs; ++i) {
        transition_codes *= static_cast<std::uint64_t>(states);
    }
    std::uint64_t output_codes = 1;
    for (int s = 0; s < states; ++s) output_codes *= 4;

    for (std::uint64_t tc = 0; tc < transition_codes; ++tc) {
        std::vector<std::vector<Distribution<int>>> transition(
            static_cast<std::size_t>(states),
            std::vector<Distribution<int>>(static_cast<std::size_t>(inputs)));
        std::uint64_t code = tc;
        for (int s = 0; s < states; ++s) {
            for (int i = 0; i < inputs; ++i) {
                transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(i)] =
                    Distribution<int>::point(
                        static_cast<int>(code % static_cast<std::uint64_t>(states)));
                code /= static_cast<std::uint64_t>(states);
            }
        }
        for (std::uint64_t oc = 0; oc < output_codes; ++oc) {
            std::vector<OutSym> output;
            std::uint64_t out_code = oc;
            for (int s = 0; s < states; ++s) {
                output.push_back(
                    OutSym{static_cast<Sym>(out_code % 2), static_cast<Sym>((out_code / 2) % 2)});
                out_code /= 4;
            }
            visit(MooreMachine(names, 0, alphabets, transition, output));
        }
    }
}

}  // namespace iflow
