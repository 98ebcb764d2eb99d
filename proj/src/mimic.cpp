#include "iflow/mimic.hpp"

namespace iflow {

void ObservedTrace::validate(const ChannelAlphabets& alphabets) const {
    alphabets.validate();
    if (outputs.size() != inputs.size() + 1) {
        throw ContractError("trace must have exactly one more output than inputs");
    }
    for (const auto& i : inputs) {
        if (i.hi < 0 || i.hi >= alphabets.hi_in.size() || i.lo < 0 ||
            i.lo >= alphabets.lo_in.size()) {
            throw ContractError("trace input symbol outside the declared alphabets");
        }
    }
    for (const auto& o : outputs) {
        if (o.hi < 0 || o.hi >= alphabets.hi_out.size() || o.lo < 0 ||
            o.lo >= alphabets.lo_out.size()) {
            throw ContractError("trace output symbol outside the declared alphabets");
        }
    }
}

namespace {

// All-input transition row: every input pair maps to the same successor.
std::vector<Distribution<int>> uniform_row(const ChannelAlphabets& a, int successor) {
    return std::vector<Distribution<int>>(static_cast<std::size_t>(a.input_count()),
                                          Distribution<int>::point(successor));
}

}  // namespace

MooreMachine build_mimic_noninterfering(const ObservedTrace& trace,
                                        const ChannelAlphabets& alphabets) {
    trace.validate(alphabets);
    const int k = static_cast<int>(trace.inputs.size());

    std::vector<std::string> names;
    std::vector<std::vector<Distribution<int>>> transition;
    std::vector<OutSym> output;
    for (int j = 0; j <= k; ++j) {
        names.push_back("t" + std::to_string(j));
        transition.push_back(uniform_row(alphabets, j < k ? j + 1 : j));
        output.push_back(trace.outputs[static_cast<std::size_t>(j)]);
    }
    return MooreMachine(std::move(names), 0, alphabets, std::move(transition), std::move(output));
}

MooreMachine build_mimic_interfering(const ObservedTrace& trace,
                                     const ChannelAlphabets& alphabets) {
    trace.validate(alphabets);
    if (alphabets.hi_in.size() < 2 || alphabets.lo_out.size() < 2) {
        throw ContractError(
            "interfering mimic needs at least two high input symbols and two low "
            "output symbols");
    }

    // A single-output trace has no observed first input; extend it with the
    // smallest input pair and the chain's absorbing output.
    ObservedTrace padded = trace;
    if (padded.inputs.empty()) {
        padded.inputs.push_back(InSym{0, 0});
        padded.outputs.push_back(padded.outputs.back());
    }
    const int k = static_cast<int>(padded.inputs.size());

    // States: 0 = fresh initial (plays the chain head's role), 1..k = replay
    // chain t1..tk with tk absorbing, k+1 = deviant absorber.
    const int chain_base = 1;
    const int deviant = chain_base + k;

    std::vector<std::string> names;
    names.push_back("init");
    for (int j = 1; j <= k; ++j) names.push_back("t" + std::to_string(j));
    names.push_back("dev");

    const OutSym o2 = padded.outputs[1];
    Sym deviant_lo = (o2.lo == 0) ? 1 : 0;  // smallest low symbol differing from o2

    std::vector<std::vector<Distribution<int>>> transition;
    std::vector<OutSym> output;

    // init: observed first input continues the replay, anything else deviates.
    {
        std::vector<Distribution<int>> row(static_cast<std::size_t>(alphabets.input_count()),
                                           Distribution<int>::point(deviant));
        row[static_cast<std::size_t>(alphabets.input_index(padded.inputs[0]))] =
            Distribution<int>::point(chain_base);
        transition.push_back(std::move(row));
        output.push_back(padded.outputs[0]);
    }
    // Replay chain t1..tk; tj emits output j, consuming the remaining inputs
    // in order regardless of their value, and tk absorbs.
    for (int j = 1; j <= k; ++j) {
        const int state = chain_base + j - 1;
        transition.push_back(uniform_row(alphabets, j < k ? state + 1 : state));
        output.push_back(padded.outputs[static_cast<std::size_t>(j)]);
    }
    // Deviant absorber.
    transition.push_back(uniform_row(alphabets, deviant));
    output.push_back(OutSym{o2.hi, deviant_lo});

    return MooreMachine(std::move(names), 0, alphabets, std::move(transition), std::move(output));
}

}  // namespace iflow
