#pragma once

#include "iflow/machine.hpp"

namespace iflow {

// An I/O log recorded from one interaction with an unknown system: k inputs
// and the k+1 outputs they elicited.
struct ObservedTrace {
    InputSeq inputs;
    OutputSeq outputs;

    void validate(const ChannelAlphabets& alphabets) const;
};

// Chain machine that replays the observed outputs regardless of input, with
// the final state absorbing. It is noninterfering by construction and
// reproduces the trace with probability 1.
MooreMachine build_mimic_noninterfering(const ObservedTrace& trace,
                                        const ChannelAlphabets& alphabets);

// Replays the observed trace exactly, but any first input other than the
// observed one diverts to an absorbing state whose low output deviates from
// the trace's second low output. Requires at least two high input symbols and
// two low output symbols; the deviant symbols are the smallest valid ones in
// declared alphabet order. Traces with a single output are padded by
// extending the chain's absorbing behavior one step.
MooreMachine build_mimic_interfering(const ObservedTrace& trace,
                                     const ChannelAlphabets& alphabets);

}  // namespace iflow
