#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "iflow/experiment.hpp"
#include "iflow/machine.hpp"
#include "iflow/mimic.hpp"
#include "iflow/sem.hpp"
#include "iflow/stats.hpp"
#include "iflow/tracker.hpp"

namespace iflow {

// Structured-text formats. All of them are line oriented: '#' starts a
// comment, blank lines are ignored, and unknown keys are rejected.

MooreMachine read_machine(std::istream& in);
MooreMachine read_machine_file(const std::string& path);
void write_machine(std::ostream& out, const MooreMachine& machine);
void write_machine_file(const std::string& path, const MooreMachine& machine);

struct TraceFile {
    ChannelAlphabets alphabets;
    ObservedTrace trace;
};

TraceFile read_trace(std::istream& in);
TraceFile read_trace_file(const std::string& path);
void write_trace(std::ostream& out, const TraceFile& trace);
void write_trace_file(const std::string& path, const TraceFile& trace);

// Witness rendering: the two input sequences of a counterexample pair in the
// trace-file key/value style ("input1:" / "input2:" lines).
void write_witness(std::ostream& out, const MooreMachine& machine, const Witness& witness);

Sem read_sem(std::istream& in);
Sem read_sem_file(const std::string& path);

// Delimited response data, one row per collected ad:
//   run <tab> unit <tab> reload <tab> url <tab> text <tab> context <tab>
//   treatment <tab> assignment_index
// Context "-" means none. Units with no ads appear as a row with url "-".
std::map<int, ResponseVector> read_responses(std::istream& in);
std::map<int, ResponseVector> read_responses_file(const std::string& path);
void write_responses(std::ostream& out, int run, const RunResult& result, bool header);
void write_responses_file(const std::string& path, const std::vector<RunResult>& runs);

ExperimentConfig read_experiment_config(std::istream& in);
ExperimentConfig read_experiment_config_file(const std::string& path);

TrackerSpec read_tracker_spec(std::istream& in);
TrackerSpec read_tracker_spec_file(const std::string& path);

struct KeywordSpec {
    std::map<std::string, std::vector<std::string>> keywords_by_treatment;
    std::map<std::string, std::vector<std::string>> contextual_by_treatment;
};

KeywordSpec read_keywords(std::istream& in);
KeywordSpec read_keywords_file(const std::string& path);

// P-value matrix in the layout of the power command: one row per data set,
// one column per analysis.
struct PvalueMatrix {
    std::vector<std::string> analysis_names;
    std::vector<std::vector<double>> p;  // [run][analysis]

    bool empty() const { return p.empty() || analysis_names.empty(); }
};

PvalueMatrix read_matrix(std::istream& in);
PvalueMatrix read_matrix_file(const std::string& path);
void write_matrix(std::ostream& out, const PvalueMatrix& matrix);
void write_matrix_file(const std::string& path, const PvalueMatrix& matrix);

}  // namespace iflow
