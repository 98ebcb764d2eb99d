#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "iflow/stats.hpp"
#include "iflow/tracker.hpp"

namespace iflow {

struct TreatmentSpec {
    std::string label;
    std::vector<std::string> interests;  // empty = idle
};

struct ExperimentConfig {
    int sample_size = 0;
    int n_experimental = 0;
    int m_control = 0;
    int training_ticks = 0;
    int reloads_per_unit = 0;
    int ads_per_reload = 0;
    int runs = 1;
    std::uint64_t seed = 0;  // mandatory; all randomness derives from it
    bool seed_set = false;
    TreatmentSpec experimental{"experimental", {}};
    TreatmentSpec control{"control", {}};
    double unit_failure_prob = 0.0;  // per-unit chance of collecting nothing

    void validate() const;
};

// unit_to_index[k] = assignment index of unit k; indices 0..n-1 are the
// experimental slots, n..n+m-1 the control slots.
struct Assignment {
    std::vector<int> unit_to_index;

    bool experimental(int unit, int n) const { return unit_to_index[static_cast<std::size_t>(unit)] < n; }
};

// Uniformly random bijection from units to treatment-vector slots.
Assignment assign_treatments(const ExperimentConfig& config, Rng& rng);

struct UnitLog {
    int unit_id = 0;
    int assignment_index = 0;
    std::string treatment;
    struct ReloadLog {
        int tick = 0;
        std::vector<AdRecord> ads;
    };
    std::vector<ReloadLog> reloads;
    int ticks_participated = 0;
};

struct RunResult {
    ResponseVector responses;      // assembled in assignment-index order
    std::vector<UnitLog> logs;     // indexed by unit id
    bool failed = false;
    std::string error;
    std::uint64_t seed = 0;
};

// One randomized run against the tracker. All units advance on a shared
// logical clock: during training ticks the experimental group issues interest
// actions while controls idle; during collection ticks every unit requests a
// page of ads. Tracker interactions are serialized within each tick in a
// seed-derived order. A tracker fault marks the run failed and keeps the
// partial logs.
RunResult run_experiment(const ExperimentConfig& config, Tracker& tracker);

// A named analysis mapping one run's responses to a p-value.
struct AnalysisPlan {
    std::string name;
    std::function<double(const ResponseVector&, std::uint64_t seed)> p_value;
};

AnalysisPlan permutation_plan(TestStatistic stat, PermutationOptions options = {});
AnalysisPlan chi2_plan(std::vector<std::string> keywords);

struct PowerReport {
    std::vector<std::string> analysis_names;
    std::vector<std::vector<double>> p;  // [run][analysis]; NaN for failed runs
    std::vector<bool> run_failed;
    std::vector<std::string> run_errors;

    int significant_count(std::size_t analysis, double alpha = 0.05) const;
};

// Repeats the experiment with fresh derived seeds and applies every analysis
// to every run.
PowerReport power_eval(const ExperimentConfig& config, const TrackerSpec& tracker_spec,
                       const std::vector<AnalysisPlan>& analyses, int runs);

struct DiversityReport {
    int reloads_per_round = 0;
    std::vector<int> unique_isolated;  // per round, unique ads seen by the primary unit
    std::vector<int> unique_parallel;
    double median_isolated = 0.0;
    double median_parallel = 0.0;
};

// Runs the primary unit alone and then alongside `extra_units` peers (half of
// them manifesting the same interests, the rest idle), with fresh tracker
// state per round, and reports the primary unit's unique-ad counts.
DiversityReport cross_unit_probe(const ExperimentConfig& config, const TrackerSpec& tracker_spec,
                                 int rounds, int extra_units);

}  // namespace iflow
