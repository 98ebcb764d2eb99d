#include "iflow/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "iflow/errors.hpp"

namespace iflow {

void ExperimentConfig::validate() const {
    if (sample_size < 0) throw ContractError("negative sample size");
    if (n_experimental + m_control != sample_size) {
        throw ContractError("group sizes must add up to the sample size");
    }
    if (n_experimental < 0 || m_control < 0) throw ContractError("negative group size");
    if (training_ticks < 0 || reloads_per_unit < 0 || ads_per_reload < 0) {
        throw ContractError("negative phase length");
    }
    if (!seed_set) throw ContractError("experiment config must set a seed");
    if (unit_failure_prob < 0 || unit_failure_prob > 1) {
        throw ContractError("unit failure probability must lie in [0, 1]");
    }
    if (runs < 1) throw ContractError("runs must be positive");
}

Assignment assign_treatments(const ExperimentConfig& config, Rng& rng) {
    config.validate();
    Assignment assignment;
    assignment.unit_to_index.resize(static_cast<std::size_t>(config.sample_size));
    std::iota(assignment.unit_to_index.begin(), assignment.unit_to_index.end(), 0);
    rng.shuffle(assignment.unit_to_index);
    return assignment;
}

namespace {

// Deterministic within-tick processing order derived from the run seed.
std::vector<int> tick_order(int sample_size, Rng& rng) {
    std::vector<int> order(static_cast<std::size_t>(sample_size));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    return order;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, Tracker& tracker) {
    config.validate();
    RunResult result;
    result.seed = config.seed;

    Rng rng(config.seed);
    const Assignment assignment = assign_treatments(config, rng);
    const int n = config.n_experimental;

    result.logs.resize(static_cast<std::size_t>(config.sample_size));
    std::vector<bool> unit_failed(static_cast<std::size_t>(config.sample_size), false);
    for (int unit = 0; unit < config.sample_size; ++unit) {
        auto& log = result.logs[static_cast<std::size_t>(unit)];
        log.unit_id = unit;
        log.assignment_index = assignment.unit_to_index[static_cast<std::size_t>(unit)];
        log.treatment =
            assignment.experimental(unit, n) ? config.experimental.label : config.control.label;
        if (config.unit_failure_prob > 0) {
            unit_failed[static_cast<std::size_t>(unit)] = rng.unit() < config.unit_failure_prob;
        }
    }

    try {
        int tick = 0;
        // Training phase: experimental units manifest their interests one
        // keyword per tick (cycling); controls idle but still tick.
        for (int t = 0; t < config.training_ticks; ++t, ++tick) {
            for (int unit : tick_order(config.sample_size, rng)) {
                auto& log = result.logs[static_cast<std::size_t>(unit)];
                if (assignment.experimental(unit, n) && !config.experimental.interests.empty()) {
                    const auto& interests = config.experimental.interests;
                    tracker.record_interest(unit, interests[static_cast<std::size_t>(t) % interests.size()]);
                } else if (!assignment.experimental(unit, n) && !config.control.interests.empty()) {
                    const auto& interests = config.control.interests;
                    tracker.record_interest(unit, interests[static_cast<std::size_t>(t) % interests.size()]);
                }
                ++log.ticks_participated;
            }
        }
        // Collection phase: every unit reloads the page once per tick.
        for (int r = 0; r < config.reloads_per_unit; ++r, ++tick) {
            for (int unit : tick_order(config.sample_size, rng)) {
                auto& log = result.logs[static_cast<std::size_t>(unit)];
                ++log.ticks_participated;
                if (unit_failed[static_cast<std::size_t>(unit)]) continue;
                UnitLog::ReloadLog reload;
                reload.tick = tick;
                reload.ads = tracker.serve(unit, tick, config.ads_per_reload, rng);
                log.reloads.push_back(std::move(reload));
            }
        }
    } catch (const TrackerFault& fault) {
        result.failed = true;
        result.error = fault.what();
    }

    // Assemble responses in assignment-index order, one session per unit.
    result.responses.n_experimental = n;
    result.responses.m_control = config.m_control;
    result.responses.responses.resize(static_cast<std::size_t>(config.sample_size));
    result.responses.treatments.resize(static_cast<std::size_t>(config.sample_size));
    for (const auto& log : result.logs) {
        Session session;
        int reload_index = 0;
        for (const auto& reload : log.reloads) {
            for (const auto& ad : reload.ads) session.ads.emplace_back(reload_index, ad);
            ++reload_index;
        }
        UnitResponse response;
        response.sessions.push_back(std::move(session));
        result.responses.responses[static_cast<std::size_t>(log.assignment_index)] = std::move(response);
        result.responses.treatments[static_cast<std::size_t>(log.assignment_index)] = log.treatment;
    }
    return result;
}

AnalysisPlan permutation_plan(TestStatistic stat, PermutationOptions options) {
    AnalysisPlan plan;
    plan.name = stat.name;
    plan.p_value = [stat = std::move(stat), options](const ResponseVector& y,
                                                     std::uint64_t seed) mutable {
        PermutationOptions opts = options;
        if (!opts.seed) opts.seed = seed;
        return permutation_test(stat, y, opts).p;
    };
    return plan;
}

AnalysisPlan chi2_plan(std::vector<std::string> keywords) {
    if (keywords.empty()) throw ContractError("chi-squared analysis needs at least one keyword");
    AnalysisPlan plan;
    plan.name = "chi2";
    plan.p_value = [keywords = std::move(keywords)](const ResponseVector& y, std::uint64_t) {
        // 2x2 table: rows = groups, columns = keyword present / absent,
        // pooled over every ad the group collected.
        std::array<std::array<std::uint64_t, 2>, 2> table{{{0, 0}, {0, 0}}};
        auto fill = [&](int from, int to, std::size_t row) {
            for (int i = from; i < to; ++i) {
                for (const AdRecord* ad : y.responses[static_cast<std::size_t>(i)].all_ads()) {
                    ++table[row][ad_contains(*ad, keywords) ? 0 : 1];
                }
            }
        };
        fill(0, y.n_experimental, 0);
        fill(y.n_experimental, y.n_experimental + y.m_control, 1);
        return chi2_2x2(table).p;
    };
    return plan;
}

int PowerReport::significant_count(std::size_t analysis, double alpha) const {
    int count = 0;
    for (std::size_t run = 0; run < p.size(); ++run) {
        if (!run_failed[run] && p[run][analysis] < alpha) ++count;
    }
    return count;
}

PowerReport power_eval(const ExperimentConfig& config, const TrackerSpec& tracker_spec,
                       const std::vector<AnalysisPlan>& analyses, int runs) {
    config.validate();
    if (runs < 2) throw ContractError("power evaluation needs at least 2 runs");
    if (analyses.empty()) throw ContractError("power evaluation needs at least one analysis");

    PowerReport report;
    for (const auto& a : analyses) report.analysis_names.push_back(a.name);

    for (int run = 0; run < runs; ++run) {
        ExperimentConfig run_config = config;
        run_config.seed = derive_seed(config.seed, static_cast<std::uint64_t>(run));
        Tracker tracker(tracker_spec);  // fresh tracker state per run
        RunResult result = run_experiment(run_config, tracker);

        std::vector<double> row;
        row.reserve(analyses.size());
        if (result.failed) {
            row.assign(analyses.size(), std::numeric_limits<double>::quiet_NaN());
        } else {
            for (std::size_t a = 0; a < analyses.size(); ++a) {
                row.push_back(analyses[a].p_value(
                    result.responses,
                    derive_seed(run_config.seed, 1000 + static_cast<std::uint64_t>(a))));
            }
        }
        report.p.push_back(std::move(row));
        report.run_failed.push_back(result.failed);
        report.run_errors.push_back(result.error);
    }
    return report;
}

namespace {

int unique_ads(const UnitLog& log) {
    std::set<std::string> urls;
    for (const auto& reload : log.reloads) {
        for (const auto& ad : reload.ads) urls.insert(ad.url);
    }
    return static_cast<int>(urls.size());
}

double median(std::vector<int> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return (values[mid - 1] + values[mid]) / 2.0;
}

}  // namespace

DiversityReport cross_unit_probe(const ExperimentConfig& config, const TrackerSpec& tracker_spec,
                                 int rounds, int extra_units) {
    config.validate();
    if (rounds < 1) throw ContractError("probe needs at least one round");
    if (extra_units < 1) throw ContractError("probe needs at least one extra unit");

    DiversityReport report;
    report.reloads_per_round = config.reloads_per_unit;

    auto one_round = [&](int round, bool parallel) {
        ExperimentConfig round_config = config;
        const int peers = parallel ? extra_units : 0;
        // Primary plus peers; half of the peers share the primary's
        // treatment, the rest idle.
        round_config.sample_size = 1 + peers;
        round_config.n_experimental = 1 + peers / 2;
        round_config.m_control = round_config.sample_size - round_config.n_experimental;
        round_config.seed =
            derive_seed(config.seed, static_cast<std::uint64_t>(round * 2 + (parallel ? 1 : 0)));
        Tracker tracker(tracker_spec);
        RunResult result = run_experiment(round_config, tracker);
        if (result.failed) throw TrackerFault("probe round failed: " + result.error);
        // The primary unit is the one holding experimental slot 0.
        for (const auto& log : result.logs) {
            if (log.assignment_index == 0) return unique_ads(log);
        }
        throw ContractError("no unit assigned to slot 0");
    };

    for (int round = 0; round < rounds; ++round) {
        report.unique_isolated.push_back(one_round(round, false));
        report.unique_parallel.push_back(one_round(round, true));
    }
    report.median_isolated = median(report.unique_isolated);
    report.median_parallel = median(report.unique_parallel);
    return report;
}

}  // namespace iflow
