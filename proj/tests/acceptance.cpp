// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion carries its runtime bound.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "iflow/experiment.hpp"
#include "iflow/io.hpp"
#include "iflow/machine.hpp"
#include "iflow/mimic.hpp"
#include "iflow/sem.hpp"
#include "iflow/stats.hpp"
#include "support.hpp"

using namespace iflow;
using namespace testutil;

namespace {

int g_failures = 0;

void run_criterion(int number, const std::string& name, double time_limit_s,
                   const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool pass = false;
    const auto start = std::chrono::steady_clock::now();
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
        pass = false;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > time_limit_s) {
        pass = false;
        detail += " [exceeded " + std::to_string(time_limit_s) + " s limit]";
    }
    if (!pass) ++g_failures;
    std::printf("[%s] criterion %d (%s): %s (%.2f s, limit %.0f s)\n", pass ? "PASS" : "FAIL",
                number, name.c_str(), detail.c_str(), seconds, time_limit_s);
    std::fflush(stdout);
}

// ---- criterion 1 -----------------------------------------------------------

UnitResponse one_ad_unit(const std::string& url, const std::string& text) {
    UnitResponse unit;
    Session session;
    session.ads.emplace_back(0, AdRecord{url, text, std::nullopt});
    unit.sessions.push_back(std::move(session));
    return unit;
}

bool criterion_partition_minima(std::string& detail) {
    ResponseVector y;
    for (int i = 0; i < 5; ++i) y.responses.push_back(one_ad_unit("cars.example/d", "car sale"));
    for (int i = 0; i < 5; ++i) y.responses.push_back(one_ad_unit("news.example/n", "headlines"));
    y.n_experimental = 5;
    y.m_control = 5;

    PermutationOptions options;
    options.method = Method::Partition;

    // Exchange-symmetric statistic: the observed grouping and its mirror both
    // attain the strict maximum.
    auto sim = permutation_test(stat_sim(), y, options);
    // Signed statistic: only the observed grouping attains it.
    auto kw = permutation_test(stat_kw({"car"}), y, options);

    std::ostringstream out;
    out << "sim p = " << format_fraction(sim.p_exact()) << " (" << sim.p << "), kw p = "
        << format_fraction(kw.p_exact()) << " (" << kw.p << ")";
    detail = out.str();
    return sim.comparisons == 252 && sim.p_exact() == Rational(1, 126) &&
           kw.comparisons == 252 && kw.p_exact() == Rational(1, 252) &&
           std::abs(sim.p - 0.007937) < 1e-6 && std::abs(kw.p - 0.003968) < 1e-6;
}

// ---- criterion 2 -----------------------------------------------------------

bool criterion_nonce(std::string& detail) {
    const std::string nonce = "nonceX42";
    int checked = 0;

    for (int size = 2; size <= 7; ++size) {
        for (int mask = 1; mask < (1 << size); mask += 2) {
            ResponseVector y;
            for (int i = 0; i < size; ++i) {
                const bool present = (mask >> i) & 1;
                y.responses.push_back(
                    one_ad_unit("u.example/x", present ? "with nonceX42 token" : "plain"));
            }
            y.n_experimental = size;
            y.m_control = 0;
            PermutationOptions options{Method::Exact, Tail::Leq};
            auto exact = permutation_test(stat_nonce(nonce), y, options);
            if (exact.p_exact() != nonce_p_closed(y, nonce)) {
                detail = "mismatch at size " + std::to_string(size) + " mask " + std::to_string(mask);
                return false;
            }
            ++checked;
        }
    }

    auto shaped = [&](int m, int w) {
        ResponseVector y;
        y.responses.push_back(one_ad_unit("u.example/x", "first nonceX42"));
        for (int i = 1; i < m; ++i) {
            y.responses.push_back(one_ad_unit("u.example/x", i <= w ? "also nonceX42" : "plain"));
        }
        y.n_experimental = m;
        y.m_control = 0;
        return nonce_p_closed(y, nonce);
    };
    const bool shapes_ok =
        shaped(100, 10) == Rational(11, 100) && shaped(50, 4) == Rational(5, 50);

    detail = std::to_string(checked) + " placements match exact enumeration; (100,10) -> 11/100, "
             "(50,4) -> 1/10";
    return shapes_ok;
}

// ---- criterion 3 -----------------------------------------------------------

bool criterion_theorem3_sweep(std::string& detail) {
    std::uint64_t total = 0, agreed = 0, interfering = 0;
    sweep_deterministic_machines(2, [&](const MooreMachine& machine) {
        auto report = check_theorem3(machine, 2);
        ++total;
        if (report.agree) ++agreed;
        if (report.machine_check.interferes()) ++interfering;
    });
    std::ostringstream out;
    out << agreed << "/" << total << " agree (" << interfering << " interfering)";
    detail = out.str();
    return total == 4096 && agreed == total;
}

// ---- criterion 4 -----------------------------------------------------------

bool criterion_mimic(std::string& detail) {
    Rng rng(20240402);
    int passed = 0;
    for (int round = 0; round < 100; ++round) {
        // Two high inputs and two low outputs (the theorem hypothesis);
        // remaining channel sizes vary between 1 and 2.
        auto a = alphabets(2, 1 + static_cast<int>(rng.below(2)), 1 + static_cast<int>(rng.below(2)), 2);
        const int k = static_cast<int>(rng.below(4));
        auto trace = random_trace(a, k, rng);
        auto expected = Distribution<OutputSeq>::point(trace.outputs);

        auto quiet = build_mimic_noninterfering(trace, a);
        auto loud = build_mimic_interfering(trace, a);

        const bool quiet_ok = output_dist(quiet, trace.inputs) == expected &&
                              !check_noninterference(quiet, k + 2).interferes();
        const bool loud_ok = output_dist(loud, trace.inputs) == expected &&
                             check_noninterference(loud, k + 2).interferes();
        if (quiet_ok && loud_ok) ++passed;
    }
    detail = std::to_string(passed) + "/100 traces: replay exact, verdicts as constructed";
    return passed == 100;
}

// ---- criterion 5 -----------------------------------------------------------

bool criterion_compiled_low_outputs(std::string& detail) {
    std::vector<MooreMachine> machines = {constant_machine(), coin_machine(), echo_machine(),
                                          low_copy_machine()};
    Rng rng(60901);
    while (machines.size() < 40) machines.push_back(random_machine(rng, 3, 2));

    std::uint64_t checked = 0;
    for (const auto& machine : machines) {
        for (int horizon = 1; horizon <= 3; ++horizon) {
            auto [sem, binding] = compile_machine(machine, horizon);
            for (const auto& inputs : enumerate_inputs(machine.alphabets(), horizon)) {
                if (compiled_low_output_dist(sem, binding, inputs) !=
                    low_output_dist(machine, inputs)) {
                    detail = "divergence at horizon " + std::to_string(horizon);
                    return false;
                }
                ++checked;
            }
        }
    }
    detail = std::to_string(checked) + " interventional low-output distributions equal exactly";
    return true;
}

// ---- criteria 6 and 7 ------------------------------------------------------

TrackerSpec acceptance_tracker(bool targeting) {
    TrackerSpec spec;
    AdPool base;
    base.name = "base";
    const char* car_urls[4] = {"cars.example/bmw-deals", "cars.example/audi-sale",
                               "cars.example/limo-hire", "cars.example/cadillac"};
    const char* car_texts[4] = {"new bmw offers near you", "audi sale event",
                                "best limousines for hire", "cadillac prices this month"};
    for (int i = 0; i < 4; ++i) {
        TrackerAd ad;
        ad.url = car_urls[i];
        ad.text = car_texts[i];
        ad.weight = 1.0;
        ad.tags = {"car"};
        base.ads.push_back(ad);
    }
    for (int i = 0; i < 16; ++i) {
        TrackerAd ad;
        ad.url = "other.example/story" + std::to_string(i);
        ad.text = "general interest item " + std::to_string(i);
        ad.weight = 6.0;
        base.ads.push_back(ad);
    }
    spec.pools.push_back(std::move(base));
    spec.schedule = {{0, 0}};
    spec.targeting_enabled = targeting;
    spec.targeting_boost = 30.0;
    spec.churn = 0.05;
    spec.coupling = 0.25;
    return spec;
}

ExperimentConfig acceptance_config(std::uint64_t seed) {
    ExperimentConfig config;
    config.sample_size = 10;
    config.n_experimental = 5;
    config.m_control = 5;
    config.training_ticks = 5;
    config.reloads_per_unit = 10;
    config.ads_per_reload = 5;
    config.seed = seed;
    config.seed_set = true;
    config.experimental = {"cars", {"car"}};
    config.control = {"idle", {}};
    return config;
}

bool criterion_power(std::string& detail) {
    const std::vector<std::string> keywords = {"bmw", "audi", "car", "cadillac", "limo"};
    PermutationOptions partition;
    partition.method = Method::Partition;

    std::vector<AnalysisPlan> analyses;
    analyses.push_back(permutation_plan(stat_sim(), partition));
    analyses.push_back(permutation_plan(stat_kw(keywords), partition));
    analyses.push_back(permutation_plan(
        stat_prc(keywords, [](const AdRecord& ad) { return ad.context.has_value(); }), partition));
    analyses.push_back(chi2_plan(keywords));

    auto on = power_eval(acceptance_config(42), acceptance_tracker(true), analyses, 20);
    const int kw_on = on.significant_count(1);

    auto off = power_eval(acceptance_config(43), acceptance_tracker(false), analyses, 20);
    const int sim_off = off.significant_count(0);
    const int kw_off = off.significant_count(1);
    const int prc_off = off.significant_count(2);
    const int chi2_off = off.significant_count(3);

    std::ostringstream out;
    out << "targeting on: kw " << kw_on << "/20 significant; targeting off: sim " << sim_off
        << ", kw " << kw_off << ", prc " << prc_off << " (chi2 " << chi2_off
        << ", inflation expected)";
    detail = out.str();
    return kw_on >= 18 && sim_off <= 2 && kw_off <= 2 && prc_off <= 2;
}

bool criterion_null_calibration(std::string& detail) {
    const std::vector<std::string> keywords = {"bmw", "audi", "car", "cadillac", "limo"};
    TrackerSpec spec = acceptance_tracker(false);
    PermutationOptions partition;
    partition.method = Method::Partition;
    auto stat = stat_kw(keywords);

    const int sims = 2000;
    int significant = 0;
    for (int s = 0; s < sims; ++s) {
        ExperimentConfig config = acceptance_config(derive_seed(777000, static_cast<std::uint64_t>(s)));
        config.sample_size = 8;
        config.n_experimental = 4;
        config.m_control = 4;
        config.training_ticks = 2;
        config.reloads_per_unit = 3;
        config.ads_per_reload = 3;
        Tracker tracker(spec);
        RunResult result = run_experiment(config, tracker);
        if (result.failed) {
            detail = "run failed: " + result.error;
            return false;
        }
        if (permutation_test(stat, result.responses, partition).p <= 0.05) ++significant;
    }
    const double rate = static_cast<double>(significant) / sims;
    const double bound = 0.05 + 3 * std::sqrt(0.05 * 0.95 / sims);
    std::ostringstream out;
    out << "P(p <= 0.05) = " << rate << " over " << sims << " tests, bound " << bound;
    detail = out.str();
    return rate <= bound;
}

// ---- criterion 8 -----------------------------------------------------------

bool criterion_chi2(std::string& detail) {
    auto diagonal = chi2_2x2({{{10, 0}, {0, 10}}});
    auto flat = chi2_2x2({{{5, 5}, {5, 5}}});
    std::ostringstream out;
    out << "chi2(diag) = " << diagonal.chi2 << ", p = " << diagonal.p << "; chi2(flat) = "
        << flat.chi2 << ", p = " << flat.p;
    detail = out.str();
    return diagonal.chi2 == 20.0 && std::abs(diagonal.p - 7.744216431044e-06) < 1e-6 &&
           flat.chi2 == 0.0 && flat.p == 1.0;
}

// ---- criterion 9 -----------------------------------------------------------

bool criterion_pearl(std::string& detail) {
    std::uint64_t sems = 0, property1 = 0, property2 = 0;
    bool ok = true;
    sweep_small_sems([&](const Sem& sem) {
        if (!ok) return;
        ++sems;
        for (int y = 0; y < sem.size() && ok; ++y) {
            const auto& parents = sem.var(y).parents;
            // Every parent valuation of y.
            std::vector<ValueVec> rows;
            ValueVec current(parents.size(), 0);
            auto rec = [&](auto&& self, std::size_t pos) -> void {
                if (pos == parents.size()) {
                    rows.push_back(current);
                    return;
                }
                for (Value v = 0; v < sem.range_size(parents[pos]); ++v) {
                    current[pos] = v;
                    self(self, pos + 1);
                }
            };
            rec(rec, 0);

            std::vector<int> others;
            for (int z = 0; z < sem.size(); ++z) {
                if (z != y && std::find(parents.begin(), parents.end(), z) == parents.end()) {
                    others.push_back(z);
                }
            }

            for (const auto& row : rows) {
                VarAssignment par_do;
                for (std::size_t j = 0; j < parents.size(); ++j) par_do[parents[j]] = row[j];
                Sem base = intervene(sem, par_do);
                for (Value yv = 0; yv < sem.range_size(y) && ok; ++yv) {
                    const Rational interventional = marginal_prob(base, {{y, yv}});
                    auto cond = conditional_prob(sem, {{y, yv}}, par_do);
                    if (cond.defined) {
                        if (cond.value != interventional) ok = false;
                        ++property1;
                    }
                    for (int z : others) {
                        for (Value zv = 0; zv < sem.range_size(z) && ok; ++zv) {
                            VarAssignment both = par_do;
                            both[z] = zv;
                            if (marginal_prob(intervene(sem, both), {{y, yv}}) != interventional) {
                                ok = false;
                            }
                            ++property2;
                        }
                    }
                }
            }
        }
    });
    std::ostringstream out;
    out << sems << " sems, " << property1 << " property-1 and " << property2
        << " property-2 instances hold exactly";
    detail = out.str();
    return ok;
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    run_criterion(1, "partition-test minima 1/126 and 1/252", 1.0, criterion_partition_minima);
    run_criterion(2, "nonce closed form vs exact enumeration", 10.0, criterion_nonce);
    run_criterion(3, "interference/effect agreement over all 2-state machines", 300.0,
                  criterion_theorem3_sweep);
    run_criterion(4, "mimic machines replay traces and flip the verdict", 300.0, criterion_mimic);
    run_criterion(5, "compiled low-output distributions match the machine", 300.0,
                  criterion_compiled_low_outputs);
    run_criterion(6, "detection power against the simulated tracker", 600.0, criterion_power);
    run_criterion(7, "null calibration over 2000 simulated tests", 600.0,
                  criterion_null_calibration);
    run_criterion(8, "chi-squared closed form", 1.0, criterion_chi2);
    run_criterion(9, "intervention properties on the exhaustive small-model sweep", 300.0,
                  criterion_pearl);

    if (g_failures == 0) {
        std::printf("ACCEPTANCE: all 9 criteria passed\n");
        return 0;
    }
    std::printf("ACCEPTANCE: %d criteria FAILED\n", g_failures);
    return 1;
}
