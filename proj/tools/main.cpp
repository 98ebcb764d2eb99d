#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "iflow/experiment.hpp"
#include "iflow/io.hpp"
#include "iflow/machine.hpp"
#include "iflow/mimic.hpp"
#include "iflow/sem.hpp"
#include "iflow/stats.hpp"

namespace {

using namespace iflow;

constexpr int kExitNegative = 0;  // success / no finding
constexpr int kExitError = 1;
constexpr int kExitFinding = 2;  // witness, effect or significant result

std::string format_input_seq(const MooreMachine& machine, const InputSeq& seq) {
    const auto& a = machine.alphabets();
    std::string out = "[";
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) out += ", ";
        out += "(" + a.hi_in.name(seq[i].hi) + "," + a.lo_in.name(seq[i].lo) + ")";
    }
    return out + "]";
}

int cmd_check_ni(const std::string& machine_path, int horizon, bool probabilistic,
                 std::uint64_t budget, double tolerance, const std::string& witness_out) {
    MooreMachine machine = read_machine_file(machine_path);
    CheckOptions options;
    options.probabilistic = probabilistic;
    options.budget = budget;
    options.tolerance = tolerance;
    NoninterferenceCheck check = check_noninterference(machine, horizon, options);
    std::cout << "pairs_enumerated: " << check.pairs_enumerated << "\n";
    if (!check.interferes()) {
        std::cout << "verdict: noninterfering up to horizon " << horizon << "\n";
        return kExitNegative;
    }
    std::cout << "verdict: interference witness found\n";
    std::cout << "input1: " << format_input_seq(machine, check.witness->first) << "\n";
    std::cout << "input2: " << format_input_seq(machine, check.witness->second) << "\n";
    if (!witness_out.empty()) {
        std::ofstream out(witness_out);
        if (!out) throw ParseError("cannot open '" + witness_out + "' for writing");
        write_witness(out, machine, *check.witness);
    } else {
        write_witness(std::cout, machine, *check.witness);
    }
    return kExitFinding;
}

int cmd_mimic(const std::string& trace_path, const std::string& kind, const std::string& out_path) {
    TraceFile file = read_trace_file(trace_path);
    MooreMachine machine = kind == "ni" ? build_mimic_noninterfering(file.trace, file.alphabets)
                                        : build_mimic_interfering(file.trace, file.alphabets);
    if (out_path.empty()) {
        write_machine(std::cout, machine);
    } else {
        write_machine_file(out_path, machine);
        std::cout << "machine written to " << out_path << "\n";
    }
    return kExitNegative;
}

VarAssignment parse_do(const Sem& sem, const std::vector<std::string>& clauses) {
    VarAssignment out;
    for (const auto& clause : clauses) {
        auto eq = clause.find('=');
        if (eq == std::string::npos) throw ParseError("--do needs VAR=value, got '" + clause + "'");
        const std::string name = clause.substr(0, eq);
        const std::string value = clause.substr(eq + 1);
        auto var = sem.var_index(name);
        if (!var) throw ParseError("unknown variable '" + name + "'");
        const auto& range = sem.var(*var).range;
        auto found = std::find(range.begin(), range.end(), value);
        if (found == range.end()) {
            throw ParseError("variable '" + name + "' has no value '" + value + "'");
        }
        out[*var] = static_cast<Value>(found - range.begin());
    }
    return out;
}

std::vector<int> parse_vars(const Sem& sem, const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        auto var = sem.var_index(name);
        if (!var) throw ParseError("unknown variable '" + name + "'");
        out.push_back(*var);
    }
    if (out.empty()) throw ParseError("empty variable list");
    return out;
}

int cmd_sem_effect(const std::string& sem_path, const std::string& factors,
                   const std::string& response, const std::vector<std::string>& do_clauses,
                   std::uint64_t budget) {
    Sem sem = read_sem_file(sem_path);
    const auto x = parse_vars(sem, factors);
    const auto y = parse_vars(sem, response);
    const auto fixed = parse_do(sem, do_clauses);
    EffectCheck check = has_effect(sem, x, y, fixed, budget);
    std::cout << "comparisons: " << check.comparisons << "\n";
    if (!check.has_effect()) {
        std::cout << "verdict: no effect\n";
        return kExitNegative;
    }
    auto render = [&](const ValueVec& values) {
        std::string s = "[";
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (i) s += ", ";
            s += sem.var(x[i]).name + "=" + sem.var(x[i]).range[static_cast<std::size_t>(values[i])];
        }
        return s + "]";
    };
    std::cout << "verdict: effect witness found\n";
    std::cout << "x1: " << render(check.witness->x1) << "\n";
    std::cout << "x2: " << render(check.witness->x2) << "\n";
    return kExitFinding;
}

int cmd_theorem3(const std::string& machine_path, int states, int horizon, std::uint64_t budget) {
    if (!machine_path.empty()) {
        MooreMachine machine = read_machine_file(machine_path);
        Theorem3Report report = check_theorem3(machine, horizon, budget);
        std::cout << "interference: " << (report.machine_check.interferes() ? "yes" : "no") << "\n";
        std::cout << "effect: " << (report.effect_found ? "yes" : "no") << "\n";
        std::cout << "agree: " << (report.agree ? "yes" : "no") << "\n";
        return report.agree ? kExitNegative : kExitFinding;
    }

    std::uint64_t total = 0, agreed = 0, interfering = 0;
    sweep_deterministic_machines(states, [&](const MooreMachine& machine) {
        Theorem3Report report = check_theorem3(machine, horizon, budget);
        ++total;
        if (report.agree) ++agreed;
        if (report.machine_check.interferes()) ++interfering;
    });
    std::cout << "machines: " << total << "\n";
    std::cout << "interfering: " << interfering << "\n";
    std::cout << "agreement: " << agreed << "/" << total << "\n";
    return agreed == total ? kExitNegative : kExitFinding;
}

ResponseVector select_run(const std::string& data_path, int run) {
    auto runs = read_responses_file(data_path);
    if (runs.empty()) throw ParseError("no runs in '" + data_path + "'");
    auto it = runs.find(run);
    if (it == runs.end()) {
        throw ParseError("run " + std::to_string(run) + " not present in '" + data_path + "'");
    }
    return it->second;
}

int cmd_ptest(const std::string& data_path, const std::string& stat_name, const std::string& method,
              const std::string& tail, std::uint64_t seed, bool seed_set, std::uint64_t samples,
              const std::string& keywords_path, const std::string& treatment,
              const std::string& nonce, int run, double alpha) {
    ResponseVector y = select_run(data_path, run);

    auto resolve_keywords = [&]() {
        if (keywords_path.empty()) throw ParseError("--keywords-file is required for this statistic");
        KeywordSpec spec = read_keywords_file(keywords_path);
        std::string label = treatment;
        if (label.empty() && !y.treatments.empty()) label = y.treatments.front();
        auto it = spec.keywords_by_treatment.find(label);
        if (it == spec.keywords_by_treatment.end() || it->second.empty()) {
            throw ParseError("no keywords for treatment '" + label + "'");
        }
        return std::make_pair(it->second, spec.contextual_by_treatment[label]);
    };

    if (stat_name == "chi2") {
        auto [keywords, contextual] = resolve_keywords();
        std::array<std::array<std::uint64_t, 2>, 2> table{{{0, 0}, {0, 0}}};
        for (int i = 0; i < y.size(); ++i) {
            const std::size_t row = i < y.n_experimental ? 0 : 1;
            for (const AdRecord* ad : y.responses[static_cast<std::size_t>(i)].all_ads()) {
                ++table[row][ad_contains(*ad, keywords) ? 0 : 1];
            }
        }
        Chi2Result result = chi2_2x2(table);
        std::cout << "stat: chi2\nchi2: " << result.chi2 << "\n";
        std::cout << "p: " << std::setprecision(6) << std::scientific << result.p << "\n";
        return result.p < alpha ? kExitFinding : kExitNegative;
    }

    TestStatistic stat;
    if (stat_name == "sim") {
        stat = stat_sim();
    } else if (stat_name == "kw") {
        stat = stat_kw(resolve_keywords().first);
    } else if (stat_name == "prc") {
        auto [keywords, contextual] = resolve_keywords();
        std::set<std::string> contexts(contextual.begin(), contextual.end());
        stat = stat_prc(keywords, [contexts](const AdRecord& ad) {
            return ad.context && contexts.count(*ad.context) > 0;
        });
    } else if (stat_name == "nonce") {
        if (nonce.empty()) throw ParseError("--nonce is required for the nonce statistic");
        stat = stat_nonce(nonce);
    } else {
        throw ParseError("unknown statistic '" + stat_name + "'");
    }

    PermutationOptions options;
    if (method == "auto") {
        options.method = Method::Auto;
    } else if (method == "exact") {
        options.method = Method::Exact;
    } else if (method == "partition") {
        options.method = Method::Partition;
    } else if (method == "mc") {
        options.method = Method::MonteCarlo;
    } else {
        throw ParseError("unknown method '" + method + "'");
    }
    if (tail == "leq") {
        options.tail = Tail::Leq;
    } else if (tail == "geq") {
        options.tail = Tail::Geq;
    } else if (tail == "two-sided") {
        options.tail = Tail::TwoSided;
    } else {
        throw ParseError("unknown tail '" + tail + "'");
    }
    options.mc_samples = samples;
    if (seed_set) options.seed = seed;

    PermutationResult result = permutation_test(stat, y, options);
    const char* method_name = result.method == Method::Exact ? "exact"
                              : result.method == Method::Partition ? "partition"
                                                                   : "monte-carlo";
    std::cout << "stat: " << stat.name << "\n";
    std::cout << "method: " << method_name << "\n";
    std::cout << "comparisons: " << result.comparisons << "\n";
    std::cout << "p: " << std::setprecision(6) << std::fixed << result.p << "\n";
    if (result.mc_stderr) {
        std::cout << "mc_stderr: " << std::setprecision(6) << std::fixed << *result.mc_stderr << "\n";
    }
    if (stat_name == "nonce" && response_contains(y.responses.front(), nonce)) {
        std::cout << "closed_form: " << format_fraction(nonce_p_closed(y, nonce)) << "\n";
    }
    return result.p < alpha ? kExitFinding : kExitNegative;
}

int cmd_simulate(const std::string& config_path, const std::string& tracker_path,
                 const std::string& out_path) {
    ExperimentConfig config = read_experiment_config_file(config_path);
    TrackerSpec spec = read_tracker_spec_file(tracker_path);
    Tracker tracker(spec);
    RunResult result = run_experiment(config, tracker);
    write_responses_file(out_path, {result});
    if (result.failed) {
        std::cerr << "run failed: " << result.error << " (partial logs written)\n";
        return kExitError;
    }
    std::cout << "responses written to " << out_path << "\n";
    return kExitNegative;
}

std::vector<AnalysisPlan> table_analyses(const ExperimentConfig& config,
                                         const KeywordSpec& keywords) {
    auto it = keywords.keywords_by_treatment.find(config.experimental.label);
    if (it == keywords.keywords_by_treatment.end() || it->second.empty()) {
        throw ParseError("no keywords for treatment '" + config.experimental.label + "'");
    }
    const auto& kw = it->second;
    std::set<std::string> contexts;
    auto ctx = keywords.contextual_by_treatment.find(config.experimental.label);
    if (ctx != keywords.contextual_by_treatment.end()) {
        contexts.insert(ctx->second.begin(), ctx->second.end());
    }

    PermutationOptions partition;
    partition.method = Method::Partition;

    std::vector<AnalysisPlan> plans;
    plans.push_back(permutation_plan(stat_sim(), partition));
    plans.push_back(permutation_plan(stat_kw(kw), partition));
    plans.push_back(permutation_plan(
        stat_prc(kw, [contexts](const AdRecord& ad) { return ad.context && contexts.count(*ad.context) > 0; }),
        partition));
    plans.push_back(chi2_plan(kw));
    return plans;
}

int cmd_power(const std::string& config_path, const std::string& tracker_path,
              const std::string& keywords_path, int runs, const std::string& out_path) {
    ExperimentConfig config = read_experiment_config_file(config_path);
    TrackerSpec spec = read_tracker_spec_file(tracker_path);
    KeywordSpec keywords = read_keywords_file(keywords_path);
    if (runs <= 0) runs = config.runs;

    PowerReport report = power_eval(config, spec, table_analyses(config, keywords), runs);

    PvalueMatrix matrix;
    matrix.analysis_names = report.analysis_names;
    matrix.p = report.p;
    if (out_path.empty()) {
        write_matrix(std::cout, matrix);
    } else {
        write_matrix_file(out_path, matrix);
    }

    std::cout << "number_significant (p < 0.05):";
    for (std::size_t a = 0; a < report.analysis_names.size(); ++a) {
        std::cout << " " << report.analysis_names[a] << "=" << report.significant_count(a);
    }
    std::cout << "\n";
    return kExitNegative;
}

int cmd_report(const std::string& matrix_path, double q, double alpha) {
    PvalueMatrix matrix = read_matrix_file(matrix_path);
    if (matrix.empty()) throw ParseError("matrix '" + matrix_path + "' has no data rows");

    const std::size_t cols = matrix.analysis_names.size();
    // Benjamini-Hochberg per analysis column over the data sets.
    std::vector<std::vector<bool>> flags(cols);
    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<double> column;
        for (const auto& row : matrix.p) {
            column.push_back(std::isnan(row[c]) ? 1.0 : row[c]);
        }
        flags[c] = bh_fdr(column, q);
    }

    std::cout << std::left << std::setw(10) << "data_set";
    for (const auto& name : matrix.analysis_names) std::cout << std::setw(14) << name;
    std::cout << "\n";
    std::vector<int> significant(cols, 0);
    for (std::size_t r = 0; r < matrix.p.size(); ++r) {
        std::cout << std::setw(10) << (r + 1);
        for (std::size_t c = 0; c < cols; ++c) {
            std::ostringstream cell;
            if (std::isnan(matrix.p[r][c])) {
                cell << "failed";
            } else {
                cell << std::fixed << std::setprecision(6) << matrix.p[r][c];
                if (flags[c][r]) cell << "*";
                if (matrix.p[r][c] < alpha) ++significant[c];
            }
            std::cout << std::setw(14) << cell.str();
        }
        std::cout << "\n";
    }
    std::cout << std::setw(10) << "n<5%";
    for (std::size_t c = 0; c < cols; ++c) std::cout << std::setw(14) << significant[c];
    std::cout << "\n";
    std::cout << "BH flags (*) at q = " << q << "\n";
    return kExitNegative;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"information flow experiment toolkit"};
    app.require_subcommand(1);

    // check-ni
    std::string machine_path, witness_out;
    int horizon = 2;
    bool probabilistic = false;
    std::uint64_t budget = 10'000'000;
    double tolerance = 0.0;
    auto* check = app.add_subcommand("check-ni", "bounded noninterference check of a machine file");
    check->add_option("machine", machine_path)->required();
    check->add_option("--horizon", horizon);
    check->add_flag("--probabilistic", probabilistic, "compare output distributions (needed for probabilistic machines)");
    check->add_option("--budget", budget);
    check->add_option("--tolerance", tolerance, "opt-in float comparison tolerance");
    check->add_option("--witness-out", witness_out);

    // mimic
    std::string trace_path, mimic_kind = "ni", mimic_out;
    auto* mimic = app.add_subcommand("mimic", "build a trace-equivalent machine with or without interference");
    mimic->add_option("trace", trace_path)->required();
    mimic->add_option("--kind", mimic_kind)->check(CLI::IsMember({"ni", "int"}));
    mimic->add_option("-o,--out", mimic_out);

    // sem-effect
    std::string sem_path, factors, response;
    std::vector<std::string> do_clauses;
    auto* sem_effect = app.add_subcommand("sem-effect", "exact causal-effect check on a sem file");
    sem_effect->add_option("sem", sem_path)->required();
    sem_effect->add_option("--factors", factors)->required();
    sem_effect->add_option("--response", response)->required();
    sem_effect->add_option("--do", do_clauses, "fixed interventions VAR=value");
    sem_effect->add_option("--budget", budget);

    // theorem3-sweep
    std::string t3_machine;
    int t3_states = 2;
    auto* t3 = app.add_subcommand("theorem3-sweep",
                                  "compare interference and compiled-model effect verdicts");
    t3->add_option("--machine", t3_machine, "check a single machine file instead of sweeping");
    t3->add_option("--states", t3_states);
    t3->add_option("--horizon", horizon);
    t3->add_option("--budget", budget);

    // ptest
    std::string data_path, stat_name, method = "auto", tail = "leq", keywords_path, treatment, nonce;
    std::uint64_t seed = 0, samples = 100'000;
    bool seed_set = false;
    int run = 0;
    double alpha = 0.05;
    auto* ptest = app.add_subcommand("ptest", "permutation or chi-squared test of a response data file");
    ptest->add_option("data", data_path)->required();
    ptest->add_option("--stat", stat_name)->required()->check(CLI::IsMember({"sim", "kw", "prc", "nonce", "chi2"}));
    ptest->add_option("--method", method)->check(CLI::IsMember({"auto", "exact", "partition", "mc"}));
    ptest->add_option("--tail", tail)->check(CLI::IsMember({"leq", "geq", "two-sided"}));
    auto* seed_opt = ptest->add_option("--seed", seed);
    ptest->add_option("--samples", samples);
    ptest->add_option("--keywords-file", keywords_path);
    ptest->add_option("--treatment", treatment);
    ptest->add_option("--nonce", nonce);
    ptest->add_option("--run", run);
    ptest->add_option("--alpha", alpha);

    // simulate
    std::string config_path, tracker_path, out_path;
    auto* simulate = app.add_subcommand("simulate", "run one experiment and write the response log");
    simulate->add_option("--config", config_path)->required();
    simulate->add_option("--tracker", tracker_path)->required();
    simulate->add_option("-o,--out", out_path)->required();

    // power
    int runs = 0;
    auto* power = app.add_subcommand("power", "repeat the experiment and tabulate p-values");
    power->add_option("--config", config_path)->required();
    power->add_option("--tracker", tracker_path)->required();
    power->add_option("--keywords-file", keywords_path)->required();
    power->add_option("--runs", runs);
    power->add_option("-o,--out", out_path);

    // report
    std::string matrix_path;
    double fdr_q = 0.05;
    auto* report = app.add_subcommand("report", "render a stored p-value matrix with FDR flags");
    report->add_option("matrix", matrix_path)->required();
    report->add_option("--fdr", fdr_q);
    report->add_option("--alpha", alpha);

    CLI11_PARSE(app, argc, argv);

    try {
        if (check->parsed()) {
            return cmd_check_ni(machine_path, horizon, probabilistic, budget, tolerance, witness_out);
        }
        if (mimic->parsed()) return cmd_mimic(trace_path, mimic_kind, mimic_out);
        if (sem_effect->parsed()) return cmd_sem_effect(sem_path, factors, response, do_clauses, budget);
        if (t3->parsed()) return cmd_theorem3(t3_machine, t3_states, horizon, budget);
        if (ptest->parsed()) {
            seed_set = seed_opt->count() > 0;
            return cmd_ptest(data_path, stat_name, method, tail, seed, seed_set, samples,
                             keywords_path, treatment, nonce, run, alpha);
        }
        if (simulate->parsed()) return cmd_simulate(config_path, tracker_path, out_path);
        if (power->parsed()) return cmd_power(config_path, tracker_path, keywords_path, runs, out_path);
        if (report->parsed()) return cmd_report(matrix_path, fdr_q, alpha);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
