#include "iflow/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace iflow {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string current;
    for (char c : s) {
        if (c == sep) {
            out.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    out.push_back(current);
    return out;
}

// Reads "key: value" lines, dropping comments and blanks.
std::vector<std::pair<std::string, std::string>> read_kv_lines(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 'key: value'");
        }
        out.emplace_back(trim(line.substr(0, colon)), trim(line.substr(colon + 1)));
    }
    return out;
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad integer for " + what + ": '" + s + "'");
    }
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad number for " + what + ": '" + s + "'");
    }
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad seed for " + what + ": '" + s + "'");
    }
}

Sym need_symbol(const Alphabet& alphabet, const std::string& name, const std::string& channel) {
    auto idx = alphabet.index_of(name);
    if (!idx) throw ParseError("unknown " + channel + " symbol '" + name + "'");
    return *idx;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

MooreMachine read_machine(std::istream& in) {
    std::vector<std::string> states;
    std::string initial;
    ChannelAlphabets alphabets;
    bool have_states = false, have_initial = false;
    bool have_hi_in = false, have_lo_in = false, have_hi_out = false, have_lo_out = false;
    std::vector<std::pair<std::string, std::string>> transitions, outputs;

    for (const auto& [key, value] : read_kv_lines(in)) {
        if (key == "states") {
            states = split_ws(value);
            have_states = true;
        } else if (key == "initial") {
            initial = value;
            have_initial = true;
        } else if (key == "hi_in") {
            alphabets.hi_in.symbols = split_ws(value);
            have_hi_in = true;
        } else if (key == "lo_in") {
            alphabets.lo_in.symbols = split_ws(value);
            have_lo_in = true;
        } else if (key == "hi_out") {
            alphabets.hi_out.symbols = split_ws(value);
            have_hi_out = true;
        } else if (key == "lo_out") {
            alphabets.lo_out.symbols = split_ws(value);
            have_lo_out = true;
        } else if (key == "transition") {
            transitions.emplace_back(key, value);
        } else if (key == "output") {
            outputs.emplace_back(key, value);
        } else {
            throw ParseError("unknown key '" + key + "' in machine file");
        }
    }
    if (!have_states || !have_initial || !have_hi_in || !have_lo_in || !have_hi_out || !have_lo_out) {
        throw ParseError("machine file must declare states, initial and all four alphabets");
    }

    auto state_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (states[i] == name) return static_cast<int>(i);
        }
        throw ParseError("unknown state '" + name + "'");
    };

    std::vector<std::vector<Distribution<int>>> transition(
        states.size(),
        std::vector<Distribution<int>>(static_cast<std::size_t>(alphabets.input_count())));
    std::vector<bool> transition_seen(states.size() * static_cast<std::size_t>(alphabets.input_count()), false);
    std::vector<OutSym> output(states.size(), OutSym{-1, -1});
    std::vector<bool> output_seen(states.size(), false);

    // transition: <state> <hi_in> <lo_in> -> <state> <p>, <state> <p>, ...
    for (const auto& [key, value] : transitions) {
        auto arrow = value.find("->");
        if (arrow == std::string::npos) throw ParseError("transition line missing '->'");
        auto lhs = split_ws(trim(value.substr(0, arrow)));
        if (lhs.size() != 3) throw ParseError("transition needs 'state hi_in lo_in' before '->'");
        const int src = state_index(lhs[0]);
        const InSym input{need_symbol(alphabets.hi_in, lhs[1], "hi_in"),
                          need_symbol(alphabets.lo_in, lhs[2], "lo_in")};
        Distribution<int> dist;
        for (const auto& part : split_on(trim(value.substr(arrow + 2)), ',')) {
            auto tokens = split_ws(part);
            if (tokens.size() != 2) throw ParseError("transition target needs 'state probability'");
            dist.add(state_index(tokens[0]), parse_fraction(tokens[1]));
        }
        const std::size_t slot = static_cast<std::size_t>(src) *
                                     static_cast<std::size_t>(alphabets.input_count()) +
                                 static_cast<std::size_t>(alphabets.input_index(input));
        if (transition_seen[slot]) {
            throw ParseError("duplicate transition row for state '" + lhs[0] + "'");
        }
        transition_seen[slot] = true;
        transition[static_cast<std::size_t>(src)][static_cast<std::size_t>(alphabets.input_index(input))] =
            std::move(dist);
    }
    for (std::size_t i = 0; i < transition_seen.size(); ++i) {
        if (!transition_seen[i]) {
            throw ParseError("missing transition row for state '" +
                             states[i / static_cast<std::size_t>(alphabets.input_count())] + "'");
        }
    }

    // output: <state> -> <hi_out> <lo_out>
    for (const auto& [key, value] : outputs) {
        auto arrow = value.find("->");
        if (arrow == std::string::npos) throw ParseError("output line missing '->'");
        auto lhs = split_ws(trim(value.substr(0, arrow)));
        auto rhs = split_ws(trim(value.substr(arrow + 2)));
        if (lhs.size() != 1 || rhs.size() != 2) {
            throw ParseError("output line needs 'state -> hi_out lo_out'");
        }
        const int src = state_index(lhs[0]);
        if (output_seen[static_cast<std::size_t>(src)]) {
            throw ParseError("duplicate output row for state '" + lhs[0] + "'");
        }
        output_seen[static_cast<std::size_t>(src)] = true;
        output[static_cast<std::size_t>(src)] = OutSym{need_symbol(alphabets.hi_out, rhs[0], "hi_out"),
                                                       need_symbol(alphabets.lo_out, rhs[1], "lo_out")};
    }
    for (std::size_t i = 0; i < output_seen.size(); ++i) {
        if (!output_seen[i]) throw ParseError("missing output row for state '" + states[i] + "'");
    }

    try {
        return MooreMachine(states, state_index(initial), alphabets, std::move(transition),
                            std::move(output));
    } catch (const ContractError& e) {
        throw ParseError(std::string("invalid machine: ") + e.what());
    }
}

MooreMachine read_machine_file(const std::string& path) {
    auto in = open_input(path);
    return read_machine(in);
}

void write_machine(std::ostream& out, const MooreMachine& machine) {
    const auto& a = machine.alphabets();
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ' ';
            s += v[i];
        }
        return s;
    };
    out << "states: ";
    for (int s = 0; s < machine.state_count(); ++s) out << (s ? " " : "") << machine.state_name(s);
    out << "\n";
    out << "initial: " << machine.state_name(machine.initial()) << "\n";
    out << "hi_in: " << join(a.hi_in.symbols) << "\n";
    out << "lo_in: " << join(a.lo_in.symbols) << "\n";
    out << "hi_out: " << join(a.hi_out.symbols) << "\n";
    out << "lo_out: " << join(a.lo_out.symbols) << "\n";
    for (int s = 0; s < machine.state_count(); ++s) {
        for (Sym h = 0; h < a.hi_in.size(); ++h) {
            for (Sym l = 0; l < a.lo_in.size(); ++l) {
                out << "transition: " << machine.state_name(s) << " " << a.hi_in.name(h) << " "
                    << a.lo_in.name(l) << " ->";
                bool first = true;
                for (const auto& [succ, p] : machine.transition(s, InSym{h, l}).support()) {
                    out << (first ? " " : ", ") << machine.state_name(succ) << " "
                        << format_fraction(p);
                    first = false;
                }
                out << "\n";
            }
        }
    }
    for (int s = 0; s < machine.state_count(); ++s) {
        const OutSym o = machine.output(s);
        out << "output: " << machine.state_name(s) << " -> " << a.hi_out.name(o.hi) << " "
            << a.lo_out.name(o.lo) << "\n";
    }
}

void write_machine_file(const std::string& path, const MooreMachine& machine) {
    auto out = open_output(path);
    write_machine(out, machine);
}

TraceFile read_trace(std::istream& in) {
    TraceFile file;
    bool have_hi_in = false, have_lo_in = false, have_hi_out = false, have_lo_out = false;
    std::vector<std::string> input_lines, output_lines;
    for (const auto& [key, value] : read_kv_lines(in)) {
        if (key == "hi_in") {
            file.alphabets.hi_in.symbols = split_ws(value);
            have_hi_in = true;
        } else if (key == "lo_in") {
            file.alphabets.lo_in.symbols = split_ws(value);
            have_lo_in = true;
        } else if (key == "hi_out") {
            file.alphabets.hi_out.symbols = split_ws(value);
            have_hi_out = true;
        } else if (key == "lo_out") {
            file.alphabets.lo_out.symbols = split_ws(value);
            have_lo_out = true;
        } else if (key == "input") {
            input_lines.push_back(value);
        } else if (key == "output") {
            output_lines.push_back(value);
        } else {
            throw ParseError("unknown key '" + key + "' in trace file");
        }
    }
    if (!have_hi_in || !have_lo_in || !have_hi_out || !have_lo_out) {
        throw ParseError("trace file must declare all four alphabets");
    }
    for (const auto& line : input_lines) {
        auto tokens = split_ws(line);
        if (tokens.size() != 2) throw ParseError("input line needs 'hi lo'");
        file.trace.inputs.push_back(InSym{need_symbol(file.alphabets.hi_in, tokens[0], "hi_in"),
                                          need_symbol(file.alphabets.lo_in, tokens[1], "lo_in")});
    }
    for (const auto& line : output_lines) {
        auto tokens = split_ws(line);
        if (tokens.size() != 2) throw ParseError("output line needs 'hi lo'");
        file.trace.outputs.push_back(OutSym{need_symbol(file.alphabets.hi_out, tokens[0], "hi_out"),
                                            need_symbol(file.alphabets.lo_out, tokens[1], "lo_out")});
    }
    try {
        file.trace.validate(file.alphabets);
    } catch (const ContractError& e) {
        throw ParseError(std::string("invalid trace: ") + e.what());
    }
    return file;
}

TraceFile read_trace_file(const std::string& path) {
    auto in = open_input(path);
    return read_trace(in);
}

void write_trace(std::ostream& out, const TraceFile& file) {
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ' ';
            s += v[i];
        }
        return s;
    };
    out << "hi_in: " << join(file.alphabets.hi_in.symbols) << "\n";
    out << "lo_in: " << join(file.alphabets.lo_in.symbols) << "\n";
    out << "hi_out: " << join(file.alphabets.hi_out.symbols) << "\n";
    out << "lo_out: " << join(file.alphabets.lo_out.symbols) << "\n";
    for (const auto& i : file.trace.inputs) {
        out << "input: " << file.alphabets.hi_in.name(i.hi) << " " << file.alphabets.lo_in.name(i.lo)
            << "\n";
    }
    for (const auto& o : file.trace.outputs) {
        out << "output: " << file.alphabets.hi_out.name(o.hi) << " "
            << file.alphabets.lo_out.name(o.lo) << "\n";
    }
}

void write_trace_file(const std::string& path, const TraceFile& file) {
    auto out = open_output(path);
    write_trace(out, file);
}

void write_witness(std::ostream& out, const MooreMachine& machine, const Witness& witness) {
    const auto& a = machine.alphabets();
    out << "hi_in: ";
    for (int i = 0; i < a.hi_in.size(); ++i) out << (i ? " " : "") << a.hi_in.name(i);
    out << "\nlo_in: ";
    for (int i = 0; i < a.lo_in.size(); ++i) out << (i ? " " : "") << a.lo_in.name(i);
    out << "\n";
    for (const auto& i : witness.first) {
        out << "input1: " << a.hi_in.name(i.hi) << " " << a.lo_in.name(i.lo) << "\n";
    }
    for (const auto& i : witness.second) {
        out << "input2: " << a.hi_in.name(i.hi) << " " << a.lo_in.name(i.lo) << "\n";
    }
}

Sem read_sem(std::istream& in) {
    struct PendingVar {
        SemVariable var;
        std::vector<std::string> parent_names;
        std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> rows;
    };
    std::vector<PendingVar> pending;
    std::map<std::string, std::size_t> name_to_pos;

    auto find_var = [&](const std::string& name) -> PendingVar& {
        auto it = name_to_pos.find(name);
        if (it == name_to_pos.end()) throw ParseError("unknown variable '" + name + "'");
        return pending[it->second];
    };

    for (const auto& [key, value] : read_kv_lines(in)) {
        if (key == "var") {
            auto tokens = split_ws(value);
            if (tokens.size() < 3) throw ParseError("var line needs 'name kind value...'");
            PendingVar pv;
            pv.var.name = tokens[0];
            if (tokens[1] == "exo") {
                pv.var.exogenous = true;
            } else if (tokens[1] == "endo") {
                pv.var.exogenous = false;
            } else {
                throw ParseError("variable kind must be 'exo' or 'endo', got '" + tokens[1] + "'");
            }
            pv.var.range.assign(tokens.begin() + 2, tokens.end());
            if (!name_to_pos.emplace(pv.var.name, pending.size()).second) {
                throw ParseError("duplicate variable '" + pv.var.name + "'");
            }
            pending.push_back(std::move(pv));
        } else if (key == "parents") {
            auto tokens = split_ws(value);
            if (tokens.empty()) throw ParseError("parents line needs a variable name");
            auto& pv = find_var(tokens[0]);
            pv.parent_names.assign(tokens.begin() + 1, tokens.end());
        } else if (key == "cpt") {
            auto arrow = value.find("->");
            if (arrow == std::string::npos) throw ParseError("cpt line missing '->'");
            auto lhs = split_ws(trim(value.substr(0, arrow)));
            auto rhs = split_ws(trim(value.substr(arrow + 2)));
            if (lhs.empty()) throw ParseError("cpt line needs a variable name");
            auto& pv = find_var(lhs[0]);
            pv.rows.emplace_back(std::vector<std::string>(lhs.begin() + 1, lhs.end()), rhs);
        } else {
            throw ParseError("unknown key '" + key + "' in sem file");
        }
    }

    std::vector<SemVariable> vars;
    std::map<std::string, int> index;
    for (auto& pv : pending) {
        for (const auto& pname : pv.parent_names) {
            auto it = index.find(pname);
            if (it == index.end()) {
                throw ParseError("variable '" + pv.var.name + "' lists parent '" + pname +
                                 "' that is not declared earlier");
            }
            pv.var.parents.push_back(it->second);
        }
        std::size_t rows = 1;
        for (int p : pv.var.parents) rows *= vars[static_cast<std::size_t>(p)].range.size();
        pv.var.cpt.assign(rows, Distribution<Value>());
        std::vector<bool> seen(rows, false);
        for (const auto& [parent_values, probs] : pv.rows) {
            if (parent_values.size() != pv.var.parents.size()) {
                throw ParseError("cpt row of '" + pv.var.name + "' needs one value per parent");
            }
            int row = 0;
            for (std::size_t j = 0; j < parent_values.size(); ++j) {
                const auto& parent = vars[static_cast<std::size_t>(pv.var.parents[j])];
                auto found = std::find(parent.range.begin(), parent.range.end(), parent_values[j]);
                if (found == parent.range.end()) {
                    throw ParseError("cpt row of '" + pv.var.name + "' uses unknown value '" +
                                     parent_values[j] + "' for parent '" + parent.name + "'");
                }
                row = row * static_cast<int>(parent.range.size()) +
                      static_cast<int>(found - parent.range.begin());
            }
            if (probs.size() != pv.var.range.size()) {
                throw ParseError("cpt row of '" + pv.var.name + "' needs one probability per value");
            }
            if (seen[static_cast<std::size_t>(row)]) {
                throw ParseError("duplicate cpt row for '" + pv.var.name + "'");
            }
            seen[static_cast<std::size_t>(row)] = true;
            Distribution<Value> dist;
            for (std::size_t v = 0; v < probs.size(); ++v) {
                dist.add(static_cast<Value>(v), parse_fraction(probs[v]));
            }
            pv.var.cpt[static_cast<std::size_t>(row)] = std::move(dist);
        }
        for (std::size_t r = 0; r < rows; ++r) {
            if (!seen[r]) throw ParseError("missing cpt row for '" + pv.var.name + "'");
        }
        index.emplace(pv.var.name, static_cast<int>(vars.size()));
        vars.push_back(std::move(pv.var));
    }

    try {
        return Sem(std::move(vars));
    } catch (const ContractError& e) {
        throw ParseError(std::string("invalid sem: ") + e.what());
    }
}

Sem read_sem_file(const std::string& path) {
    auto in = open_input(path);
    return read_sem(in);
}

namespace {

constexpr const char* kResponseHeader =
    "run\tunit\treload\turl\ttext\tcontext\ttreatment\tassignment_index";

}  // namespace

std::map<int, ResponseVector> read_responses(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty response file");
    if (trim(line) != kResponseHeader) throw ParseError("bad response file header");

    struct UnitData {
        UnitResponse response;
        std::string treatment;
    };
    std::map<int, std::map<int, UnitData>> runs;  // run -> assignment index -> data
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_on(line, '\t');
        if (fields.size() != 8) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 8 tab-separated fields");
        }
        const int run = parse_int(fields[0], "run");
        const int reload = parse_int(fields[2], "reload");
        const int index = parse_int(fields[7], "assignment_index");
        auto& unit = runs[run][index];
        unit.treatment = fields[6];
        if (unit.response.sessions.empty()) unit.response.sessions.emplace_back();
        if (fields[3] != "-") {
            AdRecord ad;
            ad.url = fields[3];
            ad.text = fields[4];
            if (fields[5] != "-") ad.context = fields[5];
            unit.response.sessions.front().ads.emplace_back(reload, std::move(ad));
        }
    }

    std::map<int, ResponseVector> out;
    for (auto& [run, units] : runs) {
        ResponseVector vec;
        int expected = 0;
        for (auto& [index, data] : units) {
            if (index != expected) {
                throw ParseError("run " + std::to_string(run) + " is missing assignment index " +
                                 std::to_string(expected));
            }
            ++expected;
            vec.responses.push_back(std::move(data.response));
            vec.treatments.push_back(data.treatment);
        }
        // Group sizes recovered from the treatment labels: the experimental
        // prefix ends where the label changes.
        int n = 0;
        while (n < static_cast<int>(vec.treatments.size()) &&
               vec.treatments[static_cast<std::size_t>(n)] == vec.treatments.front()) {
            ++n;
        }
        if (n == static_cast<int>(vec.treatments.size())) {
            // A single label describes a control-only or degenerate data set;
            // treat it as one experimental group of everything.
            vec.n_experimental = n;
            vec.m_control = 0;
        } else {
            vec.n_experimental = n;
            vec.m_control = static_cast<int>(vec.treatments.size()) - n;
        }
        for (int i = vec.n_experimental; i < vec.size(); ++i) {
            if (vec.treatments[static_cast<std::size_t>(i)] != vec.treatments.back()) {
                throw ParseError("run " + std::to_string(run) +
                                 ": responses are not ordered by treatment group");
            }
        }
        vec.validate();
        out.emplace(run, std::move(vec));
    }
    return out;
}

std::map<int, ResponseVector> read_responses_file(const std::string& path) {
    auto in = open_input(path);
    return read_responses(in);
}

void write_responses(std::ostream& out, int run, const RunResult& result, bool header) {
    if (header) out << kResponseHeader << "\n";
    for (const auto& log : result.logs) {
        bool any = false;
        for (const auto& reload : log.reloads) {
            for (const auto& ad : reload.ads) {
                any = true;
                out << run << '\t' << log.unit_id << '\t' << reload.tick << '\t' << ad.url << '\t'
                    << ad.text << '\t' << (ad.context ? *ad.context : "-") << '\t' << log.treatment
                    << '\t' << log.assignment_index << "\n";
            }
        }
        if (!any) {
            out << run << '\t' << log.unit_id << '\t' << 0 << '\t' << "-" << '\t' << "-" << '\t'
                << "-" << '\t' << log.treatment << '\t' << log.assignment_index << "\n";
        }
    }
}

void write_responses_file(const std::string& path, const std::vector<RunResult>& runs) {
    auto out = open_output(path);
    for (std::size_t r = 0; r < runs.size(); ++r) {
        write_responses(out, static_cast<int>(r), runs[r], r == 0);
    }
}

ExperimentConfig read_experiment_config(std::istream& in) {
    ExperimentConfig config;
    bool have_sample = false;
    for (const auto& [key, value] : read_kv_lines(in)) {
        if (key == "sample_size") {
            config.sample_size = parse_int(value, key);
            have_sample = true;
        } else if (key == "experimental_units") {
            config.n_experimental = parse_int(value, key);
        } else if (key == "control_units") {
            config.m_control = parse_int(value, key);
        } else if (key == "training_ticks") {
            config.training_ticks = parse_int(value, key);
        } else if (key == "reloads_per_unit") {
            config.reloads_per_unit = parse_int(value, key);
        } else if (key == "ads_per_reload") {
            config.ads_per_reload = parse_int(value, key);
        } else if (key == "runs") {
            config.runs = parse_int(value, key);
        } else if (key == "seed") {
            config.seed = parse_u64(value, key);
            config.seed_set = true;
        } else if (key == "experimental_treatment") {
            config.experimental.label = value;
        } else if (key == "experimental_interests") {
            config.experimental.interests = split_ws(value);
        } else if (key == "control_treatment") {
            config.control.label = value;
        } else if (key == "control_interests") {
            config.control.interests = split_ws(value);
        } else if (key == "unit_failure_prob") {
            config.unit_failure_prob = parse_double(value, key);
        } else {
            throw ParseError("unknown key '" + key + "' in experiment config");
        }
    }
    if (!have_sample) throw ParseError("experiment config must set sample_size");
    try {
        config.validate();
    } catch (const ContractError& e) {
        throw ParseError(std::string("invalid experiment config: ") + e.what());
    }
    return config;
}

ExperimentConfig read_experiment_config_file(const std::string& path) {
    auto in = open_input(path);
    return read_experiment_config(in);
}

TrackerSpec read_tracker_spec(std::istream& in) {
    TrackerSpec spec;
    for (const auto& [key, value] : read_kv_lines(in)) {
        if (key == "pool") {
            spec.pools.push_back(AdPool{value, {}});
        } else if (key == "ad") {
            if (spec.pools.empty()) throw ParseError("ad line before any pool");
            auto fields = split_on(value, '|');
            if (fields.size() != 5) {
                throw ParseError("ad line needs 'weight | url | text | context | tags'");
            }
            TrackerAd ad;
            ad.weight = parse_double(trim(fields[0]), "ad weight");
            ad.url = trim(fields[1]);
            ad.text = trim(fields[2]);
            std::string context = trim(fields[3]);
            if (context != "-") ad.context = context;
            std::string tags = trim(fields[4]);
            if (tags != "-") {
                for (const auto& tag : split_on(tags, ',')) {
                    if (!trim(tag).empty()) ad.tags.push_back(trim(tag));
                }
            }
            spec.pools.back().ads.push_back(std::move(ad));
        } else if (key == "schedule") {
            auto tokens = split_ws(value);
            if (tokens.size() != 2) throw ParseError("schedule line needs 'from_tick pool'");
            int pool = -1;
            for (std::size_t i = 0; i < spec.pools.size(); ++i) {
                if (spec.pools[i].name == tokens[1]) pool = static_cast<int>(i);
            }
            if (pool < 0) throw ParseError("schedule references unknown pool '" + tokens[1] + "'");
            spec.schedule.emplace_back(parse_int(tokens[0], "schedule tick"), pool);
        } else if (key == "targeting") {
            if (value == "on") {
                spec.targeting_enabled = true;
            } else if (value == "off") {
                spec.targeting_enabled = false;
            } else {
                throw ParseError("targeting must be 'on' or 'off'");
            }
        } else if (key == "boost") {
            spec.targeting_boost = parse_double(value, key);
        } else if (key == "churn") {
            spec.churn = parse_double(value, key);
        } else if (key == "coupling") {
            spec.coupling = parse_double(value, key);
        } else {
            throw ParseError("unknown key '" + key + "' in tracker spec");
        }
    }
    if (spec.schedule.empty() && !spec.pools.empty()) spec.schedule.emplace_back(0, 0);
    try {
        spec.validate();
    } catch (const ContractError& e) {
        throw ParseError(std::string("invalid tracker spec: ") + e.what());
    }
    return spec;
}

TrackerSpec read_tracker_spec_file(const std::string& path) {
    auto in = open_input(path);
    return read_tracker_spec(in);
}

KeywordSpec read_keywords(std::istream& in) {
    KeywordSpec spec;
    std::string current;
    for (const auto& [key, value] : read_kv_lines(in)) {
        if (key == "treatment") {
            current = value;
            spec.keywords_by_treatment[current];
        } else if (key == "keyword") {
            if (current.empty()) throw ParseError("keyword line before any treatment");
            spec.keywords_by_treatment[current].push_back(value);
        } else if (key == "contextual") {
            if (current.empty()) throw ParseError("contextual line before any treatment");
            spec.contextual_by_treatment[current].push_back(value);
        } else {
            throw ParseError("unknown key '" + key + "' in keywords file");
        }
    }
    return spec;
}

KeywordSpec read_keywords_file(const std::string& path) {
    auto in = open_input(path);
    return read_keywords(in);
}

PvalueMatrix read_matrix(std::istream& in) {
    PvalueMatrix matrix;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty matrix file");
    auto header = split_on(trim(line), '\t');
    if (header.empty() || header[0] != "data_set") {
        throw ParseError("matrix header must start with 'data_set'");
    }
    matrix.analysis_names.assign(header.begin() + 1, header.end());
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_on(line, '\t');
        if (fields.size() != header.size()) {
            throw ParseError("matrix line " + std::to_string(line_no) + " has wrong column count");
        }
        std::vector<double> row;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            if (fields[i] == "failed") {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
            } else {
                row.push_back(parse_double(fields[i], "p-value"));
            }
        }
        matrix.p.push_back(std::move(row));
    }
    return matrix;
}

PvalueMatrix read_matrix_file(const std::string& path) {
    auto in = open_input(path);
    return read_matrix(in);
}

void write_matrix(std::ostream& out, const PvalueMatrix& matrix) {
    out << "data_set";
    for (const auto& name : matrix.analysis_names) out << '\t' << name;
    out << "\n";
    for (std::size_t run = 0; run < matrix.p.size(); ++run) {
        out << (run + 1);
        for (double p : matrix.p[run]) {
            if (std::isnan(p)) {
                out << '\t' << "failed";
            } else {
                out << '\t' << std::setprecision(6) << std::fixed << p;
            }
        }
        out << "\n";
    }
    out.unsetf(std::ios::fixed);
}

void write_matrix_file(const std::string& path, const PvalueMatrix& matrix) {
    auto out = open_output(path);
    write_matrix(out, matrix);
}

}  // namespace iflow
