#include "iflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "iflow/rng.hpp"

namespace iflow {

std::vector<const AdRecord*> UnitResponse::all_ads() const {
    std::vector<const AdRecord*> out;
    for (const auto& session : sessions) {
        for (const auto& [reload, ad] : session.ads) out.push_back(&ad);
    }
    return out;
}

std::map<std::string, int> UnitResponse::url_reload_counts() const {
    std::map<std::string, std::set<int>> reloads;
    for (const auto& session : sessions) {
        for (const auto& [reload, ad] : session.ads) reloads[ad.url].insert(reload);
    }
    std::map<std::string, int> counts;
    for (const auto& [url, set] : reloads) counts[url] = static_cast<int>(set.size());
    return counts;
}

void ResponseVector::validate() const {
    if (n_experimental < 0 || m_control < 0) throw ContractError("negative group size");
    if (n_experimental + m_control != size()) {
        throw ContractError("group sizes must add up to the number of responses");
    }
    if (!treatments.empty() && static_cast<int>(treatments.size()) != size()) {
        throw ContractError("treatment labels must match the number of responses");
    }
}

ResponseView::ResponseView(const ResponseVector& base, std::vector<int> order)
    : base_(&base), order_(std::move(order)) {
    if (static_cast<int>(order_.size()) != base.size()) {
        throw ContractError("view order must cover every response");
    }
}

ResponseView ResponseView::identity(const ResponseVector& base) {
    std::vector<int> order(static_cast<std::size_t>(base.size()));
    std::iota(order.begin(), order.end(), 0);
    return ResponseView(base, std::move(order));
}

double evaluate_observed(const TestStatistic& stat, const ResponseVector& y) {
    return stat.evaluate(ResponseView::identity(y));
}

namespace {

std::uint64_t factorial_capped(int n, std::uint64_t cap) {
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) {
        if (f > cap / static_cast<std::uint64_t>(i)) return UINT64_MAX;
        f *= static_cast<std::uint64_t>(i);
    }
    return f;
}

std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        if (r > (std::uint64_t{1} << 50)) return UINT64_MAX;
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    }
    return r;
}

bool counts_against_rejection(double observed, double permuted, Tail tail) {
    switch (tail) {
        case Tail::Leq: return observed <= permuted;
        case Tail::Geq: return observed >= permuted;
        case Tail::TwoSided: return std::abs(observed) <= std::abs(permuted);
    }
    return true;
}

PermutationResult exact_test(const TestStatistic& stat, const ResponseVector& y, Tail tail) {
    const int n = y.size();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const double observed = stat.evaluate(ResponseView(y, order));

    PermutationResult result;
    result.method = Method::Exact;
    do {
        ++result.comparisons;
        const double value = stat.evaluate(ResponseView(y, order));
        if (counts_against_rejection(observed, value, tail)) ++result.successes;
    } while (std::next_permutation(order.begin(), order.end()));
    result.p = static_cast<double>(result.successes) / static_cast<double>(result.comparisons);
    return result;
}

PermutationResult partition_test(const TestStatistic& stat, const ResponseVector& y, Tail tail) {
    const int total = y.size();
    const int n = y.n_experimental;
    const double observed = stat.evaluate(ResponseView::identity(y));

    PermutationResult result;
    result.method = Method::Partition;

    // Combinations of `total` choose `n` in lexicographic order; the chosen
    // indices fill the experimental slots, the complement the control slots.
    std::vector<int> chosen(static_cast<std::size_t>(n));
    std::iota(chosen.begin(), chosen.end(), 0);
    std::vector<int> order(static_cast<std::size_t>(total));
    std::vector<bool> in_chosen(static_cast<std::size_t>(total));

    auto emit = [&]() {
        std::fill(in_chosen.begin(), in_chosen.end(), false);
        for (int c : chosen) in_chosen[static_cast<std::size_t>(c)] = true;
        int at = 0;
        for (int i = 0; i < total; ++i) {
            if (in_chosen[static_cast<std::size_t>(i)]) order[static_cast<std::size_t>(at++)] = i;
        }
        for (int i = 0; i < total; ++i) {
            if (!in_chosen[static_cast<std::size_t>(i)]) order[static_cast<std::size_t>(at++)] = i;
        }
        ++result.comparisons;
        const double value = stat.evaluate(ResponseView(y, order));
        if (counts_against_rejection(observed, value, tail)) ++result.successes;
    };

    if (n == 0 || n == total) {
        emit();
    } else {
        while (true) {
            emit();
            int i = n - 1;
            while (i >= 0 && chosen[static_cast<std::size_t>(i)] == total - n + i) --i;
            if (i < 0) break;
            ++chosen[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < n; ++j) {
                chosen[static_cast<std::size_t>(j)] = chosen[static_cast<std::size_t>(j - 1)] + 1;
            }
        }
    }
    result.p = static_cast<double>(result.successes) / static_cast<double>(result.comparisons);
    return result;
}

PermutationResult monte_carlo_test(const TestStatistic& stat, const ResponseVector& y, Tail tail,
                                   std::uint64_t samples, std::uint64_t seed) {
    if (samples < 2) throw ContractError("monte-carlo needs at least 2 samples");
    const int n = y.size();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const double observed = stat.evaluate(ResponseView(y, order));

    PermutationResult result;
    result.method = Method::MonteCarlo;
    result.comparisons = samples;
    result.successes = 1;  // the identity permutation

    Rng rng(seed);
    for (std::uint64_t s = 1; s < samples; ++s) {
        rng.shuffle(order);
        const double value = stat.evaluate(ResponseView(y, order));
        if (counts_against_rejection(observed, value, tail)) ++result.successes;
    }
    result.p = static_cast<double>(result.successes) / static_cast<double>(result.comparisons);
    result.mc_stderr =
        std::sqrt(result.p * (1.0 - result.p) / static_cast<double>(result.comparisons));
    return result;
}

}  // namespace

PermutationResult permutation_test(const TestStatistic& stat, const ResponseVector& y,
                                   const PermutationOptions& options) {
    y.validate();
    if (y.size() < 2) throw ContractError("permutation test needs at least 2 responses");

    Method method = options.method;
    if (method == Method::Auto) {
        if (factorial_capped(y.size(), options.exact_budget) != UINT64_MAX) {
            method = Method::Exact;
        } else if (stat.group_symmetric) {
            method = Method::Partition;
        } else {
            method = Method::MonteCarlo;
        }
    }

    switch (method) {
        case Method::Exact: {
            if (factorial_capped(y.size(), options.exact_budget) == UINT64_MAX) {
                throw BudgetError("exact permutation test over budget for " +
                                      std::to_string(y.size()) + " responses",
                                  UINT64_MAX);
            }
            return exact_test(stat, y, options.tail);
        }
        case Method::Partition: {
            if (!stat.group_symmetric) {
                throw ContractError("partition method requires a group-symmetric statistic");
            }
            if (binomial(y.size(), y.n_experimental) > options.exact_budget) {
                throw BudgetError("partition enumeration over budget", binomial(y.size(), y.n_experimental));
            }
            return partition_test(stat, y, options.tail);
        }
        case Method::MonteCarlo: {
            if (!options.seed) {
                throw ContractError("monte-carlo method requires an explicit seed");
            }
            return monte_carlo_test(stat, y, options.tail, options.mc_samples, *options.seed);
        }
        case Method::Auto: break;
    }
    throw ContractError("unreachable permutation method");
}

namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool ad_matches(const AdRecord& ad, const std::vector<std::string>& lowered_keywords) {
    const std::string haystack = lowercase(ad.text + ad.url);
    for (const auto& kw : lowered_keywords) {
        if (haystack.find(kw) != std::string::npos) return true;
    }
    return false;
}

std::vector<std::string> lower_all(std::vector<std::string> keywords) {
    for (auto& k : keywords) k = lowercase(k);
    return keywords;
}

}  // namespace

bool ad_contains(const AdRecord& ad, const std::vector<std::string>& keywords) {
    return ad_matches(ad, lower_all(keywords));
}

TestStatistic stat_sim() {
    TestStatistic stat;
    stat.name = "sim";
    stat.group_symmetric = true;
    stat.evaluate = [](const ResponseView& y) {
        // URL universe over the whole vector; fixed under permutations.
        std::set<std::string> urls;
        std::vector<std::map<std::string, int>> counts(static_cast<std::size_t>(y.size()));
        for (int i = 0; i < y.size(); ++i) {
            counts[static_cast<std::size_t>(i)] = y[i].url_reload_counts();
            for (const auto& [url, c] : counts[static_cast<std::size_t>(i)]) urls.insert(url);
        }

        // Integer component sums keep group aggregation independent of unit
        // order; division and the log transform happen once per component.
        auto group_vector = [&](int from, int to) {
            std::vector<double> vec;
            vec.reserve(urls.size());
            const int width = to - from;
            for (const auto& url : urls) {
                long long sum = 0;
                for (int i = from; i < to; ++i) {
                    auto it = counts[static_cast<std::size_t>(i)].find(url);
                    if (it != counts[static_cast<std::size_t>(i)].end()) sum += it->second;
                }
                const double avg = width > 0 ? static_cast<double>(sum) / width : 0.0;
                vec.push_back(std::log1p(avg));
            }
            return vec;
        };

        const auto a = group_vector(0, y.n());
        const auto b = group_vector(y.n(), y.n() + y.m());
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        // An all-zero side has no direction; treat it as maximally dissimilar.
        const double sim = (na == 0 || nb == 0) ? 0.0 : dot / (std::sqrt(na) * std::sqrt(nb));
        return -sim;
    };
    return stat;
}

TestStatistic stat_kw(std::vector<std::string> keywords) {
    if (keywords.empty()) throw ContractError("keyword statistic needs at least one keyword");
    auto lowered = lower_all(std::move(keywords));
    TestStatistic stat;
    stat.name = "kw";
    stat.group_symmetric = true;
    stat.evaluate = [lowered](const ResponseView& y) {
        long long diff = 0;
        for (int i = 0; i < y.size(); ++i) {
            long long hits = 0;
            for (const AdRecord* ad : y[i].all_ads()) {
                if (ad_matches(*ad, lowered)) ++hits;
            }
            diff += (i < y.n()) ? hits : -hits;
        }
        return static_cast<double>(diff);
    };
    return stat;
}

TestStatistic stat_prc(std::vector<std::string> keywords, ContextOracle is_contextual) {
    if (keywords.empty()) throw ContractError("prc statistic needs at least one keyword");
    if (!is_contextual) throw ContractError("prc statistic needs a context oracle");
    auto lowered = lower_all(std::move(keywords));
    TestStatistic stat;
    stat.name = "prc";
    stat.group_symmetric = true;
    stat.evaluate = [lowered, is_contextual](const ResponseView& y) {
        auto prc = [&](int from, int to) {
            long long sessions = 0;
            long long hits = 0;
            for (int i = from; i < to; ++i) {
                for (const auto& session : y[i].sessions) {
                    ++sessions;
                    for (const auto& [reload, ad] : session.ads) {
                        if (ad_matches(ad, lowered) && !is_contextual(ad)) {
                            ++hits;
                            break;
                        }
                    }
                }
            }
            if (sessions == 0) throw ContractError("prc statistic saw a range with no sessions");
            return 100.0 * static_cast<double>(hits) / static_cast<double>(sessions);
        };
        return prc(0, y.n()) - prc(y.n(), y.n() + y.m());
    };
    return stat;
}

bool response_contains(const UnitResponse& response, const std::string& token) {
    const std::vector<std::string> lowered = {lowercase(token)};
    for (const AdRecord* ad : response.all_ads()) {
        if (ad_matches(*ad, lowered)) return true;
    }
    // Scalar responses carry no ads; the token cannot appear in them.
    return false;
}

TestStatistic stat_nonce(std::string nonce) {
    if (nonce.empty()) throw ContractError("nonce token must be non-empty");
    TestStatistic stat;
    stat.name = "nonce";
    stat.group_symmetric = false;
    stat.evaluate = [nonce](const ResponseView& y) {
        return response_contains(y[0], nonce) ? 1.0 : 0.0;
    };
    return stat;
}

Rational nonce_p_closed(const ResponseVector& y, const std::string& nonce) {
    y.validate();
    if (y.size() < 1) throw ContractError("nonce closed form needs at least 1 response");
    if (!response_contains(y.responses.front(), nonce)) {
        throw ContractError(
            "nonce closed form requires the nonce in the observed first response; "
            "without it the statistic is degenerate and the test returns 1");
    }
    int count = 0;
    for (const auto& r : y.responses) {
        if (response_contains(r, nonce)) ++count;
    }
    return Rational(count, y.size());
}

Chi2Result chi2_2x2(const std::array<std::array<std::uint64_t, 2>, 2>& table, bool yates) {
    const double a = static_cast<double>(table[0][0]);
    const double b = static_cast<double>(table[0][1]);
    const double c = static_cast<double>(table[1][0]);
    const double d = static_cast<double>(table[1][1]);
    const double total = a + b + c + d;
    const double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
        throw ContractError("chi-squared table has a zero marginal");
    }
    double delta = std::abs(a * d - b * c);
    if (yates) delta = std::max(0.0, delta - total / 2.0);
    Chi2Result result;
    result.chi2 = total * delta * delta / (r1 * r2 * c1 * c2);
    // Survival function of the chi-squared distribution with one degree of
    // freedom.
    result.p = std::erfc(std::sqrt(result.chi2 / 2.0));
    return result;
}

std::vector<bool> bh_fdr(const std::vector<double>& p_values, double q) {
    const std::size_t m = p_values.size();
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw ContractError("p-values must lie in [0, 1]");
    }
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    double threshold = -1.0;
    for (std::size_t k = m; k >= 1; --k) {
        if (p_values[idx[k - 1]] <= q * static_cast<double>(k) / static_cast<double>(m)) {
            threshold = p_values[idx[k - 1]];
            break;
        }
    }
    std::vector<bool> flags(m, false);
    if (threshold >= 0.0) {
        for (std::size_t i = 0; i < m; ++i) flags[i] = p_values[i] <= threshold;
    }
    return flags;
}

IndependenceEquality independence_equals_equality(const ConditionalFamily& family) {
    if (family.conditionals.empty()) throw ContractError("empty conditional family");
    if (family.weights.size() != family.conditionals.size()) {
        throw ContractError("weights must match the number of conditions");
    }
    Rational total(0);
    for (const auto& w : family.weights) {
        if (w < 0) throw ContractError("negative condition weight");
        total += w;
    }
    if (total != 1) throw ContractError("condition weights must sum to 1");
    for (const auto& d : family.conditionals) {
        if (!d.is_normalized()) throw ContractError("conditional distribution not normalized");
    }

    Distribution<int> marginal;
    for (std::size_t i = 0; i < family.conditionals.size(); ++i) {
        for (const auto& [v, p] : family.conditionals[i].support()) {
            marginal.add(v, p * family.weights[i]);
        }
    }

    IndependenceEquality result;
    for (std::size_t i = 0; i < family.conditionals.size() && !result.pair_differs; ++i) {
        for (std::size_t j = i + 1; j < family.conditionals.size(); ++j) {
            if (family.conditionals[i] != family.conditionals[j]) {
                result.pair_differs = true;
                break;
            }
        }
    }
    for (const auto& d : family.conditionals) {
        if (d != marginal) {
            result.deviates_from_marginal = true;
            break;
        }
    }
    return result;
}

}  // namespace iflow
