#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iflow/distribution.hpp"
#include "iflow/errors.hpp"

namespace iflow {

struct AdRecord {
    std::string url;
    std::string text;
    std::optional<std::string> context;
};

// Ads observed during one session, tagged with the page reload that produced
// them. Reload indices are unique within a unit.
struct Session {
    std::vector<std::pair<int, AdRecord>> ads;
};

// Outcome of one experimental unit: either a list of sessions of ads or a
// bare scalar.
struct UnitResponse {
    std::vector<Session> sessions;
    std::optional<double> scalar;

    std::vector<const AdRecord*> all_ads() const;
    // Number of distinct reloads in which each URL appeared.
    std::map<std::string, int> url_reload_counts() const;
};

// Per-unit responses ordered by the random assignment indices: the first n
// slots received the experimental treatment, the remaining m the control.
struct ResponseVector {
    std::vector<UnitResponse> responses;
    int n_experimental = 0;
    int m_control = 0;
    std::vector<std::string> treatments;  // slot metadata, same length as responses

    int size() const { return static_cast<int>(responses.size()); }
    void validate() const;
};

// Zero-copy reordering of a ResponseVector; what a test statistic evaluates.
class ResponseView {
  public:
    ResponseView(const ResponseVector& base, std::vector<int> order);
    static ResponseView identity(const ResponseVector& base);

    int size() const { return static_cast<int>(order_.size()); }
    int n() const { return base_->n_experimental; }
    int m() const { return base_->m_control; }
    const UnitResponse& operator[](int i) const {
        return base_->responses[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
    }
    const ResponseVector& base() const { return *base_; }
    const std::vector<int>& order() const { return order_; }

  private:
    const ResponseVector* base_;
    std::vector<int> order_;
};

struct TestStatistic {
    std::string name;
    // Invariant under reorderings within each group when set; required by the
    // partition method.
    bool group_symmetric = false;
    std::function<double(const ResponseView&)> evaluate;
};

double evaluate_observed(const TestStatistic& stat, const ResponseVector& y);

enum class Tail { Leq, Geq, TwoSided };
enum class Method { Auto, Exact, Partition, MonteCarlo };

struct PermutationResult {
    double p = 1.0;
    std::uint64_t successes = 0;   // comparisons counted in favor of the null
    std::uint64_t comparisons = 0;
    Method method = Method::Exact;
    std::optional<double> mc_stderr;

    Rational p_exact() const { return Rational(successes, comparisons); }
};

struct PermutationOptions {
    Method method = Method::Auto;
    Tail tail = Tail::Leq;
    std::uint64_t exact_budget = 10'000'000;  // max |y|! for the exact method
    std::uint64_t mc_samples = 100'000;
    std::optional<std::uint64_t> seed;  // mandatory for Monte Carlo
};

// Compares the observed statistic against its value under relabelings.
//   exact:       all |y|! permutations (includes the identity, so p >= 1/|y|!)
//   partition:   all C(n+m, n) assignments of responses to the experimental
//                slots; valid only for group-symmetric statistics, where it
//                equals the exact method
//   monte-carlo: the identity plus mc_samples-1 uniformly sampled
//                permutations, with the binomial standard error reported
PermutationResult permutation_test(const TestStatistic& stat, const ResponseVector& y,
                                   const PermutationOptions& options = {});

// Negated cosine similarity of the two groups' averaged URL/reload-count
// vectors over the union of all URLs; counts pass through ln(1 + c). A group
// averaging to the zero vector compares as maximally dissimilar (similarity
// 0). Group-symmetric.
TestStatistic stat_sim();

// Number of keyword-matching ads in the experimental slots minus the number
// in the control slots. Matching is a lowercase substring search over the
// concatenated ad text and URL. Group-symmetric.
TestStatistic stat_kw(std::vector<std::string> keywords);

// True when the ad is contextual relative to the treatment under study.
using ContextOracle = std::function<bool(const AdRecord&)>;

// Percentage of sessions containing a non-contextual keyword ad, experimental
// range minus control range, each range normalized by its own session count.
// Group-symmetric.
TestStatistic stat_prc(std::vector<std::string> keywords, ContextOracle is_contextual);

// 1 when the first response contains the nonce, else 0. Not group-symmetric.
TestStatistic stat_nonce(std::string nonce);

// Closed form for the nonce statistic's one-tailed permutation p-value:
// count(y, nonce) / |y|. Requires the nonce to be present in the observed
// first slot; the statistic degenerates otherwise.
Rational nonce_p_closed(const ResponseVector& y, const std::string& nonce);

// Lowercase substring match of any keyword against the concatenated ad text
// and URL; the single matching convention used by every keyword-based path.
bool ad_contains(const AdRecord& ad, const std::vector<std::string>& keywords);

bool response_contains(const UnitResponse& response, const std::string& token);

struct Chi2Result {
    double chi2 = 0.0;
    double p = 1.0;
};

// Classical 2x2 chi-squared statistic (one degree of freedom), without
// continuity correction unless `yates` is set. All marginals must be positive.
Chi2Result chi2_2x2(const std::array<std::array<std::uint64_t, 2>, 2>& table, bool yates = false);

// Benjamini-Hochberg step-up at level q; flags are in input order.
std::vector<bool> bh_fdr(const std::vector<double>& p_values, double q);

// Finite family of conditional distributions with a weighting over the
// conditions. Verifies that "some pair of conditionals differs" and "some
// conditional differs from the weighted marginal" have the same truth value.
struct ConditionalFamily {
    std::vector<Distribution<int>> conditionals;
    std::vector<Rational> weights;
};

struct IndependenceEquality {
    bool pair_differs = false;
    bool deviates_from_marginal = false;

    bool biconditional_holds() const { return pair_differs == deviates_from_marginal; }
};

IndependenceEquality independence_equals_equality(const ConditionalFamily& family);

}  // namespace iflow
