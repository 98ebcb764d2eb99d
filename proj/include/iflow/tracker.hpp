#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iflow/rng.hpp"
#include "iflow/stats.hpp"

namespace iflow {

struct TrackerAd {
    std::string url;
    std::string text;
    double weight = 1.0;
    std::optional<std::string> context;
    std::vector<std::string> tags;  // interest keywords this ad targets
};

struct AdPool {
    std::string name;
    std::vector<TrackerAd> ads;
};

// Knobs of the simulated ad server. With targeting disabled the served
// distribution never reads the per-unit profiles, so the tracker is
// noninterfering by construction.
struct TrackerSpec {
    std::vector<AdPool> pools;
    // (from_tick, pool index) pairs sorted by tick; the active pool for a
    // request is the last entry at or before the request's tick.
    std::vector<std::pair<int, int>> schedule;
    bool targeting_enabled = false;
    double targeting_boost = 1.0;  // weight multiplier for ads tagged with a unit interest
    double churn = 0.0;            // per-slot probability of a uniform draw from the pool
    double coupling = 0.0;         // shared popularity feedback strength across units

    void validate() const;
};

// Stateful simulated ad server. All mutation happens through serve() and
// record_interest(), which the experiment driver serializes per logical tick.
class Tracker {
  public:
    explicit Tracker(TrackerSpec spec);

    const TrackerSpec& spec() const { return spec_; }

    void reset();
    void record_interest(int unit, const std::string& keyword);
    const std::set<std::string>& profile(int unit) const;

    // Draws `count` ads for the unit at the given tick. Throws TrackerFault
    // when the active pool has no servable inventory.
    std::vector<AdRecord> serve(int unit, int tick, int count, Rng& rng);

  private:
    int pool_at(int tick) const;

    TrackerSpec spec_;
    std::map<int, std::set<std::string>> profiles_;
    std::map<std::string, std::uint64_t> impressions_;  // shared across units
};

}  // namespace iflow
