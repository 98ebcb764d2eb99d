#include "iflow/tracker.hpp"

#include <algorithm>

#include "iflow/errors.hpp"

namespace iflow {

void TrackerSpec::validate() const {
    if (pools.empty()) throw ContractError("tracker needs at least one ad pool");
    for (const auto& pool : pools) {
        for (const auto& ad : pool.ads) {
            if (ad.url.empty()) throw ContractError("ad with empty url in pool '" + pool.name + "'");
            if (ad.weight < 0) throw ContractError("negative ad weight in pool '" + pool.name + "'");
        }
    }
    if (schedule.empty()) throw ContractError("tracker needs a pool schedule");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule[i].second < 0 || schedule[i].second >= static_cast<int>(pools.size())) {
            throw ContractError("schedule references an unknown pool");
        }
        if (i > 0 && schedule[i].first <= schedule[i - 1].first) {
            throw ContractError("schedule ticks must be strictly increasing");
        }
    }
    if (schedule.front().first != 0) throw ContractError("schedule must start at tick 0");
    if (targeting_boost <= 0) throw ContractError("targeting boost must be positive");
    if (churn < 0 || churn > 1) throw ContractError("churn must lie in [0, 1]");
    if (coupling < 0) throw ContractError("coupling must be nonnegative");
}

Tracker::Tracker(TrackerSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

void Tracker::reset() {
    profiles_.clear();
    impressions_.clear();
}

void Tracker::record_interest(int unit, const std::string& keyword) {
    profiles_[unit].insert(keyword);
}

const std::set<std::string>& Tracker::profile(int unit) const {
    static const std::set<std::string> empty;
    auto it = profiles_.find(unit);
    return it == profiles_.end() ? empty : it->second;
}

int Tracker::pool_at(int tick) const {
    int pool = spec_.schedule.front().second;
    for (const auto& [from, index] : spec_.schedule) {
        if (from <= tick) pool = index;
    }
    return pool;
}

std::vector<AdRecord> Tracker::serve(int unit, int tick, int count, Rng& rng) {
    const AdPool& pool = spec_.pools[static_cast<std::size_t>(pool_at(tick))];
    if (pool.ads.empty()) throw TrackerFault("pool '" + pool.name + "' has no inventory");

    const std::set<std::string>& interests = profile(unit);

    std::vector<double> weights(pool.ads.size());
    double total = 0;
    for (std::size_t i = 0; i < pool.ads.size(); ++i) {
        const TrackerAd& ad = pool.ads[i];
        double w = ad.weight;
        if (spec_.targeting_enabled && !interests.empty()) {
            for (const auto& tag : ad.tags) {
                if (interests.count(tag)) {
                    w *= spec_.targeting_boost;
                    break;
                }
            }
        }
        if (spec_.coupling > 0) {
            auto it = impressions_.find(ad.url);
            if (it != impressions_.end()) {
                // Super-linear reinforcement: shared impression counts snowball,
                // so parallel units collapse onto the same trending ads while a
                // lone unit's weaker feedback keeps its draws spread out.
                const double n = static_cast<double>(it->second);
                w *= 1.0 + spec_.coupling * n * n;
            }
        }
        weights[i] = w;
        total += w;
    }
    if (total <= 0) throw TrackerFault("pool '" + pool.name + "' has no servable weight");

    std::vector<AdRecord> served;
    served.reserve(static_cast<std::size_t>(count));
    for (int slot = 0; slot < count; ++slot) {
        std::size_t pick = 0;
        if (spec_.churn > 0 && rng.unit() < spec_.churn) {
            pick = static_cast<std::size_t>(rng.below(pool.ads.size()));
        } else {
            double target = rng.unit() * total;
            double acc = 0;
            for (std::size_t i = 0; i < pool.ads.size(); ++i) {
                acc += weights[i];
                pick = i;
                if (target < acc) break;
            }
        }
        const TrackerAd& ad = pool.ads[pick];
        ++impressions_[ad.url];
        served.push_back(AdRecord{ad.url, ad.text, ad.context});
    }
    return served;
}

}  // namespace iflow
