#pragma once

#include <cmath>
#include <map>
#include <utility>

#include "iflow/rational.hpp"

namespace iflow {

// Finite distribution with exact rational masses. Zero-mass entries are never
// stored, so exact equality of supports is structural equality.
template <class T>
class Distribution {
  public:
    Distribution() = default;

    static Distribution point(T value) {
        Distribution d;
        d.mass_.emplace(std::move(value), Rational(1));
        return d;
    }

    void add(const T& value, const Rational& p) {
        if (p == 0) return;
        auto [it, inserted] = mass_.emplace(value, p);
        if (!inserted) {
            it->second += p;
            if (it->second == 0) mass_.erase(it);
        }
    }

    Rational mass(const T& value) const {
        auto it = mass_.find(value);
        return it == mass_.end() ? Rational(0) : it->second;
    }

    const std::map<T, Rational>& support() const { return mass_; }
    bool empty() const { return mass_.empty(); }
    std::size_t size() const { return mass_.size(); }

    Rational total() const {
        Rational t(0);
        for (const auto& [v, p] : mass_) t += p;
        return t;
    }

    bool is_normalized() const { return total() == 1; }

    bool operator==(const Distribution& other) const = default;

    // Tolerance-based comparison for the opt-in float mode.
    bool approx_equals(const Distribution& other, double tol) const {
        for (const auto& [v, p] : mass_) {
            if (std::abs(to_double(p - other.mass(v))) > tol) return false;
        }
        for (const auto& [v, p] : other.mass_) {
            if (mass_.find(v) == mass_.end() && std::abs(to_double(p)) > tol) return false;
        }
        return true;
    }

    template <class F>
    auto pushforward(F&& f) const {
        using U = std::decay_t<decltype(f(std::declval<const T&>()))>;
        Distribution<U> out;
        for (const auto& [v, p] : mass_) out.add(f(v), p);
        return out;
    }

  private:
    std::map<T, Rational> mass_;
};

}  // namespace iflow
