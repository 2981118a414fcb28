#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace revar {

/// Random engine used for every simulation stream.
using Rng = std::mt19937_64;

/// Dense row-major table indexed by (state, action).
class SaTable {
public:
    SaTable() = default;
    SaTable(std::size_t states, std::size_t actions, double fill = 0.0)
        : states_(states), actions_(actions), data_(states * actions, fill) {}

    double& operator()(std::size_t s, std::size_t a) { return data_[s * actions_ + a]; }
    double operator()(std::size_t s, std::size_t a) const { return data_[s * actions_ + a]; }

    std::span<double> row(std::size_t s) { return {data_.data() + s * actions_, actions_}; }
    std::span<const double> row(std::size_t s) const {
        return {data_.data() + s * actions_, actions_};
    }

    std::size_t states() const { return states_; }
    std::size_t actions() const { return actions_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const SaTable&) const = default;

private:
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> data_;
};

} // namespace revar
