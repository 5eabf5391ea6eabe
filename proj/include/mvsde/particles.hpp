#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace mvsde {

/// Row-major N x d array of particle states.
class ParticleStates {
public:
    ParticleStates() = default;

    ParticleStates(std::size_t count, std::size_t dim, double fill = 0.0)
        : count_(count), dim_(dim), data_(count * dim, fill) {}

    ParticleStates(std::size_t count, std::size_t dim, std::vector<double> data)
        : count_(count), dim_(dim), data_(std::move(data)) {
        assert(data_.size() == count_ * dim_);
    }

    /// N particles all placed at the same point.
    static ParticleStates replicate(std::size_t count, std::span<const double> point) {
        ParticleStates out(count, point.size());
        for (std::size_t i = 0; i < count; ++i) {
            auto row = out.row(i);
            for (std::size_t c = 0; c < point.size(); ++c) row[c] = point[c];
        }
        return out;
    }

    std::size_t count() const noexcept { return count_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return count_ == 0; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * dim_, dim_};
    }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    /// First `count` particles as a new array.
    ParticleStates head(std::size_t count) const {
        assert(count <= count_);
        return {count, dim_,
                std::vector<double>(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(count * dim_))};
    }

    friend bool operator==(const ParticleStates&, const ParticleStates&) = default;

private:
    std::size_t count_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

}  // namespace mvsde
