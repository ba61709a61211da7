#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace ruletensor {

/// Dense row-major 2-D array. Small and deliberately minimal: rule weight
/// matrices and feature batches are tiny-to-moderate and always dense.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int rows, int cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    T& operator()(int r, int c) {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[static_cast<size_t>(r) * cols_ + c];
    }
    const T& operator()(int r, int c) const {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[static_cast<size_t>(r) * cols_ + c];
    }

    T* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    const T* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool operator==(const Grid&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

using Matrix = Grid<double>;
using Mask = Grid<uint8_t>;

}  // namespace ruletensor
