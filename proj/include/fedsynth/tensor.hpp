#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedsynth {

/// Dense row-major matrix of doubles.
class Tensor2 {
public:
    Tensor2() = default;
    Tensor2(std::size_t rows, std::size_t cols);
    Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double value);
    bool all_finite() const;

    bool operator==(const Tensor2& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// C = A * B. A is n x k, B is k x m.
Tensor2 matmul_nn(const Tensor2& a, const Tensor2& b);
/// C = A * B^T. A is n x k, B is m x k.
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);
/// C = A^T * B. A is n x k, B is n x m.
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);

/// Adds `bias` (length = cols) to every row of `m` in place.
void add_row_vector(Tensor2& m, std::span<const double> bias);

/// Horizontal concatenation [A | B]; row counts must match.
Tensor2 hconcat(const Tensor2& a, const Tensor2& b);

/// First `n` columns of `m` as a copy.
Tensor2 left_columns(const Tensor2& m, std::size_t n);

/// One-hot rows; labels must be in [0, width).
Tensor2 one_hot(std::span<const int> labels, std::size_t width);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace fedsynth
