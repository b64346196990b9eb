#include "fedsynth/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsynth {

Tensor2::Tensor2(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("Tensor2: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    }
}

void Tensor2::fill(double value) {
    for (double& x : data_) x = value;
}

bool Tensor2::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

namespace {

void check_inner(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string("matmul: inner dimensions disagree in ") + what +
                                    ": " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

}  // namespace

Tensor2 matmul_nn(const Tensor2& a, const Tensor2& b) {
    check_inner(a.cols(), b.rows(), "A*B");
    Tensor2 c(a.rows(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c.row(i).data();
        for (std::size_t t = 0; t < k; ++t) {
            const double av = a.at(i, t);
            const double* brow = b.row(t).data();
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
    check_inner(a.cols(), b.cols(), "A*B^T");
    Tensor2 c(a.rows(), b.rows());
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.row(i).data();
        for (std::size_t j = 0; j < m; ++j) {
            const double* brow = b.row(j).data();
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += arow[t] * brow[t];
            c.at(i, j) = s;
        }
    }
    return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
    check_inner(a.rows(), b.rows(), "A^T*B");
    Tensor2 c(a.cols(), b.cols());
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a.row(i).data();
        const double* brow = b.row(i).data();
        for (std::size_t t = 0; t < k; ++t) {
            const double av = arow[t];
            double* crow = c.row(t).data();
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

void add_row_vector(Tensor2& m, std::span<const double> bias) {
    if (bias.size() != m.cols()) {
        throw std::invalid_argument("add_row_vector: bias length " + std::to_string(bias.size()) +
                                    " != cols " + std::to_string(m.cols()));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* row = m.row(i).data();
        for (std::size_t j = 0; j < bias.size(); ++j) row[j] += bias[j];
    }
}

Tensor2 hconcat(const Tensor2& a, const Tensor2& b) {
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("hconcat: row counts differ: " + std::to_string(a.rows()) +
                                    " vs " + std::to_string(b.rows()));
    }
    Tensor2 c(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto dst = c.row(i);
        auto ra = a.row(i);
        auto rb = b.row(i);
        for (std::size_t j = 0; j < ra.size(); ++j) dst[j] = ra[j];
        for (std::size_t j = 0; j < rb.size(); ++j) dst[ra.size() + j] = rb[j];
    }
    return c;
}

Tensor2 left_columns(const Tensor2& m, std::size_t n) {
    if (n > m.cols()) {
        throw std::invalid_argument("left_columns: " + std::to_string(n) + " > cols " +
                                    std::to_string(m.cols()));
    }
    Tensor2 c(m.rows(), n);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto src = m.row(i);
        auto dst = c.row(i);
        for (std::size_t j = 0; j < n; ++j) dst[j] = src[j];
    }
    return c;
}

Tensor2 one_hot(std::span<const int> labels, std::size_t width) {
    Tensor2 c(labels.size(), width);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= width) {
            throw std::invalid_argument("one_hot: label " + std::to_string(label) +
                                        " out of range [0, " + std::to_string(width) + ")");
        }
        c.at(i, static_cast<std::size_t>(label)) = 1.0;
    }
    return c;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace fedsynth
