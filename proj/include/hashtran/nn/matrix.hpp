#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hashtran::nn {

// Dense row-major matrix of doubles. One row per sample throughout the nn code.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    [[nodiscard]] double &operator()(std::size_t r, std::size_t c) noexcept { return data[r * cols + c]; }
    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }

    [[nodiscard]] std::span<double> row(std::size_t r) noexcept { return {data.data() + r * cols, cols}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept { return {data.data() + r * cols, cols}; }

    friend bool operator==(const Matrix &, const Matrix &) = default;
};

// Non-owning strided views used by the kernels; `ld` is the distance between rows.
struct ConstView {
    const double *data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t ld = 0;

    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * ld + c]; }
};

struct MutView {
    double *data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t ld = 0;

    [[nodiscard]] double &operator()(std::size_t r, std::size_t c) const noexcept { return data[r * ld + c]; }
    operator ConstView() const noexcept { return {data, rows, cols, ld}; }
};

inline ConstView view(const Matrix &m) noexcept { return {m.data.data(), m.rows, m.cols, m.cols}; }
inline MutView view(Matrix &m) noexcept { return {m.data.data(), m.rows, m.cols, m.cols}; }

// Column block [first, first + width) of every row.
inline ConstView columns(const Matrix &m, std::size_t first, std::size_t width) noexcept {
    return {m.data.data() + first, m.rows, width, m.cols};
}
inline MutView columns(Matrix &m, std::size_t first, std::size_t width) noexcept {
    return {m.data.data() + first, m.rows, width, m.cols};
}

} // namespace hashtran::nn
