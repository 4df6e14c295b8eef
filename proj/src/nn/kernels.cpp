#include "hashtran/nn/kernels.hpp"

#include <cstddef>

namespace hashtran::kernels {

namespace {

inline void affine_row(ConstView x, const double *w, const double *b, MutView y, std::size_t r) {
    double *out = &y(r, 0);
    for (std::size_t o = 0; o < y.cols; ++o) out[o] = b[o];
    for (std::size_t i = 0; i < x.cols; ++i) {
        const double xv = x(r, i);
        if (xv == 0.0) continue;
        const double *wr = w + i * y.cols;
        for (std::size_t o = 0; o < y.cols; ++o) out[o] += xv * wr[o];
    }
}

inline void weight_grad_row(ConstView x, ConstView dy, double *gw, std::size_t i) {
    double *g = gw + i * dy.cols;
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double xv = x(r, i);
        if (xv == 0.0) continue;
        const double *d = dy.data + r * dy.ld;
        for (std::size_t o = 0; o < dy.cols; ++o) g[o] += xv * d[o];
    }
}

inline void bias_grad(ConstView dy, double *gb, std::size_t o) {
    double acc = gb[o];
    for (std::size_t r = 0; r < dy.rows; ++r) acc += dy(r, o);
    gb[o] = acc;
}

inline void input_grad_row(ConstView dy, const double *w, MutView dx, std::size_t r) {
    const double *d = dy.data + r * dy.ld;
    for (std::size_t i = 0; i < dx.cols; ++i) {
        const double *wr = w + i * dy.cols;
        double acc = 0.0;
        for (std::size_t o = 0; o < dy.cols; ++o) acc += d[o] * wr[o];
        dx(r, i) = acc;
    }
}

} // namespace

void affine(ConstView x, const double *w, const double *b, MutView y) {
    const auto rows = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static) if (rows > 1)
    for (std::ptrdiff_t r = 0; r < rows; ++r) affine_row(x, w, b, y, static_cast<std::size_t>(r));
}

void accumulate_weight_grad(ConstView x, ConstView dy, double *gw, double *gb) {
    const auto in = static_cast<std::ptrdiff_t>(x.cols);
    const auto out = static_cast<std::ptrdiff_t>(dy.cols);
#pragma omp parallel
    {
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t i = 0; i < in; ++i) weight_grad_row(x, dy, gw, static_cast<std::size_t>(i));
#pragma omp for schedule(static)
        for (std::ptrdiff_t o = 0; o < out; ++o) bias_grad(dy, gb, static_cast<std::size_t>(o));
    }
}

void input_grad(ConstView dy, const double *w, MutView dx) {
    const auto rows = static_cast<std::ptrdiff_t>(dy.rows);
#pragma omp parallel for schedule(static) if (rows > 1)
    for (std::ptrdiff_t r = 0; r < rows; ++r) input_grad_row(dy, w, dx, static_cast<std::size_t>(r));
}

namespace serial {

void affine(ConstView x, const double *w, const double *b, MutView y) {
    for (std::size_t r = 0; r < x.rows; ++r) affine_row(x, w, b, y, r);
}

void accumulate_weight_grad(ConstView x, ConstView dy, double *gw, double *gb) {
    for (std::size_t i = 0; i < x.cols; ++i) weight_grad_row(x, dy, gw, i);
    for (std::size_t o = 0; o < dy.cols; ++o) bias_grad(dy, gb, o);
}

void input_grad(ConstView dy, const double *w, MutView dx) {
    for (std::size_t r = 0; r < dy.rows; ++r) input_grad_row(dy, w, dx, r);
}

} // namespace serial

} // namespace hashtran::kernels
