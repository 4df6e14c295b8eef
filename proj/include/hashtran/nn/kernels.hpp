#pragma once

// Affine-layer kernels. Weights are stored input-major: w[i * out + o] is the
// weight from input i to output o, so a sparse binary input row touches only the
// weight rows of its active inputs.
//
// The default versions are OpenMP-parallel. Each output element is reduced by a
// single thread in a fixed order, so they are bit-identical to the serial
// reference versions for any thread count.

#include "hashtran/nn/matrix.hpp"

namespace hashtran::kernels {

using nn::ConstView;
using nn::MutView;

// y = x w + b; x: B x in, y: B x out.
void affine(ConstView x, const double *w, const double *b, MutView y);

// gw += x^T dy; gb += column sums of dy.
void accumulate_weight_grad(ConstView x, ConstView dy, double *gw, double *gb);

// dx = dy w^T.
void input_grad(ConstView dy, const double *w, MutView dx);

namespace serial {
void affine(ConstView x, const double *w, const double *b, MutView y);
void accumulate_weight_grad(ConstView x, ConstView dy, double *gw, double *gb);
void input_grad(ConstView dy, const double *w, MutView dx);
} // namespace serial

} // namespace hashtran::kernels
