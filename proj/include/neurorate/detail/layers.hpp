#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "neurorate/rng.hpp"

// Stateless layer kernels shared by the models. Activations are C x (H*W)
// row-major matrices, so the flat buffer is in CHW order.
namespace neurorate::layers {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Spatial {
    std::size_t height = 0;
    std::size_t width = 0;
    [[nodiscard]] std::size_t area() const noexcept { return height * width; }
};

/// Output size of a stride-1 square convolution.
[[nodiscard]] Spatial conv_output(Spatial in, std::size_t kernel, std::size_t pad);

/// Unfolds k x k patches: row (c*k + ky)*k + kx, column oy*Wo + ox.
[[nodiscard]] Matrix im2col(const Matrix& x, Spatial in, std::size_t kernel, std::size_t pad);
/// Adjoint of im2col.
[[nodiscard]] Matrix col2im(const Matrix& cols, std::size_t channels, Spatial in, std::size_t kernel, std::size_t pad);

/// weight: F x (C*k*k) in im2col row order; bias: F x 1.
[[nodiscard]] Matrix conv_forward(const Matrix& x, Spatial in, const Matrix& weight, const Matrix& bias,
                                  std::size_t kernel, std::size_t pad, Matrix* cols_out = nullptr);
/// Accumulates into d_weight/d_bias; returns dL/dx when `need_dx`.
Matrix conv_backward(const Matrix& d_out, const Matrix& cols, const Matrix& weight, Matrix& d_weight,
                     Matrix& d_bias, std::size_t channels, Spatial in, std::size_t kernel, std::size_t pad,
                     bool need_dx);

void relu_inplace(Matrix& x);
/// Zeroes gradient entries where the ReLU output was not positive.
void relu_backward(Matrix& d, const Matrix& output);

/// 2x2 stride-2 max pooling; `argmax` receives the flat input index of each
/// output's winner (first maximum in row-major window order).
[[nodiscard]] Matrix maxpool2(const Matrix& x, Spatial in, std::vector<std::uint32_t>* argmax);
[[nodiscard]] Matrix maxpool2_backward(const Matrix& d_out, std::size_t channels, Spatial in,
                                       const std::vector<std::uint32_t>& argmax);

/// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
/// Returns the mask (0 or 1/(1-p) per unit).
[[nodiscard]] Vector dropout_mask(std::size_t n, double p, Rng& rng);

/// Peephole LSTM step state for one time step.
struct LstmStep {
    Vector x, h_prev, c_prev;
    Vector i, f, g, o, c, tanh_c, h;
};

/// References to the 11 weight matrices and 4 biases.
struct LstmWeights {
    const Matrix &w_xi, &w_hi, &w_ci, &w_xf, &w_hf, &w_cf, &w_xc, &w_hc, &w_xo, &w_ho, &w_co;
    const Matrix &b_i, &b_f, &b_c, &b_o;
};

struct LstmGrads {
    Matrix &w_xi, &w_hi, &w_ci, &w_xf, &w_hf, &w_cf, &w_xc, &w_hc, &w_xo, &w_ho, &w_co;
    Matrix &b_i, &b_f, &b_c, &b_o;
};

/// i, f from c_prev; c updated; o from the new c; h = o * tanh(c).
[[nodiscard]] LstmStep lstm_forward(const LstmWeights& w, const Vector& x, const Vector& h_prev, const Vector& c_prev);

/// Backward through one step. dh, dc: gradients arriving at h_t and c_t.
/// Outputs dx, dh_prev, dc_prev; accumulates parameter gradients.
void lstm_backward(const LstmWeights& w, const LstmStep& s, const Vector& dh, const Vector& dc, LstmGrads& g,
                   Vector* dx, Vector& dh_prev, Vector& dc_prev);

[[nodiscard]] inline double sigmoid(double v) noexcept {
    // Split form avoids overflow of exp for large |v|.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

} // namespace neurorate::layers
