#include "neurorate/detail/layers.hpp"

#include "neurorate/error.hpp"

namespace neurorate::layers {

Spatial conv_output(Spatial in, std::size_t kernel, std::size_t pad) {
    if (in.height + 2 * pad < kernel || in.width + 2 * pad < kernel) {
        throw InvalidArgument("convolution kernel larger than its padded input");
    }
    return {in.height + 2 * pad - kernel + 1, in.width + 2 * pad - kernel + 1};
}

Matrix im2col(const Matrix& x, Spatial in, std::size_t kernel, std::size_t pad) {
    const auto out = conv_output(in, kernel, pad);
    const auto channels = static_cast<std::size_t>(x.rows());
    Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(channels * kernel * kernel), static_cast<Eigen::Index>(out.area()));
    const auto p = static_cast<std::ptrdiff_t>(pad);
    for (std::size_t c = 0; c < channels; ++c) {
        const double* src = x.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
                double* dst = cols.row(static_cast<Eigen::Index>((c * kernel + ky) * kernel + kx)).data();
                for (std::size_t oy = 0; oy < out.height; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - p;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
                    for (std::size_t ox = 0; ox < out.width; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - p;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                        dst[oy * out.width + ox] = src[static_cast<std::size_t>(iy) * in.width + static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
    return cols;
}

Matrix col2im(const Matrix& cols, std::size_t channels, Spatial in, std::size_t kernel, std::size_t pad) {
    const auto out = conv_output(in, kernel, pad);
    Matrix x = Matrix::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(in.area()));
    const auto p = static_cast<std::ptrdiff_t>(pad);
    for (std::size_t c = 0; c < channels; ++c) {
        double* dst = x.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
                const double* src = cols.row(static_cast<Eigen::Index>((c * kernel + ky) * kernel + kx)).data();
                for (std::size_t oy = 0; oy < out.height; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy + ky) - p;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
                    for (std::size_t ox = 0; ox < out.width; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox + kx) - p;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
                        dst[static_cast<std::size_t>(iy) * in.width + static_cast<std::size_t>(ix)] += src[oy * out.width + ox];
                    }
                }
            }
        }
    }
    return x;
}

Matrix conv_forward(const Matrix& x, Spatial in, const Matrix& weight, const Matrix& bias, std::size_t kernel,
                    std::size_t pad, Matrix* cols_out) {
    if (static_cast<std::size_t>(x.cols()) != in.area()) throw InvalidArgument("convolution input has the wrong spatial size");
    if (static_cast<std::size_t>(weight.cols()) != static_cast<std::size_t>(x.rows()) * kernel * kernel) {
        throw InvalidArgument("convolution weight does not match the input channels");
    }
    Matrix cols = im2col(x, in, kernel, pad);
    Matrix y = weight * cols;
    y.colwise() += bias.col(0);
    if (cols_out) *cols_out = std::move(cols);
    return y;
}

Matrix conv_backward(const Matrix& d_out, const Matrix& cols, const Matrix& weight, Matrix& d_weight, Matrix& d_bias,
                     std::size_t channels, Spatial in, std::size_t kernel, std::size_t pad, bool need_dx) {
    d_weight.noalias() += d_out * cols.transpose();
    d_bias.col(0) += d_out.rowwise().sum();
    if (!need_dx) return {};
    const Matrix d_cols = weight.transpose() * d_out;
    return col2im(d_cols, channels, in, kernel, pad);
}

void relu_inplace(Matrix& x) { x = x.cwiseMax(0.0); }

void relu_backward(Matrix& d, const Matrix& output) {
    d = (output.array() > 0.0).select(d, 0.0);
}

Matrix maxpool2(const Matrix& x, Spatial in, std::vector<std::uint32_t>* argmax) {
    if (in.height % 2 != 0 || in.width % 2 != 0) throw InvalidArgument("2x2 pooling needs even spatial sizes");
    const std::size_t oh = in.height / 2, ow = in.width / 2;
    Matrix y(x.rows(), static_cast<Eigen::Index>(oh * ow));
    if (argmax) argmax->resize(static_cast<std::size_t>(y.size()));
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
        const double* src = x.row(c).data();
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                std::size_t best = (2 * oy) * in.width + 2 * ox;
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = (2 * oy + dy) * in.width + 2 * ox + dx;
                        if (src[idx] > src[best]) best = idx;
                    }
                }
                const std::size_t o = oy * ow + ox;
                y(c, static_cast<Eigen::Index>(o)) = src[best];
                if (argmax) (*argmax)[static_cast<std::size_t>(c) * oh * ow + o] = static_cast<std::uint32_t>(best);
            }
        }
    }
    return y;
}

Matrix maxpool2_backward(const Matrix& d_out, std::size_t channels, Spatial in, const std::vector<std::uint32_t>& argmax) {
    Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(in.area()));
    const auto per = static_cast<std::size_t>(d_out.cols());
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t o = 0; o < per; ++o) {
            dx(static_cast<Eigen::Index>(c), argmax[c * per + o]) += d_out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(o));
        }
    }
    return dx;
}

Vector dropout_mask(std::size_t n, double p, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("dropout probability must be in [0, 1)");
    Vector mask(static_cast<Eigen::Index>(n));
    const double keep_scale = 1.0 / (1.0 - p);
    for (Eigen::Index k = 0; k < mask.size(); ++k) {
        mask(k) = uniform01(rng) < p ? 0.0 : keep_scale;
    }
    return mask;
}

namespace {

Vector sigmoid(const Vector& a) { return a.unaryExpr([](double v) { return layers::sigmoid(v); }); }

} // namespace

LstmStep lstm_forward(const LstmWeights& w, const Vector& x, const Vector& h_prev, const Vector& c_prev) {
    const auto hidden = w.w_hi.rows();
    if (x.size() != w.w_xi.cols() || h_prev.size() != hidden || c_prev.size() != hidden) {
        throw InvalidArgument("LSTM step dimensions do not match its weights");
    }
    LstmStep s;
    s.x = x;
    s.h_prev = h_prev;
    s.c_prev = c_prev;
    s.i = sigmoid(w.w_xi * x + w.w_hi * h_prev + w.w_ci * c_prev + w.b_i.col(0));
    s.f = sigmoid(w.w_xf * x + w.w_hf * h_prev + w.w_cf * c_prev + w.b_f.col(0));
    s.g = (w.w_xc * x + w.w_hc * h_prev + w.b_c.col(0)).array().tanh().matrix();
    s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
    s.o = sigmoid(w.w_xo * x + w.w_ho * h_prev + w.w_co * s.c + w.b_o.col(0));
    s.tanh_c = s.c.array().tanh().matrix();
    s.h = s.o.cwiseProduct(s.tanh_c);
    return s;
}

void lstm_backward(const LstmWeights& w, const LstmStep& s, const Vector& dh, const Vector& dc_in, LstmGrads& g,
                   Vector* dx, Vector& dh_prev, Vector& dc_prev) {
    const Vector ones = Vector::Ones(s.c.size());
    const Vector da_o = dh.cwiseProduct(s.tanh_c).cwiseProduct(s.o).cwiseProduct(ones - s.o);
    const Vector dc = dc_in + dh.cwiseProduct(s.o).cwiseProduct(ones - s.tanh_c.cwiseAbs2()) + w.w_co.transpose() * da_o;
    const Vector da_i = dc.cwiseProduct(s.g).cwiseProduct(s.i).cwiseProduct(ones - s.i);
    const Vector da_f = dc.cwiseProduct(s.c_prev).cwiseProduct(s.f).cwiseProduct(ones - s.f);
    const Vector da_g = dc.cwiseProduct(s.i).cwiseProduct(ones - s.g.cwiseAbs2());

    g.w_xi.noalias() += da_i * s.x.transpose();
    g.w_hi.noalias() += da_i * s.h_prev.transpose();
    g.w_ci.noalias() += da_i * s.c_prev.transpose();
    g.b_i.col(0) += da_i;
    g.w_xf.noalias() += da_f * s.x.transpose();
    g.w_hf.noalias() += da_f * s.h_prev.transpose();
    g.w_cf.noalias() += da_f * s.c_prev.transpose();
    g.b_f.col(0) += da_f;
    g.w_xc.noalias() += da_g * s.x.transpose();
    g.w_hc.noalias() += da_g * s.h_prev.transpose();
    g.b_c.col(0) += da_g;
    g.w_xo.noalias() += da_o * s.x.transpose();
    g.w_ho.noalias() += da_o * s.h_prev.transpose();
    g.w_co.noalias() += da_o * s.c.transpose();
    g.b_o.col(0) += da_o;

    if (dx) {
        *dx = w.w_xi.transpose() * da_i + w.w_xf.transpose() * da_f + w.w_xc.transpose() * da_g +
              w.w_xo.transpose() * da_o;
    }
    dh_prev = w.w_hi.transpose() * da_i + w.w_hf.transpose() * da_f + w.w_hc.transpose() * da_g +
              w.w_ho.transpose() * da_o;
    dc_prev = dc.cwiseProduct(s.f) + w.w_ci.transpose() * da_i + w.w_cf.transpose() * da_f;
}

} // namespace neurorate::layers
