#pragma once

// Straight-line reference networks: nested loops over plain vectors, reading
// weights by name. Shares no arithmetic with the library layers.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neurorate/neuralnet.hpp"

namespace oracle {

using Vec = std::vector<double>;

struct Weights {
    // name -> (rows, cols, row-major values)
    struct T {
        std::size_t rows = 0, cols = 0;
        Vec v;
        double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    };
    std::map<std::string, T> t;

    static Weights from(const neurorate::ParameterSet& p) {
        Weights w;
        for (std::size_t i = 0; i < p.size(); ++i) {
            T x;
            x.rows = static_cast<std::size_t>(p[i].rows());
            x.cols = static_cast<std::size_t>(p[i].cols());
            for (std::size_t r = 0; r < x.rows; ++r) {
                for (std::size_t c = 0; c < x.cols; ++c) x.v.push_back(p[i](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            }
            w.t[p.name(i)] = std::move(x);
        }
        return w;
    }
    const T& operator[](const std::string& n) const { return t.at(n); }
};

// CHW volume.
struct Volume {
    std::size_t c = 0, h = 0, w = 0;
    Vec v;
    double& at(std::size_t ch, std::size_t y, std::size_t x) { return v[(ch * h + y) * w + x]; }
    double at(std::size_t ch, std::size_t y, std::size_t x) const { return v[(ch * h + y) * w + x]; }
};

inline Volume volume_from(const neurorate::Matrix& m, std::size_t side) {
    Volume out{static_cast<std::size_t>(m.rows()), side, side, {}};
    for (Eigen::Index ch = 0; ch < m.rows(); ++ch) {
        for (Eigen::Index p = 0; p < m.cols(); ++p) out.v.push_back(m(ch, p));
    }
    return out;
}

inline Volume conv(const Volume& in, const Weights::T& weight, const Weights::T& bias, std::size_t k, int pad) {
    const std::size_t filters = weight.rows;
    const std::size_t oh = in.h + 2 * static_cast<std::size_t>(pad) - k + 1;
    const std::size_t ow = in.w + 2 * static_cast<std::size_t>(pad) - k + 1;
    Volume out{filters, oh, ow, Vec(filters * oh * ow, 0.0)};
    for (std::size_t f = 0; f < filters; ++f) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                double s = bias(f, 0);
                for (std::size_t ch = 0; ch < in.c; ++ch) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long iy = static_cast<long>(y + ky) - pad, ix = static_cast<long>(x + kx) - pad;
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(in.h) || ix >= static_cast<long>(in.w)) continue;
                            s += weight(f, (ch * k + ky) * k + kx) * in.at(ch, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                        }
                    }
                }
                out.at(f, y, x) = s;
            }
        }
    }
    return out;
}

inline void relu(Vec& v) {
    for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

inline Volume pool(const Volume& in) {
    Volume out{in.c, in.h / 2, in.w / 2, {}};
    out.v.assign(out.c * out.h * out.w, 0.0);
    for (std::size_t ch = 0; ch < in.c; ++ch) {
        for (std::size_t y = 0; y < out.h; ++y) {
            for (std::size_t x = 0; x < out.w; ++x) {
                out.at(ch, y, x) = std::max(std::max(in.at(ch, 2 * y, 2 * x), in.at(ch, 2 * y, 2 * x + 1)),
                                            std::max(in.at(ch, 2 * y + 1, 2 * x), in.at(ch, 2 * y + 1, 2 * x + 1)));
            }
        }
    }
    return out;
}

/// `prefix` lets the untied-copy check route window t to its own weights.
inline Volume encoder(const Volume& input, const neurorate::Architecture& a, const Weights& w,
                      const std::string& prefix = "encoder") {
    Volume x = input;
    for (std::size_t b = 0; b < a.blocks.size(); ++b) {
        for (std::size_t k = 0; k < a.blocks[b].convs; ++k) {
            const std::string base = prefix + ".block" + std::to_string(b + 1) + ".conv" + std::to_string(k + 1);
            x = conv(x, w[base + ".weight"], w[base + ".bias"], 3, 1);
            relu(x.v);
        }
        x = pool(x);
    }
    return x;
}

inline Vec matvec(const Weights::T& m, const Vec& x) {
    Vec y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) y[r] += m(r, c) * x[c];
    }
    return y;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct LstmOut {
    Vec h, c, i, f, o;
};

inline LstmOut lstm_step(const Weights& w, const Vec& x, const Vec& h, const Vec& c) {
    const std::size_t n = h.size();
    auto gate = [&](const char* g, const Vec& cell, bool peep) {
        const Vec a = matvec(w[std::string("lstm.W_x") + g], x), b = matvec(w[std::string("lstm.W_h") + g], h);
        Vec p(n, 0.0);
        if (peep) p = matvec(w[std::string("lstm.W_c") + g], cell);
        Vec out(n);
        for (std::size_t k = 0; k < n; ++k) out[k] = a[k] + b[k] + p[k] + w[std::string("lstm.b_") + g](k, 0);
        return out;
    };
    LstmOut s;
    s.i = gate("i", c, true);
    s.f = gate("f", c, true);
    Vec g = gate("c", c, false);
    s.c.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        s.i[k] = sigmoid(s.i[k]);
        s.f[k] = sigmoid(s.f[k]);
        s.c[k] = s.f[k] * c[k] + s.i[k] * std::tanh(g[k]);
    }
    s.o = gate("o", s.c, true);
    s.h.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        s.o[k] = sigmoid(s.o[k]);
        s.h[k] = s.o[k] * std::tanh(s.c[k]);
    }
    return s;
}

/// Inverted dropout mask drawn exactly as documented: a unit is dropped when
/// the top 53 bits of the next mt19937_64 draw, as a fraction, fall below p.
inline Vec mask(std::size_t n, double p, std::mt19937_64& rng) {
    Vec m(n);
    for (auto& v : m) v = (static_cast<double>(rng() >> 11) * 0x1.0p-53) < p ? 0.0 : 1.0 / (1.0 - p);
    return m;
}

inline double dense_head(const Vec& in, const Weights& w, double p, std::mt19937_64* rng, bool dropout_before) {
    Vec x = in;
    if (rng && dropout_before) {
        const auto m = mask(x.size(), p, *rng);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] *= m[k];
    }
    Vec a = matvec(w["head.hidden.weight"], x);
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = std::max(0.0, a[k] + w["head.hidden.bias"](k, 0));
    if (rng) {
        const auto m = mask(a.size(), p, *rng);
        for (std::size_t k = 0; k < a.size(); ++k) a[k] *= m[k];
    }
    return matvec(w["head.output.weight"], a)[0] + w["head.output.bias"](0, 0);
}

inline double cnn_forward(const neurorate::Architecture& a, const Weights& w, const neurorate::Matrix& input,
                          std::mt19937_64* rng = nullptr) {
    const auto feat = encoder(volume_from(input, a.grid), a, w);
    return dense_head(feat.v, w, a.dropout, rng, false);
}

/// `untied` routes window t through "encoder<t>" weights instead of the shared ones.
inline double full_forward(const neurorate::Architecture& a, const Weights& w,
                           const std::vector<neurorate::Matrix>& inputs, std::mt19937_64* rng = nullptr,
                           bool untied = false) {
    std::vector<Volume> feats;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        feats.push_back(encoder(volume_from(inputs[t], a.grid), a, w, untied ? "encoder" + std::to_string(t) : "encoder"));
    }
    Vec h(a.lstm_hidden, 0.0), c(a.lstm_hidden, 0.0);
    for (const auto& f : feats) {
        const auto s = lstm_step(w, f.v, h, c);
        h = s.h;
        c = s.c;
    }
    Volume stacked{feats.size() * feats[0].c, feats[0].h, feats[0].w, {}};
    for (const auto& f : feats) stacked.v.insert(stacked.v.end(), f.v.begin(), f.v.end());
    auto var = conv(stacked, w["variation.weight"], w["variation.bias"], a.variation_kernel, 0);
    relu(var.v);
    Vec concat = h;
    concat.insert(concat.end(), var.v.begin(), var.v.end());
    return dense_head(concat, w, a.dropout, rng, true);
}

} // namespace oracle
