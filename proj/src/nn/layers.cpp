#include "aqnet/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "aqnet/error.hpp"

namespace aqnet::nn {

namespace {

// Output indices o in [lo, hi) whose input index o*stride + offset lies in [0, in_len).
struct Span {
    std::size_t lo = 0, hi = 0;
};

Span valid_outputs(long offset, std::size_t in_len, std::size_t out_len, std::size_t stride) {
    const long s = static_cast<long>(stride);
    long lo = 0;
    if (offset < 0) lo = (-offset + s - 1) / s;
    long hi = (static_cast<long>(in_len) - 1 - offset);
    hi = hi < 0 ? 0 : hi / s + 1;
    hi = std::min(hi, static_cast<long>(out_len));
    if (lo >= hi) return {0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void fan_in_uniform(Tensor& w, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : w.values()) v = rng.uniform(-bound, bound);
}

}  // namespace

// --- Conv2d -----------------------------------------------------------------

Conv2d::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
               std::size_t kernel, std::size_t stride, std::size_t padding)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding) {
    if (in_ == 0 || out_ == 0 || kernel_ == 0 || stride_ == 0) {
        fail(ErrorKind::Validation, "conv layer " + name + " needs non-zero sizes");
    }
    weight_ = {name + ".weight", Tensor({out_, in_, kernel_, kernel_}),
               Tensor({out_, in_, kernel_, kernel_})};
    bias_ = {name + ".bias", Tensor({out_}), Tensor({out_})};
}

std::size_t Conv2d::output_side(std::size_t input_side) const {
    if (input_side + 2 * padding_ < kernel_) return 0;
    return (input_side + 2 * padding_ - kernel_) / stride_ + 1;
}

Tensor Conv2d::forward(const Tensor& x, const ForwardMode& mode) const {
    if (x.rank() != 4 || x.dim(1) != in_) {
        fail(ErrorKind::Validation, "conv " + weight_.name + " expects [B," + std::to_string(in_) +
                                        ",H,W], got " + x.shape_string());
    }
    const std::size_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = output_side(H), Wo = output_side(W);
    if (Ho == 0 || Wo == 0) fail(ErrorKind::Validation, "conv input " + x.shape_string() + " is too small");
    if (mode.training) input_ = x;

    Tensor y({B, out_, Ho, Wo});
    const double* w = weight_.value.data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_; ++o) {
            double* yp = y.data() + (b * out_ + o) * Ho * Wo;
            std::fill(yp, yp + Ho * Wo, bias_.value[o]);
            for (std::size_t c = 0; c < in_; ++c) {
                const double* xp = x.data() + (b * in_ + c) * H * W;
                for (std::size_t ky = 0; ky < kernel_; ++ky) {
                    const long oy_off = static_cast<long>(ky) - static_cast<long>(padding_);
                    const Span ry = valid_outputs(oy_off, H, Ho, stride_);
                    for (std::size_t kx = 0; kx < kernel_; ++kx) {
                        const double wv = w[((o * in_ + c) * kernel_ + ky) * kernel_ + kx];
                        const long ox_off = static_cast<long>(kx) - static_cast<long>(padding_);
                        const Span rx = valid_outputs(ox_off, W, Wo, stride_);
                        for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                            const double* xrow = xp + (oy * stride_ + oy_off) * W + ox_off;
                            double* yrow = yp + oy * Wo;
                            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                                yrow[ox] += wv * xrow[ox * stride_];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    if (input_.empty()) fail(ErrorKind::Validation, "conv backward without a training forward");
    const Tensor& x = input_;
    const std::size_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = dy.dim(2), Wo = dy.dim(3);
    Tensor dx = input_grad_ ? Tensor(x.shape()) : Tensor();
    const double* w = weight_.value.data();
    double* dw = weight_.grad.data();

    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < out_; ++o) {
            const double* gp = dy.data() + (b * out_ + o) * Ho * Wo;
            double gsum = 0.0;
            for (std::size_t i = 0; i < Ho * Wo; ++i) gsum += gp[i];
            bias_.grad[o] += gsum;
            for (std::size_t c = 0; c < in_; ++c) {
                const double* xp = x.data() + (b * in_ + c) * H * W;
                double* dxp = input_grad_ ? dx.data() + (b * in_ + c) * H * W : nullptr;
                for (std::size_t ky = 0; ky < kernel_; ++ky) {
                    const long oy_off = static_cast<long>(ky) - static_cast<long>(padding_);
                    const Span ry = valid_outputs(oy_off, H, Ho, stride_);
                    for (std::size_t kx = 0; kx < kernel_; ++kx) {
                        const std::size_t widx = ((o * in_ + c) * kernel_ + ky) * kernel_ + kx;
                        const double wv = w[widx];
                        const long ox_off = static_cast<long>(kx) - static_cast<long>(padding_);
                        const Span rx = valid_outputs(ox_off, W, Wo, stride_);
                        double acc = 0.0;
                        for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                            const std::size_t base = (oy * stride_ + oy_off) * W + ox_off;
                            const double* xrow = xp + base;
                            const double* grow = gp + oy * Wo;
                            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                                acc += grow[ox] * xrow[ox * stride_];
                            }
                            if (dxp) {
                                double* dxrow = dxp + base;
                                for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                                    dxrow[ox * stride_] += wv * grow[ox];
                                }
                            }
                        }
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    return dx;
}

void Conv2d::collect_parameters(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

void Conv2d::initialize(Rng& rng) {
    fan_in_uniform(weight_.value, in_ * kernel_ * kernel_, rng);
    bias_.value.fill(0.0);
}

std::string Conv2d::describe() const {
    return "conv2d(" + std::to_string(in_) + "->" + std::to_string(out_) + ", k=" +
           std::to_string(kernel_) + ", s=" + std::to_string(stride_) + ", p=" +
           std::to_string(padding_) + ")";
}

// --- Linear -----------------------------------------------------------------

Linear::Linear(std::string name, std::size_t in_features, std::size_t out_features)
    : in_(in_features), out_(out_features) {
    if (in_ == 0 || out_ == 0) fail(ErrorKind::Validation, "linear layer " + name + " needs non-zero widths");
    weight_ = {name + ".weight", Tensor({out_, in_}), Tensor({out_, in_})};
    bias_ = {name + ".bias", Tensor({out_}), Tensor({out_})};
}

Tensor Linear::forward(const Tensor& x, const ForwardMode& mode) const {
    if (x.rank() != 2 || x.dim(1) != in_) {
        fail(ErrorKind::Validation, "linear " + weight_.name + " expects [B," + std::to_string(in_) +
                                        "], got " + x.shape_string());
    }
    if (mode.training) input_ = x;
    const std::size_t B = x.dim(0);
    Tensor y({B, out_});
    const double* w = weight_.value.data();
    for (std::size_t b = 0; b < B; ++b) {
        const double* xb = x.data() + b * in_;
        double* yb = y.data() + b * out_;
        for (std::size_t o = 0; o < out_; ++o) {
            const double* wo = w + o * in_;
            double acc = bias_.value[o];
            for (std::size_t i = 0; i < in_; ++i) acc += wo[i] * xb[i];
            yb[o] = acc;
        }
    }
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    if (input_.empty()) fail(ErrorKind::Validation, "linear backward without a training forward");
    const std::size_t B = input_.dim(0);
    Tensor dx({B, in_});
    const double* w = weight_.value.data();
    double* dw = weight_.grad.data();
    for (std::size_t b = 0; b < B; ++b) {
        const double* xb = input_.data() + b * in_;
        const double* gb = dy.data() + b * out_;
        double* dxb = dx.data() + b * in_;
        for (std::size_t o = 0; o < out_; ++o) {
            const double g = gb[o];
            bias_.grad[o] += g;
            if (g == 0.0) continue;
            double* dwo = dw + o * in_;
            const double* wo = w + o * in_;
            for (std::size_t i = 0; i < in_; ++i) {
                dwo[i] += g * xb[i];
                dxb[i] += g * wo[i];
            }
        }
    }
    return dx;
}

void Linear::collect_parameters(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

void Linear::initialize(Rng& rng) {
    fan_in_uniform(weight_.value, in_, rng);
    bias_.value.fill(0.0);
}

std::string Linear::describe() const {
    return "linear(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

// --- Relu -------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x, const ForwardMode& mode) const {
    Tensor y = x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    if (mode.training) output_ = y;
    return y;
}

Tensor Relu::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        if (!(output_[i] > 0.0)) dx[i] = 0.0;
    }
    return dx;
}

// --- MaxPool2d --------------------------------------------------------------

Tensor MaxPool2d::forward(const Tensor& x, const ForwardMode& mode) const {
    if (x.rank() != 4) fail(ErrorKind::Validation, "maxpool expects a rank-4 input");
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = H / k_, Wo = W / k_;
    if (Ho == 0 || Wo == 0) fail(ErrorKind::Validation, "maxpool input " + x.shape_string() + " is too small");
    Tensor y({B, C, Ho, Wo});
    std::vector<std::size_t> argmax(y.size(), 0);
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const double* xp = x.data() + bc * H * W;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                std::size_t best = (oy * k_) * W + ox * k_;
                for (std::size_t dy = 0; dy < k_; ++dy) {
                    for (std::size_t dx = 0; dx < k_; ++dx) {
                        const std::size_t idx = (oy * k_ + dy) * W + ox * k_ + dx;
                        if (xp[idx] > xp[best]) best = idx;
                    }
                }
                const std::size_t out = (bc * Ho + oy) * Wo + ox;
                y[out] = xp[best];
                argmax[out] = bc * H * W + best;
            }
        }
    }
    if (mode.training) {
        input_shape_ = x.shape();
        argmax_ = std::move(argmax);
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
    Tensor dx(input_shape_);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
    return dx;
}

std::string MaxPool2d::describe() const { return "maxpool(" + std::to_string(k_) + ")"; }

// --- GlobalAvgPool ----------------------------------------------------------

Tensor GlobalAvgPool::forward(const Tensor& x, const ForwardMode& mode) const {
    if (x.rank() != 4) fail(ErrorKind::Validation, "global average pool expects a rank-4 input");
    if (mode.training) input_shape_ = x.shape();
    const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor y({B, C});
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        double sum = 0.0;
        const double* xp = x.data() + bc * HW;
        for (std::size_t i = 0; i < HW; ++i) sum += xp[i];
        y[bc] = sum / static_cast<double>(HW);
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    Tensor dx(input_shape_);
    const std::size_t HW = input_shape_[2] * input_shape_[3];
    const double inv = 1.0 / static_cast<double>(HW);
    for (std::size_t bc = 0; bc < dy.size(); ++bc) {
        double* dxp = dx.data() + bc * HW;
        std::fill(dxp, dxp + HW, dy[bc] * inv);
    }
    return dx;
}

// --- Flatten ----------------------------------------------------------------

Tensor Flatten::forward(const Tensor& x, const ForwardMode& mode) const {
    if (mode.training) input_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor Flatten::backward(const Tensor& dy) { return dy.reshaped(input_shape_); }

// --- Dropout ----------------------------------------------------------------

Tensor Dropout::forward(const Tensor& x, const ForwardMode& mode) const {
    if (!mode.training) return x;
    if (rate_ <= 0.0) {
        mask_.clear();
        return x;
    }
    if (!mode.rng) fail(ErrorKind::Validation, "dropout in training mode needs an RNG");
    const double keep = 1.0 - rate_;
    mask_.resize(x.size());
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        mask_[i] = mode.rng->uniform() < keep ? 1.0 / keep : 0.0;
        y[i] *= mask_[i];
    }
    return y;
}

Tensor Dropout::backward(const Tensor& dy) {
    if (mask_.empty()) return dy;
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
    return dx;
}

std::string Dropout::describe() const { return "dropout(" + std::to_string(rate_) + ")"; }

// --- Sequential -------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x, const ForwardMode& mode) const {
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h, mode);
    return h;
}

Tensor Sequential::backward(const Tensor& grad_out) {
    Tensor g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Sequential::collect_parameters(std::vector<Parameter*>& out) {
    for (auto& layer : layers_) layer->collect_parameters(out);
}

void Sequential::initialize(Rng& rng) {
    for (auto& layer : layers_) layer->initialize(rng);
}

std::vector<std::string> Sequential::describe() const {
    std::vector<std::string> out;
    for (const auto& layer : layers_) out.push_back(layer->describe());
    return out;
}

}  // namespace aqnet::nn
