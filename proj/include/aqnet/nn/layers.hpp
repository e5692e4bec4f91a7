#pragma once

#include <memory>
#include <string>
#include <vector>

#include "aqnet/nn/tensor.hpp"
#include "aqnet/rng.hpp"

namespace aqnet::nn {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

struct ForwardMode {
    bool training = false;
    Rng* rng = nullptr;  // required only by stochastic layers in training mode
};

/// A differentiable layer. In training mode forward() caches what backward()
/// needs, so training calls must alternate forward -> backward on the same
/// batch. Evaluation-mode forward() touches no state and may run concurrently.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, const ForwardMode& mode) const = 0;
    /// Accumulates parameter gradients and returns d(loss)/d(input).
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect_parameters(std::vector<Parameter*>& /*out*/) {}
    virtual void initialize(Rng& /*rng*/) {}
    virtual std::string describe() const = 0;
};

class Conv2d final : public Layer {
public:
    Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
           std::size_t kernel, std::size_t stride, std::size_t padding);

    Tensor forward(const Tensor& x, const ForwardMode& mode) const override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_parameters(std::vector<Parameter*>& out) override;
    void initialize(Rng& rng) override;
    std::string describe() const override;

    /// The first layer of a backbone does not need d(loss)/d(input).
    void set_input_grad(bool enabled) { input_grad_ = enabled; }

    std::size_t output_side(std::size_t input_side) const;
    std::size_t in_channels() const { return in_; }
    std::size_t out_channels() const { return out_; }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    std::size_t in_, out_, kernel_, stride_, padding_;
    bool input_grad_ = true;
    Parameter weight_;  // [out, in, k, k]
    Parameter bias_;    // [out]
    mutable Tensor input_;
};

class Linear final : public Layer {
public:
    Linear(std::string name, std::size_t in_features, std::size_t out_features);

    Tensor forward(const Tensor& x, const ForwardMode& mode) const override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_parameters(std::vector<Parameter*>& out) override;
    void initialize(Rng& rng) override;
    std::string describe() const override;

    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }

private:
    std::size_t in_, out_;
    Parameter weight_;  // [out, in]
    Parameter bias_;    // [out]
    mutable Tensor input_;
};

class Relu final : public Layer {
public:
    Tensor forward(const Tensor& x, const ForwardMode& mode) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override { return "relu"; }

private:
    mutable Tensor output_;
};

/// Non-overlapping max pooling (window = stride = k, floor on ragged edges).
class MaxPool2d final : public Layer {
public:
    explicit MaxPool2d(std::size_t k) : k_(k) {}
    Tensor forward(const Tensor& x, const ForwardMode& mode) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override;

private:
    std::size_t k_;
    mutable std::vector<std::size_t> input_shape_;
    mutable std::vector<std::size_t> argmax_;
};

/// [B, C, H, W] -> [B, C]
class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& x, const ForwardMode& mode) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override { return "global_avg_pool"; }

private:
    mutable std::vector<std::size_t> input_shape_;
};

/// [B, ...] -> [B, prod(...)]
class Flatten final : public Layer {
public:
    Tensor forward(const Tensor& x, const ForwardMode& mode) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override { return "flatten"; }

private:
    mutable std::vector<std::size_t> input_shape_;
};

/// Inverted dropout; identity in evaluation mode or when rate == 0.
class Dropout final : public Layer {
public:
    explicit Dropout(double rate) : rate_(rate) {}
    Tensor forward(const Tensor& x, const ForwardMode& mode) const override;
    Tensor backward(const Tensor& grad_out) override;
    std::string describe() const override;

private:
    double rate_;
    mutable std::vector<double> mask_;
};

class Sequential {
public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    template <typename L, typename... Args>
    L& add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        layers_.push_back(std::move(layer));
        return ref;
    }

    Tensor forward(const Tensor& x, const ForwardMode& mode) const;
    Tensor backward(const Tensor& grad_out);
    void collect_parameters(std::vector<Parameter*>& out);
    void initialize(Rng& rng);
    std::vector<std::string> describe() const;
    std::size_t size() const { return layers_.size(); }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace aqnet::nn
