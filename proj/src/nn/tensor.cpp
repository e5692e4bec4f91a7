#include "aqnet/nn/tensor.hpp"

#include <algorithm>
#include <numeric>

#include "aqnet/error.hpp"

namespace aqnet::nn {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (product(shape) != data_.size()) {
        fail(ErrorKind::Validation, "cannot reshape " + shape_string() + " to a different size");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

std::string Tensor::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) s += (i ? "x" : "") + std::to_string(shape_[i]);
    return s + "]";
}

Tensor concat_features(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
        fail(ErrorKind::Validation, "cannot concatenate " + a.shape_string() + " and " + b.shape_string());
    }
    const std::size_t n = a.dim(0), wa = a.dim(1), wb = b.dim(1);
    Tensor out({n, wa + wb});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.data() + i * wa, wa, out.data() + i * (wa + wb));
        std::copy_n(b.data() + i * wb, wb, out.data() + i * (wa + wb) + wa);
    }
    return out;
}

std::pair<Tensor, Tensor> split_features(const Tensor& t, std::size_t left_width) {
    if (t.rank() != 2 || left_width > t.dim(1)) {
        fail(ErrorKind::Validation, "cannot split " + t.shape_string());
    }
    const std::size_t n = t.dim(0), w = t.dim(1), wr = w - left_width;
    Tensor left({n, left_width}), right({n, wr});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(t.data() + i * w, left_width, left.data() + i * left_width);
        std::copy_n(t.data() + i * w + left_width, wr, right.data() + i * wr);
    }
    return {std::move(left), std::move(right)};
}

}  // namespace aqnet::nn
