#include "aqnet/nn/adam.hpp"

#include <cmath>

namespace aqnet::nn {

void round_to_float32(Tensor& t) {
    for (auto& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

Adam::Adam(std::vector<Parameter*> params, AdamSettings settings)
    : params_(std::move(params)), s_(settings) {
    for (auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->grad.fill(0.0);
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& value = params_[k]->value;
        const auto& grad = params_[k]->grad;
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[i] = s_.beta1 * m[i] + (1.0 - s_.beta1) * g;
            v[i] = s_.beta2 * v[i] + (1.0 - s_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            value[i] -= s_.learning_rate * mhat / (std::sqrt(vhat) + s_.epsilon);
        }
        round_to_float32(value);
    }
}

}  // namespace aqnet::nn
