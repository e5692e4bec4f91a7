#pragma once

#include <vector>

#include "aqnet/nn/layers.hpp"

namespace aqnet::nn {

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive moment estimation. Parameters are rounded to float32 precision
/// after every step so that a float32 model file reproduces them exactly.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamSettings settings);

    void zero_grad();
    void step();
    long steps() const { return t_; }

private:
    std::vector<Parameter*> params_;
    AdamSettings s_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

void round_to_float32(Tensor& t);

}  // namespace aqnet::nn
