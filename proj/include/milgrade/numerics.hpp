#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "milgrade/matrix.hpp"

namespace milgrade {

// Stable softmax (max-subtraction). Entries positive, sum to 1.
std::vector<double> softmax(const std::vector<double>& v);

// -log softmax(logits)[label], computed via log-sum-exp.
double cross_entropy_from_logits(const std::vector<double>& logits, int label);

double sigmoid(double x);

// Adam with bias correction, one state per parameter block.
struct AdamState {
    Matrix m;
    Matrix v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-4;
};

AdamState make_adam_state(std::size_t rows, std::size_t cols, double learning_rate,
                          double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

// In-place update of param and state (m, v, t).
void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& x, double h);

int argmax_lowest(const std::vector<double>& v);

} // namespace milgrade
