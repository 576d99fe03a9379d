#include "milgrade/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "milgrade/errors.hpp"

namespace milgrade {

std::vector<double> softmax(const std::vector<double>& v) {
    if (v.empty()) throw DomainError("softmax: empty input");
    double mx = v[0];
    for (double x : v) {
        if (!std::isfinite(x)) throw DomainError("softmax: non-finite input");
        mx = std::max(mx, x);
    }
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double cross_entropy_from_logits(const std::vector<double>& logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw DomainError("cross_entropy_from_logits: label " + std::to_string(label) +
                          " out of range for " + std::to_string(logits.size()) + " logits");
    }
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double sum = 0.0;
    for (double x : logits) sum += std::exp(x - mx);
    return std::log(sum) - (logits[static_cast<std::size_t>(label)] - mx);
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

AdamState make_adam_state(std::size_t rows, std::size_t cols, double learning_rate,
                          double beta1, double beta2, double epsilon) {
    AdamState st;
    st.m = Matrix(rows, cols);
    st.v = Matrix(rows, cols);
    st.t = 0;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.epsilon = epsilon;
    st.learning_rate = learning_rate;
    return st;
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state) {
    if (!param.same_shape(grad) || !param.same_shape(state.m) || !param.same_shape(state.v)) {
        throw DimensionError("adam_step: shapes differ (param " + shape_string(param) +
                             ", grad " + shape_string(grad) + ", state " +
                             shape_string(state.m) + ")");
    }
    state.t += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double b1t = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double b2t = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        const double g = grad.data[i];
        state.m.data[i] = b1 * state.m.data[i] + (1.0 - b1) * g;
        state.v.data[i] = b2 * state.v.data[i] + (1.0 - b2) * g * g;
        const double mhat = state.m.data[i] / b1t;
        const double vhat = state.v.data[i] / b2t;
        param.data[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                     const std::vector<double>& x, double h) {
    if (h <= 0.0) throw DomainError("finite_diff_grad: step must be positive");
    std::vector<double> grad(x.size());
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double fp = f(probe);
        probe[i] = x[i] - h;
        const double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " +
                               std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

int argmax_lowest(const std::vector<double>& v) {
    if (v.empty()) throw DomainError("argmax_lowest: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return static_cast<int>(best);
}

} // namespace milgrade
