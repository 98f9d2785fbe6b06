#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace g2n {

/// Central-difference gradient of `loss` with respect to `params`. `loss` must read
/// the current contents of `params`; each entry is perturbed and restored in turn.
inline std::vector<double> finite_difference_gradients(std::span<double> params,
                                                       const std::function<double()>& loss,
                                                       double epsilon = 1e-5) {
    std::vector<double> grads(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + epsilon;
        const double up = loss();
        params[i] = saved - epsilon;
        const double down = loss();
        params[i] = saved;
        grads[i] = (up - down) / (2.0 * epsilon);
    }
    return grads;
}

/// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero entries from reporting
/// huge relative errors that are really floating-point noise.
inline double relative_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradientComparison {
    double worst_relative_error = 0.0;
    std::size_t worst_index = 0;
};

inline GradientComparison compare_gradients(std::span<const double> analytic,
                                            std::span<const double> numeric, double floor = 1e-6) {
    GradientComparison out;
    for (std::size_t i = 0; i < analytic.size() && i < numeric.size(); ++i) {
        const double e = relative_error(analytic[i], numeric[i], floor);
        if (e > out.worst_relative_error) {
            out.worst_relative_error = e;
            out.worst_index = i;
        }
    }
    return out;
}

}  // namespace g2n
