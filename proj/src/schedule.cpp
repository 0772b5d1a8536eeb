#include "basinlab/schedule.hpp"

#include <cmath>
#include <string>

#include "basinlab/errors.hpp"

namespace basinlab {

namespace {

void check_t(int t, int T) {
    if (t < 1 || t > T)
        throw ConfigError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
}

}  // namespace

double NoiseSchedule::beta_at(int t) const {
    check_t(t, T());
    return beta[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_at(int t) const {
    check_t(t, T());
    return alpha[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t == 0) return 1.0;
    check_t(t, T());
    return alpha_bar[static_cast<std::size_t>(t - 1)];
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    if (betas.empty()) throw ConfigError("schedule needs at least one timestep");
    NoiseSchedule s;
    s.beta = std::move(betas);
    s.alpha.resize(s.beta.size());
    s.alpha_bar.resize(s.beta.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < s.beta.size(); ++i) {
        const double b = s.beta[i];
        if (!(b > 0.0 && b < 1.0))
            throw ConfigError("beta_" + std::to_string(i + 1) + " = " + std::to_string(b) +
                              " outside (0,1)");
        s.alpha[i] = 1.0 - b;
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("linear schedule requires 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(T));
    if (T == 1) {
        betas[0] = beta_start;
    } else {
        const double step = (beta_end - beta_start) / static_cast<double>(T - 1);
        for (int i = 0; i < T; ++i) betas[static_cast<std::size_t>(i)] = beta_start + step * i;
    }
    return from_betas(std::move(betas));
}

Vec forward_noise(const Vec& x0, int t, const Vec& eps, const NoiseSchedule& schedule) {
    check_t(t, schedule.T());
    if (x0.size() != eps.size())
        throw ConfigError("forward_noise: x0 and eps dimension mismatch");
    const double ab = schedule.alpha_bar_at(t);
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    Vec out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = signal * x0[i] + noise * eps[i];
    return out;
}

}  // namespace basinlab
