#include "elgen/diffusion/schedule.hpp"

#include <cmath>

#include "elgen/core/error.hpp"

namespace elgen::diffusion {

double NoiseSchedule::sqrt_ab(int t) const {
    return std::sqrt(alpha_bar[static_cast<size_t>(t)]);
}

double NoiseSchedule::sqrt_1mab(int t) const {
    return std::sqrt(1.0 - alpha_bar[static_cast<size_t>(t)]);
}

void NoiseSchedule::validate() const {
    if (T < 2) throw ParameterError("schedule: T must be >= 2");
    if (static_cast<int>(beta.size()) != T || static_cast<int>(alpha_bar.size()) != T)
        throw ParameterError("schedule: inconsistent array lengths");
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        const double b = beta[static_cast<size_t>(t)];
        if (b < 0.0 || b >= 1.0) throw ParameterError("schedule: beta outside [0,1)");
        prod *= 1.0 - b;
        if (std::abs(prod - alpha_bar[static_cast<size_t>(t)]) > 1e-12)
            throw ParameterError("schedule: alpha_bar does not match the beta product");
    }
}

NoiseSchedule make_schedule(int T, ScheduleKind kind, double beta_start, double beta_end) {
    if (T < 2) throw ParameterError("make_schedule: T must be >= 2");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(static_cast<size_t>(T));
    s.alpha_bar.resize(static_cast<size_t>(T));
    if (kind == ScheduleKind::Linear) {
        for (int t = 0; t < T; ++t)
            s.beta[static_cast<size_t>(t)] =
                beta_start + (beta_end - beta_start) * t / static_cast<double>(T - 1);
    } else {
        // Cosine alpha_bar profile; betas derived from consecutive ratios.
        const double off = 0.008;
        auto f = [&](double u) {
            const double v = std::cos((u + off) / (1.0 + off) * (3.14159265358979323846 / 2.0));
            return v * v;
        };
        const double f0 = f(0.0);
        double prev = 1.0;
        for (int t = 0; t < T; ++t) {
            const double ab = f((t + 1) / static_cast<double>(T)) / f0;
            double b = 1.0 - ab / prev;
            b = std::min(std::max(b, 0.0), 0.999);
            s.beta[static_cast<size_t>(t)] = b;
            prev *= 1.0 - b;
        }
    }
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        prod *= 1.0 - s.beta[static_cast<size_t>(t)];
        s.alpha_bar[static_cast<size_t>(t)] = prod;
    }
    return s;
}

ScheduleKind schedule_kind_from_string(const std::string& str) {
    if (str == "linear") return ScheduleKind::Linear;
    if (str == "cosine") return ScheduleKind::Cosine;
    throw ParameterError("unknown schedule kind: " + str);
}

}  // namespace elgen::diffusion
