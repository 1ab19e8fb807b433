#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>

#include "elgen/nn/params.hpp"

namespace elgen {

// AdamW with decoupled weight decay. Only names listed as trainable are
// updated; everything else in the store stays bit-identical.
template <class T>
class AdamW {
public:
    struct Config {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 1e-2;
    };

    AdamW(Config cfg, std::set<std::string> trainable)
        : cfg_(cfg), trainable_(std::move(trainable)) {}

    const std::set<std::string>& trainable() const { return trainable_; }

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }

    // grads holds one tensor per trainable name, same shapes as the params.
    void step(ParamStore<T>& params, const std::map<std::string, Tensor<T>>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (const std::string& name : trainable_) {
            auto git = grads.find(name);
            if (git == grads.end()) continue;
            const Tensor<T>& g = git->second;
            Tensor<T>& p = params.at(name);
            Tensor<T>& m = state_m_.try_emplace(name, Tensor<T>(p.shape)).first->second;
            Tensor<T>& v = state_v_.try_emplace(name, Tensor<T>(p.shape)).first->second;
            for (int64_t i = 0; i < p.numel(); ++i) {
                const double gi = static_cast<double>(g[i]);
                const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
                const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                double x = static_cast<double>(p[i]);
                x -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * x);
                p[i] = static_cast<T>(x);
            }
        }
    }

private:
    Config cfg_;
    std::set<std::string> trainable_;
    std::map<std::string, Tensor<T>> state_m_;
    std::map<std::string, Tensor<T>> state_v_;
    int64_t t_ = 0;
};

}  // namespace elgen
