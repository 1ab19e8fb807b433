#pragma once

#include <map>
#include <string>
#include <vector>

#include "elgen/core/random.hpp"
#include "elgen/core/tensor.hpp"

namespace elgen {

// Named parameter tensors with deterministic (sorted) iteration order.
template <class T>
class ParamStore {
public:
    Tensor<T>& add(const std::string& name, Tensor<T> t) {
        auto [it, fresh] = params_.emplace(name, std::move(t));
        if (!fresh) throw ParameterError("duplicate parameter: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) > 0; }

    Tensor<T>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ParameterError("unknown parameter: " + name);
        return it->second;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ParameterError("unknown parameter: " + name);
        return it->second;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [k, v] : params_) out.push_back(k);
        return out;
    }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& [k, v] : params_) n += v.numel();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::map<std::string, Tensor<T>> params_;
};

namespace init {

// Kaiming-style uniform for conv / linear weights, fan-in from the shape.
template <class T>
Tensor<T> kaiming(std::vector<int> shape, RandomStream& rng) {
    int64_t fan_in = 1;
    for (size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    const double bound = std::sqrt(3.0) * std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor<T> t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

template <class T>
Tensor<T> gaussian(std::vector<int> shape, double sigma, RandomStream& rng) {
    Tensor<T> t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(sigma * rng.normal());
    return t;
}

template <class T>
Tensor<T> constant(std::vector<int> shape, T v) {
    return Tensor<T>(std::move(shape), v);
}

}  // namespace init
}  // namespace elgen
