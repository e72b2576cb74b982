#ifndef AIFMAZE_TENSOR_HPP
#define AIFMAZE_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "aifmaze/common.hpp"
#include "aifmaze/rng.hpp"

namespace aifmaze {

// Named tensor with gradient accumulator and optimizer slots. Rank 1 or 2;
// rank-2 tensors are row-major.
struct Param {
    std::string name;
    std::vector<int> shape;
    Vec value;
    Vec grad;
    Vec slot_m; // first moment (Adam) or squared-gradient accumulator (RMSProp)
    Vec slot_v; // second moment (Adam)

    int size() const { return static_cast<int>(value.size()); }
    int rows() const { return shape[0]; }
    int cols() const { return shape.size() > 1 ? shape[1] : 1; }
};

class ParamStore {
public:
    Param& add(const std::string& name, std::vector<int> shape) {
        if (by_name_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("ParamStore: bad shape for " + name);
            n *= static_cast<std::size_t>(d);
        }
        auto p = std::make_unique<Param>();
        p->name = name;
        p->shape = std::move(shape);
        p->value.assign(n, 0.0);
        p->grad.assign(n, 0.0);
        p->slot_m.assign(n, 0.0);
        p->slot_v.assign(n, 0.0);
        Param& ref = *p;
        by_name_[name] = p.get();
        params_.push_back(std::move(p));
        return ref;
    }

    Param& get(const std::string& name) {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw std::invalid_argument("ParamStore: no parameter " + name);
        return *it->second;
    }
    const Param& get(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw std::invalid_argument("ParamStore: no parameter " + name);
        return *it->second;
    }
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }

    // Insertion order; iteration over this drives every reduction, so the
    // order must stay stable.
    std::size_t size() const { return params_.size(); }
    Param& at(std::size_t i) { return *params_[i]; }
    const Param& at(std::size_t i) const { return *params_[i]; }

    void zero_grad() {
        for (auto& p : params_)
            std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }

    std::size_t value_count() const {
        std::size_t n = 0;
        for (auto& p : params_) n += p->value.size();
        return n;
    }

    // FNV-1a over the raw value bytes; used for frozen-weights checks.
    std::uint64_t value_checksum() const {
        std::uint64_t h = 1469598103934665603ull;
        for (auto& p : params_) {
            const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
            for (std::size_t i = 0; i < p->value.size() * sizeof(double); ++i) {
                h ^= bytes[i];
                h *= 1099511628211ull;
            }
        }
        return h;
    }

    // Values only; shapes must already match.
    void copy_values_from(const ParamStore& other) {
        if (other.size() != size()) throw std::invalid_argument("ParamStore: store layout mismatch");
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (other.params_[i]->value.size() != params_[i]->value.size())
                throw std::invalid_argument("ParamStore: size mismatch on " + params_[i]->name);
            params_[i]->value = other.params_[i]->value;
        }
    }

private:
    std::vector<std::unique_ptr<Param>> params_;
    std::unordered_map<std::string, Param*> by_name_;
};

// acc <- b1*acc + (1-b1)*g etc., bias-corrected step. Step count lives here,
// not in the store, so two optimizers over one store stay independent in
// their schedules (they share the moment slots by design: model parameters
// take alternating prediction-loss and RL-loss steps).
struct Adam {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;

    void step(ParamStore& store) {
        ++t;
        const double c1 = 1.0 / (1.0 - std::pow(beta1, static_cast<double>(t)));
        const double c2 = 1.0 / (1.0 - std::pow(beta2, static_cast<double>(t)));
        for (std::size_t i = 0; i < store.size(); ++i) {
            Param& p = store.at(i);
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double g = p.grad[k];
                p.slot_m[k] = beta1 * p.slot_m[k] + (1.0 - beta1) * g;
                p.slot_v[k] = beta2 * p.slot_v[k] + (1.0 - beta2) * g * g;
                p.value[k] -= lr * (p.slot_m[k] * c1) / (std::sqrt(p.slot_v[k] * c2) + eps);
            }
        }
    }
};

// acc <- rho*acc + (1-rho)*g^2; step = lr*g/(sqrt(acc)+1e-8)
struct RmsProp {
    double lr = 0.005;
    double rho = 0.9;
    double eps = 1e-8;

    void step(ParamStore& store) {
        for (std::size_t i = 0; i < store.size(); ++i) {
            Param& p = store.at(i);
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double g = p.grad[k];
                p.slot_m[k] = rho * p.slot_m[k] + (1.0 - rho) * g * g;
                p.value[k] -= lr * g / (std::sqrt(p.slot_m[k]) + eps);
            }
        }
    }
};

inline void init_uniform(Param& p, double lo, double hi, Rng& rng) {
    for (auto& v : p.value) v = rng.uniform(lo, hi);
}

// Glorot uniform for a [out x in] weight matrix.
inline void init_glorot(Param& p, Rng& rng, double gain = 1.0) {
    const double bound = gain * std::sqrt(6.0 / (p.rows() + p.cols()));
    init_uniform(p, -bound, bound, rng);
}

} // namespace aifmaze

#endif
