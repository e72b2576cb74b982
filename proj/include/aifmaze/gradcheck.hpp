#ifndef AIFMAZE_GRADCHECK_HPP
#define AIFMAZE_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "aifmaze/rng.hpp"
#include "aifmaze/tensor.hpp"

namespace aifmaze {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int worst_index = -1;
    int checked = 0;
};

// Central finite differences against the analytic gradients already sitting
// in the stores' grad buffers. `loss` must rebuild its graph from current
// parameter values and be deterministic (fix all noise beforehand). Checks
// every entry, or a random subsample of `max_entries` when the stores are
// larger than that.
inline GradCheckReport grad_check(const std::function<double()>& loss,
                                  const std::vector<ParamStore*>& stores,
                                  double h = 1e-6,
                                  int max_entries = 100000000,
                                  Rng* rng = nullptr) {
    struct Entry {
        Param* p;
        int k;
    };
    std::vector<Entry> entries;
    for (ParamStore* s : stores) {
        for (std::size_t i = 0; i < s->size(); ++i) {
            Param& p = s->at(i);
            for (int k = 0; k < p.size(); ++k) entries.push_back({&p, k});
        }
    }
    if (static_cast<int>(entries.size()) > max_entries && rng) {
        // Fisher-Yates prefix shuffle
        for (int i = 0; i < max_entries; ++i) {
            const std::size_t j = i + rng->uniform_int(entries.size() - i);
            std::swap(entries[i], entries[j]);
        }
        entries.resize(max_entries);
    }

    GradCheckReport rep;
    for (const Entry& e : entries) {
        const double saved = e.p->value[e.k];
        e.p->value[e.k] = saved + h;
        const double lp = loss();
        e.p->value[e.k] = saved - h;
        const double lm = loss();
        e.p->value[e.k] = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = e.p->grad[e.k];
        const double rel = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-2});
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_param = e.p->name;
            rep.worst_index = e.k;
        }
        ++rep.checked;
    }
    return rep;
}

} // namespace aifmaze

#endif
