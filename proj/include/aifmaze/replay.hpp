#ifndef AIFMAZE_REPLAY_HPP
#define AIFMAZE_REPLAY_HPP

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "aifmaze/common.hpp"
#include "aifmaze/nn.hpp"
#include "aifmaze/rng.hpp"

namespace aifmaze {

// One environment step as recorded during a rollout. stored_state is the
// RNN state snapshot taken *before* this observation was consumed, so a
// window starting here can resume the recurrence where the rollout left it.
struct Transition {
    Vec observation;
    Vec action;
    double reward = 0;
    bool done = false;
    RnnState stored_state;
};

using EpisodeRecord = std::vector<Transition>;

// Fixed-length training window. Steps past the episode end are zero-padded
// and masked out.
struct Window {
    std::vector<Vec> obs;
    std::vector<Vec> act;
    Vec reward;
    std::vector<std::uint8_t> done;
    Vec mask;
    RnnState init_state;
    int valid = 0;
};

// Ring of whole episodes, oldest evicted first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity_episodes = 2500) : capacity_(capacity_episodes) {}

    void push(EpisodeRecord episode) {
        if (episode.empty()) throw std::invalid_argument("ReplayBuffer::push: empty episode");
        episodes_.push_back(std::move(episode));
        if (episodes_.size() > capacity_) episodes_.pop_front();
    }

    std::size_t size() const { return episodes_.size(); }
    std::size_t capacity() const { return capacity_; }
    const EpisodeRecord& episode(std::size_t i) const { return episodes_[i]; }

    std::size_t total_steps() const {
        std::size_t n = 0;
        for (const auto& e : episodes_) n += e.size();
        return n;
    }

    std::vector<Window> sample_windows(int count, int length, Rng& rng) const {
        if (episodes_.empty()) throw std::runtime_error("ReplayBuffer: no episodes to sample");
        std::vector<Window> out;
        out.reserve(count);
        for (int i = 0; i < count; ++i) {
            const auto& ep = episodes_[rng.uniform_int(episodes_.size())];
            const int ep_len = static_cast<int>(ep.size());
            const int max_start = std::max(0, ep_len - length);
            const int start = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_start) + 1));
            out.push_back(make_window(ep, start, length));
        }
        return out;
    }

private:
    std::size_t capacity_;
    std::deque<EpisodeRecord> episodes_;

    static Window make_window(const EpisodeRecord& ep, int start, int length) {
        Window w;
        const int obs_dim = static_cast<int>(ep[0].observation.size());
        const int act_dim = static_cast<int>(ep[0].action.size());
        w.obs.assign(length, Vec(obs_dim, 0.0));
        w.act.assign(length, Vec(act_dim, 0.0));
        w.reward.assign(length, 0.0);
        w.done.assign(length, 0);
        w.mask.assign(length, 0.0);
        w.init_state = ep[start].stored_state;
        for (int t = 0; t < length; ++t) {
            const int src = start + t;
            if (src >= static_cast<int>(ep.size())) break;
            w.obs[t] = ep[src].observation;
            w.act[t] = ep[src].action;
            w.reward[t] = ep[src].reward;
            w.done[t] = ep[src].done ? 1 : 0;
            w.mask[t] = 1.0;
            ++w.valid;
        }
        return w;
    }
};

} // namespace aifmaze

#endif
