#pragma once

// Brute-force reference filters written directly from the burst semantics,
// independent of the streaming implementations they check: full per-pixel
// event histories, scanned per event.

#include <vector>

#include "spinflow/event_model.hpp"

namespace spinflow::testing {

// STC: an event passes iff the most recent earlier event at its pixel has
// the same polarity and lies within the threshold.
inline EventStream stc_reference(const EventStream& in, std::int64_t threshold_us) {
  EventStream out;
  out.geometry = in.geometry;
  std::vector<std::vector<std::size_t>> history(
      static_cast<std::size_t>(in.geometry.width) * in.geometry.height);
  for (std::size_t i = 0; i < in.events.size(); ++i) {
    const Event& e = in.events[i];
    auto& h = history[static_cast<std::size_t>(e.y) * in.geometry.width + e.x];
    if (!h.empty()) {
      const Event& prev = in.events[h.back()];
      if (prev.polarity == e.polarity && e.t_us - prev.t_us <= threshold_us) {
        out.events.push_back(e);
      }
    }
    h.push_back(i);
  }
  return out;
}

// TRAIL: an event passes iff there is no kept predecessor at its pixel, the
// last kept one has opposite polarity, or it arrived more than the threshold
// after the last kept one.
inline EventStream trail_reference(const EventStream& in, std::int64_t threshold_us) {
  EventStream out;
  out.geometry = in.geometry;
  std::vector<std::vector<Event>> kept(static_cast<std::size_t>(in.geometry.width) *
                                       in.geometry.height);
  for (const Event& e : in.events) {
    auto& h = kept[static_cast<std::size_t>(e.y) * in.geometry.width + e.x];
    bool keep = h.empty() || h.back().polarity != e.polarity ||
                e.t_us - h.back().t_us > threshold_us;
    if (keep) {
      h.push_back(e);
      out.events.push_back(e);
    }
  }
  return out;
}

inline EventStream stc_cut_trail_reference(const EventStream& in, std::int64_t threshold_us) {
  return trail_reference(stc_reference(in, threshold_us), threshold_us);
}

}  // namespace spinflow::testing
