#pragma once

#include <cstdint>
#include <string>

#include "spinflow/event_model.hpp"

namespace spinflow {

struct FilterConfig {
  std::int64_t threshold_us = 5000;
};

enum class FilterKind { kStc, kTrail, kStcCutTrail };

FilterKind filter_kind_from_name(const std::string& name);

// Keeps an event only when the previous same-pixel event had the same
// polarity and arrived within the threshold, i.e. the first event of every
// burst is dropped and later members pass.
EventStream stc_filter(const EventStream& stream, const FilterConfig& cfg);

// Keeps the first event of every same-polarity burst and drops trailing
// events within the threshold of the last kept one; a polarity change
// resets the window.
EventStream trail_filter(const EventStream& stream, const FilterConfig& cfg);

// trail_filter(stc_filter(stream)): one survivor per same-polarity burst.
EventStream stc_cut_trail(const EventStream& stream, const FilterConfig& cfg);

EventStream apply_filter(const EventStream& stream, FilterKind kind,
                         const FilterConfig& cfg);

}  // namespace spinflow
