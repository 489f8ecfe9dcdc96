#include "spinflow/stream_filters.hpp"

#include <limits>
#include <vector>

namespace spinflow {

namespace {

struct PixelSlot {
  std::int64_t t = std::numeric_limits<std::int64_t>::min();
  Polarity polarity = Polarity::kOn;
  bool seen = false;
};

}  // namespace

FilterKind filter_kind_from_name(const std::string& name) {
  if (name == "stc") return FilterKind::kStc;
  if (name == "trail") return FilterKind::kTrail;
  if (name == "stc-cut-trail") return FilterKind::kStcCutTrail;
  throw ConfigError("unknown filter kind '" + name + "'");
}

EventStream stc_filter(const EventStream& stream, const FilterConfig& cfg) {
  if (cfg.threshold_us <= 0) throw ConfigError("filter threshold must be > 0");

  EventStream out;
  out.geometry = stream.geometry;
  // Memory of the last event seen at each pixel, kept or not.
  std::vector<PixelSlot> last(static_cast<std::size_t>(stream.geometry.width) *
                              stream.geometry.height);
  for (const Event& e : stream.events) {
    PixelSlot& slot = last[static_cast<std::size_t>(e.y) * stream.geometry.width + e.x];
    if (slot.seen && slot.polarity == e.polarity && e.t_us - slot.t <= cfg.threshold_us) {
      out.events.push_back(e);
    }
    slot.t = e.t_us;
    slot.polarity = e.polarity;
    slot.seen = true;
  }
  return out;
}

EventStream trail_filter(const EventStream& stream, const FilterConfig& cfg) {
  if (cfg.threshold_us <= 0) throw ConfigError("filter threshold must be > 0");

  EventStream out;
  out.geometry = stream.geometry;
  // Memory of the last *kept* event per pixel; the window rolls from there so
  // long trails stay suppressed.
  std::vector<PixelSlot> kept(static_cast<std::size_t>(stream.geometry.width) *
                              stream.geometry.height);
  for (const Event& e : stream.events) {
    PixelSlot& slot = kept[static_cast<std::size_t>(e.y) * stream.geometry.width + e.x];
    bool keep = !slot.seen || slot.polarity != e.polarity ||
                e.t_us - slot.t > cfg.threshold_us;
    if (keep) {
      out.events.push_back(e);
      slot.t = e.t_us;
      slot.polarity = e.polarity;
      slot.seen = true;
    }
  }
  return out;
}

EventStream stc_cut_trail(const EventStream& stream, const FilterConfig& cfg) {
  return trail_filter(stc_filter(stream, cfg), cfg);
}

EventStream apply_filter(const EventStream& stream, FilterKind kind,
                         const FilterConfig& cfg) {
  switch (kind) {
    case FilterKind::kStc:
      return stc_filter(stream, cfg);
    case FilterKind::kTrail:
      return trail_filter(stream, cfg);
    case FilterKind::kStcCutTrail:
      return stc_cut_trail(stream, cfg);
  }
  throw ConfigError("invalid filter kind");
}

}  // namespace spinflow
