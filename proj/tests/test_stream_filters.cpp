#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "spinflow/stream_filters.hpp"
#include "support/filter_oracle.hpp"

using namespace spinflow;

namespace {

EventStream same_pixel_burst(const std::vector<std::pair<std::int64_t, Polarity>>& seq) {
  EventStream s;
  s.geometry = {8, 8};
  for (auto [t, p] : seq) s.events.push_back({t, 3, 3, p});
  return s;
}

EventStream random_stream(std::mt19937& rng, int n_events, int width, int height,
                          int max_gap_us) {
  EventStream s;
  s.geometry = {width, height};
  std::int64_t t = 0;
  std::uniform_int_distribution<int> dt(0, max_gap_us);
  std::uniform_int_distribution<int> dx(0, width - 1);
  std::uniform_int_distribution<int> dy(0, height - 1);
  for (int i = 0; i < n_events; ++i) {
    t += dt(rng);
    s.events.push_back({t, static_cast<std::uint16_t>(dx(rng)),
                        static_cast<std::uint16_t>(dy(rng)),
                        (rng() & 1) ? Polarity::kOn : Polarity::kOff});
  }
  return s;
}

bool is_subsequence(const EventStream& sub, const EventStream& full) {
  std::size_t j = 0;
  for (const Event& e : full.events) {
    if (j < sub.events.size() && sub.events[j] == e) ++j;
  }
  return j == sub.events.size();
}

}  // namespace

TEST_CASE("stc discards a single isolated event") {
  EventStream s = same_pixel_burst({{1000, Polarity::kOn}});
  CHECK(stc_filter(s, {500}).events.empty());
}

TEST_CASE("stc passes later burst members") {
  EventStream s = same_pixel_burst(
      {{0, Polarity::kOn}, {100, Polarity::kOn}, {200, Polarity::kOn}});
  EventStream out = stc_filter(s, {500});
  REQUIRE(out.events.size() == 2);
  CHECK(out.events[0].t_us == 100);
  CHECK(out.events[1].t_us == 200);
}

TEST_CASE("stc drops events whose predecessor has opposite polarity") {
  EventStream s = same_pixel_burst({{0, Polarity::kOn}, {100, Polarity::kOff}});
  CHECK(stc_filter(s, {500}).events.empty());
}

TEST_CASE("trail keeps only the first event of a burst") {
  EventStream s = same_pixel_burst(
      {{0, Polarity::kOn}, {100, Polarity::kOn}, {200, Polarity::kOn}});
  EventStream out = trail_filter(s, {500});
  REQUIRE(out.events.size() == 1);
  CHECK(out.events[0].t_us == 0);
}

TEST_CASE("trail window expires after the threshold") {
  EventStream s = same_pixel_burst({{0, Polarity::kOn}, {600, Polarity::kOn}});
  CHECK(trail_filter(s, {500}).events.size() == 2);
}

TEST_CASE("trail resets on polarity change") {
  EventStream s = same_pixel_burst({{0, Polarity::kOn}, {100, Polarity::kOff}});
  CHECK(trail_filter(s, {500}).events.size() == 2);
}

TEST_CASE("stc-cut-trail keeps exactly the second event of a burst") {
  EventStream s = same_pixel_burst({{0, Polarity::kOn},
                                    {100, Polarity::kOn},
                                    {200, Polarity::kOn},
                                    {300, Polarity::kOn}});
  EventStream out = stc_cut_trail(s, {500});
  REQUIRE(out.events.size() == 1);
  CHECK(out.events[0].t_us == 100);
}

TEST_CASE("stc-cut-trail of an empty stream is empty") {
  EventStream s;
  s.geometry = {8, 8};
  CHECK(stc_cut_trail(s, {500}).events.empty());
}

TEST_CASE("sparse noise is fully suppressed") {
  // Inter-event gaps far above the threshold at every pixel.
  std::mt19937 rng(3);
  EventStream s;
  s.geometry = {4, 4};
  std::int64_t t = 0;
  for (int i = 0; i < 200; ++i) {
    t += 50000;
    s.events.push_back({t, static_cast<std::uint16_t>(rng() % 4),
                        static_cast<std::uint16_t>(rng() % 4),
                        (rng() & 1) ? Polarity::kOn : Polarity::kOff});
  }
  CHECK(stc_cut_trail(s, {500}).events.empty());
  CHECK(stc_cut_trail(s, {500}).events ==
        testing::stc_cut_trail_reference(s, 500).events);
}

TEST_CASE("filters equal the brute-force reference on random streams") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    // Dense traffic on a small sensor so bursts actually form.
    EventStream s = random_stream(rng, 2000 + static_cast<int>(rng() % 8000), 16, 16, 400);
    std::int64_t threshold = 200 + static_cast<std::int64_t>(rng() % 5000);
    FilterConfig cfg{threshold};

    EventStream stc_out = stc_filter(s, cfg);
    EventStream trail_out = trail_filter(s, cfg);
    EventStream both_out = stc_cut_trail(s, cfg);

    CHECK(stc_out.events == testing::stc_reference(s, threshold).events);
    CHECK(trail_out.events == testing::trail_reference(s, threshold).events);
    CHECK(both_out.events == testing::stc_cut_trail_reference(s, threshold).events);

    // Outputs are subsequences; composition can only shrink.
    CHECK(is_subsequence(stc_out, s));
    CHECK(is_subsequence(trail_out, s));
    CHECK(is_subsequence(both_out, stc_out));
    CHECK(both_out.events.size() <= stc_out.events.size());
    CHECK(both_out.events.size() <= trail_filter(stc_out, cfg).events.size());
  }
}
