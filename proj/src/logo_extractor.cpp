#include "spinflow/logo_extractor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace spinflow {

namespace {

constexpr char kLogoMagic[4] = {'L', 'V', 'S', '1'};
constexpr std::size_t kHeaderSize = 16;
constexpr std::size_t kRecordSize = 16;

double quantize_cpx(double v) { return std::round(v * 100.0) / 100.0; }

const TrackState* tick_at_or_before(const Track& track, std::int64_t t_us) {
  auto it = std::upper_bound(track.states.begin(), track.states.end(), t_us,
                             [](std::int64_t t, const TrackState& s) { return t < s.t_us; });
  if (it == track.states.begin()) return nullptr;
  return &*(it - 1);
}

}  // namespace

double effective_pad(const ExtractionConfig& cfg, double r) {
  return cfg.pad_px >= 0.0 ? cfg.pad_px : std::max(2.0, 0.1 * r);
}

BallSample ball_position_at(const Track& track, std::int64_t t_us) {
  if (track.states.empty()) throw OutOfTrackRange("empty track");
  const TrackState* s = tick_at_or_before(track, t_us);
  if (s == nullptr) {
    throw OutOfTrackRange("t=" + std::to_string(t_us) + " before first tick " +
                          std::to_string(track.states.front().t_us));
  }
  if (t_us > track.states.back().t_us + track.tick_period_us) {
    throw OutOfTrackRange("t=" + std::to_string(t_us) + " beyond last tick " +
                          std::to_string(track.states.back().t_us));
  }
  double dt_s = static_cast<double>(t_us - s->t_us) * 1e-6;
  return {s->x(0) + s->x(2) * dt_s, s->x(1) + s->x(3) * dt_s, s->x(4)};
}

LogoStream extract_logo_events(const EventStream& stream, const Track& track,
                               const ExtractionConfig& cfg) {
  LogoStream out;
  if (track.states.empty()) return out;
  const std::int64_t span_begin = track.states.front().t_us;
  const std::int64_t span_end = track.states.back().t_us + track.tick_period_us;

  for (const Event& e : stream.events) {
    if (e.t_us < span_begin || e.t_us > span_end) continue;
    BallSample ball = ball_position_at(track, e.t_us);
    double pad = effective_pad(cfg, ball.r);
    double keep_r = ball.r - pad;
    if (keep_r <= 0.0) continue;
    double du = static_cast<double>(e.x) - ball.x;
    double dv = static_cast<double>(e.y) - ball.y;
    if (du * du + dv * dv < keep_r * keep_r) {
      out.events.push_back({e.t_us, du, dv, e.polarity});
    }
  }
  return out;
}

LogoStream read_logo_events(const std::filesystem::path& path, StreamFormat format) {
  LogoStream out;
  if (format == StreamFormat::kCsv) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (line[0] == '#') {
        have_header = true;
        continue;
      }
      if (!have_header) throw ParseError(path.string() + ":1: missing '# logo' header");
      LogoEvent e;
      const char* p = line.c_str();
      char* next = nullptr;
      e.t_us = std::strtoll(p, &next, 10);
      if (next == p || *next != ',') {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed record");
      }
      p = next + 1;
      e.u = std::strtod(p, &next);
      if (next == p || *next != ',') {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed record");
      }
      p = next + 1;
      e.v = std::strtod(p, &next);
      if (next == p || *next != ',') {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed record");
      }
      p = next + 1;
      long pol = std::strtol(p, &next, 10);
      if (next == p || *next != '\0' || (pol != 0 && pol != 1)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad polarity");
      }
      e.polarity = pol ? Polarity::kOn : Polarity::kOff;
      out.events.push_back(e);
    }
    if (!have_header) throw ParseError(path.string() + ": missing '# logo' header");
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    unsigned char header[kHeaderSize];
    in.read(reinterpret_cast<char*>(header), kHeaderSize);
    if (in.gcount() != static_cast<std::streamsize>(kHeaderSize) ||
        std::memcmp(header, kLogoMagic, 4) != 0) {
      throw ParseError(path.string() + ": bad or truncated LVS1 header");
    }
    unsigned char rec[kRecordSize];
    for (;;) {
      in.read(reinterpret_cast<char*>(rec), kRecordSize);
      if (in.gcount() == 0) break;
      if (in.gcount() != static_cast<std::streamsize>(kRecordSize)) {
        throw ParseError(path.string() + ": truncated record at end of file");
      }
      LogoEvent e;
      std::uint64_t t = 0;
      for (int i = 0; i < 8; ++i) t |= static_cast<std::uint64_t>(rec[i]) << (8 * i);
      e.t_us = static_cast<std::int64_t>(t);
      auto get_i16 = [&](int off) {
        return static_cast<std::int16_t>(rec[off] | (rec[off + 1] << 8));
      };
      e.u = get_i16(8) / 100.0;
      e.v = get_i16(10) / 100.0;
      if (rec[12] > 1) throw ParseError(path.string() + ": polarity byte must be 0 or 1");
      e.polarity = rec[12] ? Polarity::kOn : Polarity::kOff;
      out.events.push_back(e);
    }
  }

  std::int64_t prev = INT64_MIN;
  for (const LogoEvent& e : out.events) {
    if (e.t_us < prev) throw OrderError(path.string() + ": decreasing timestamp");
    prev = e.t_us;
  }
  return out;
}

void write_logo_events(const LogoStream& stream, const std::filesystem::path& path,
                       StreamFormat format) {
  if (format == StreamFormat::kCsv) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "# logo\n";
    char buf[96];
    for (const LogoEvent& e : stream.events) {
      int n = std::snprintf(buf, sizeof(buf), "%lld,%.2f,%.2f,%u\n",
                            static_cast<long long>(e.t_us), quantize_cpx(e.u),
                            quantize_cpx(e.v), static_cast<unsigned>(e.polarity));
      out.write(buf, n);
    }
    if (!out) throw IoError("write failed for " + path.string());
  } else {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    unsigned char header[kHeaderSize] = {};
    std::memcpy(header, kLogoMagic, 4);
    out.write(reinterpret_cast<const char*>(header), kHeaderSize);
    unsigned char rec[kRecordSize] = {};
    for (const LogoEvent& e : stream.events) {
      std::uint64_t t = static_cast<std::uint64_t>(e.t_us);
      for (int i = 0; i < 8; ++i) rec[i] = static_cast<unsigned char>(t >> (8 * i));
      auto put_i16 = [&](int off, double v) {
        long q = std::lround(v * 100.0);
        q = std::clamp(q, -32768L, 32767L);
        rec[off] = static_cast<unsigned char>(q & 0xff);
        rec[off + 1] = static_cast<unsigned char>((q >> 8) & 0xff);
      };
      put_i16(8, e.u);
      put_i16(10, e.v);
      rec[12] = static_cast<unsigned char>(e.polarity);
      out.write(reinterpret_cast<const char*>(rec), kRecordSize);
    }
    if (!out) throw IoError("write failed for " + path.string());
  }
}

}  // namespace spinflow
