#include "spinflow/event_model.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <string>

namespace spinflow {

namespace {

constexpr char kBinMagic[4] = {'E', 'V', 'S', '1'};
constexpr std::size_t kHeaderSize = 16;
constexpr std::size_t kRecordSize = 16;

void put_u16(unsigned char* dst, std::uint16_t v) {
  dst[0] = static_cast<unsigned char>(v & 0xff);
  dst[1] = static_cast<unsigned char>(v >> 8);
}

void put_u64(unsigned char* dst, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) dst[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint16_t get_u16(const unsigned char* src) {
  return static_cast<std::uint16_t>(src[0] | (src[1] << 8));
}

std::uint64_t get_u64(const unsigned char* src) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(src[i]) << (8 * i);
  return v;
}

long parse_int_field(std::string_view field, const std::filesystem::path& path,
                     std::size_t line_no) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) +
                     ": malformed integer field '" + std::string(field) + "'");
  }
  return value;
}

EventStream read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  EventStream stream;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (have_header) continue;  // later comments are ignored
      std::string_view body(line);
      body.remove_prefix(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      auto comma = body.find(',');
      if (comma == std::string_view::npos) {
        throw ParseError(path.string() + ":1: expected '# width,height' header");
      }
      stream.geometry.width = static_cast<int>(parse_int_field(body.substr(0, comma), path, line_no));
      stream.geometry.height = static_cast<int>(parse_int_field(body.substr(comma + 1), path, line_no));
      have_header = true;
      continue;
    }
    if (!have_header) {
      throw ParseError(path.string() + ":1: missing '# width,height' header");
    }

    std::array<std::string_view, 4> fields;
    std::string_view rest(line);
    for (int i = 0; i < 4; ++i) {
      auto comma = rest.find(',');
      if (i < 3) {
        if (comma == std::string_view::npos) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) +
                           ": expected 4 comma-separated fields");
        }
        fields[i] = rest.substr(0, comma);
        rest.remove_prefix(comma + 1);
      } else {
        if (comma != std::string_view::npos) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) +
                           ": expected 4 comma-separated fields");
        }
        fields[i] = rest;
      }
    }

    Event e;
    e.t_us = parse_int_field(fields[0], path, line_no);
    long x = parse_int_field(fields[1], path, line_no);
    long y = parse_int_field(fields[2], path, line_no);
    long p = parse_int_field(fields[3], path, line_no);
    if (p != 0 && p != 1) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": polarity must be 0 or 1");
    }
    if (e.t_us < 0 || x < 0 || y < 0 || x > 0xffff || y > 0xffff) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": field out of range");
    }
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.polarity = p ? Polarity::kOn : Polarity::kOff;
    stream.events.push_back(e);
  }
  if (!have_header) {
    throw ParseError(path.string() + ": empty file, missing '# width,height' header");
  }
  return stream;
}

void write_csv(const EventStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# " << stream.geometry.width << ',' << stream.geometry.height << '\n';
  char buf[64];
  for (const Event& e : stream.events) {
    int n = std::snprintf(buf, sizeof(buf), "%lld,%u,%u,%u\n",
                          static_cast<long long>(e.t_us), e.x, e.y,
                          static_cast<unsigned>(e.polarity));
    out.write(buf, n);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

EventStream read_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  unsigned char header[kHeaderSize];
  in.read(reinterpret_cast<char*>(header), kHeaderSize);
  if (in.gcount() != static_cast<std::streamsize>(kHeaderSize) ||
      std::memcmp(header, kBinMagic, 4) != 0) {
    throw ParseError(path.string() + ": bad or truncated EVS1 header");
  }
  EventStream stream;
  stream.geometry.width = get_u16(header + 4);
  stream.geometry.height = get_u16(header + 6);

  std::vector<unsigned char> buf(kRecordSize * 4096);
  for (;;) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    std::streamsize got = in.gcount();
    if (got == 0) break;
    if (got % kRecordSize != 0) {
      throw ParseError(path.string() + ": truncated record at end of file");
    }
    for (std::streamsize off = 0; off < got; off += kRecordSize) {
      const unsigned char* rec = buf.data() + off;
      Event e;
      std::uint64_t t = get_u64(rec);
      if (t > static_cast<std::uint64_t>(INT64_MAX)) {
        throw ParseError(path.string() + ": timestamp out of range");
      }
      e.t_us = static_cast<std::int64_t>(t);
      e.x = get_u16(rec + 8);
      e.y = get_u16(rec + 10);
      if (rec[12] > 1) {
        throw ParseError(path.string() + ": polarity byte must be 0 or 1");
      }
      e.polarity = rec[12] ? Polarity::kOn : Polarity::kOff;
      stream.events.push_back(e);
    }
    if (!in) break;
  }
  return stream;
}

void write_bin(const EventStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  unsigned char header[kHeaderSize] = {};
  std::memcpy(header, kBinMagic, 4);
  put_u16(header + 4, static_cast<std::uint16_t>(stream.geometry.width));
  put_u16(header + 6, static_cast<std::uint16_t>(stream.geometry.height));
  out.write(reinterpret_cast<const char*>(header), kHeaderSize);

  std::vector<unsigned char> buf;
  buf.reserve(kRecordSize * 4096);
  unsigned char rec[kRecordSize] = {};
  for (const Event& e : stream.events) {
    put_u64(rec, static_cast<std::uint64_t>(e.t_us));
    put_u16(rec + 8, e.x);
    put_u16(rec + 10, e.y);
    rec[12] = static_cast<unsigned char>(e.polarity);
    buf.insert(buf.end(), rec, rec + kRecordSize);
    if (buf.size() == buf.capacity()) {
      out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  if (!buf.empty()) {
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

StreamFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? StreamFormat::kCsv : StreamFormat::kBin;
}

void validate(const EventStream& stream) {
  if (stream.geometry.width <= 0 || stream.geometry.height <= 0) {
    throw BoundsError("sensor geometry must be positive, got " +
                      std::to_string(stream.geometry.width) + "x" +
                      std::to_string(stream.geometry.height));
  }
  std::int64_t prev_t = INT64_MIN;
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (!stream.geometry.contains(e.x, e.y)) {
      throw BoundsError("event " + std::to_string(i) + " at (" + std::to_string(e.x) +
                        "," + std::to_string(e.y) + ") outside " +
                        std::to_string(stream.geometry.width) + "x" +
                        std::to_string(stream.geometry.height));
    }
    if (e.t_us < prev_t) {
      throw OrderError("event " + std::to_string(i) + " timestamp " +
                       std::to_string(e.t_us) + " decreases from " +
                       std::to_string(prev_t));
    }
    prev_t = e.t_us;
  }
}

EventStream read_events(const std::filesystem::path& path, StreamFormat format) {
  EventStream stream =
      format == StreamFormat::kCsv ? read_csv(path) : read_bin(path);
  validate(stream);
  return stream;
}

void write_events(const EventStream& stream, const std::filesystem::path& path,
                  StreamFormat format) {
  if (format == StreamFormat::kCsv) {
    write_csv(stream, path);
  } else {
    write_bin(stream, path);
  }
}

}  // namespace spinflow
