#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "evasim/core.hpp"
#include "evasim/metrics.hpp"
#include "evasim/sensors.hpp"

namespace evasim {

/// Wire magic for binary point-cloud replays, kept verbatim for file
/// compatibility. The embedded NUL is deliberate.
inline constexpr unsigned char kCloudMagic[8] = {'A', 'P', 'R', 'E', '\0', 'P', 'C', '1'};

namespace detail {

inline void put_bytes(std::ostream& out, std::uint64_t v, int n) {
  char buf[8];
  for (int i = 0; i < n; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, n);
}

inline bool get_bytes(std::istream& in, std::uint64_t& v, int n) {
  char buf[8];
  if (!in.read(buf, n)) return false;
  v = 0;
  for (int i = 0; i < n; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return true;
}

inline void put_f32(std::ostream& out, float f) {
  put_bytes(out, std::bit_cast<std::uint32_t>(f), 4);
}

inline void put_f64(std::ostream& out, double d) {
  put_bytes(out, std::bit_cast<std::uint64_t>(d), 8);
}

}  // namespace detail

/// Appends frames to a cloud replay stream. Writes the magic first; call it
/// once per file with all frames, or keep the stream open and append frame
/// batches with write_magic=false.
inline void write_cloud_replay(std::ostream& out, const std::vector<PointCloud>& frames,
                               bool write_magic = true) {
  if (write_magic) out.write(reinterpret_cast<const char*>(kCloudMagic), 8);
  for (const PointCloud& f : frames) {
    detail::put_f64(out, f.timestamp);
    detail::put_bytes(out, static_cast<std::uint32_t>(f.points.size()), 4);
    for (const Vec3& p : f.points) {
      detail::put_f32(out, static_cast<float>(p.x()));
      detail::put_f32(out, static_cast<float>(p.y()));
      detail::put_f32(out, static_cast<float>(p.z()));
    }
  }
}

inline std::vector<PointCloud> read_cloud_replay(std::istream& in) {
  unsigned char magic[8];
  if (!in.read(reinterpret_cast<char*>(magic), 8) || std::memcmp(magic, kCloudMagic, 8) != 0)
    throw ConfigError("cloud replay: bad or missing magic header");
  std::vector<PointCloud> frames;
  std::uint64_t raw = 0;
  while (detail::get_bytes(in, raw, 8)) {
    PointCloud f;
    f.timestamp = std::bit_cast<double>(raw);
    std::uint64_t count = 0;
    if (!detail::get_bytes(in, count, 4))
      throw ConfigError("cloud replay: truncated frame header");
    f.points.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t fx = 0, fy = 0, fz = 0;
      if (!detail::get_bytes(in, fx, 4) || !detail::get_bytes(in, fy, 4) ||
          !detail::get_bytes(in, fz, 4))
        throw ConfigError("cloud replay: truncated point record");
      f.points.emplace_back(std::bit_cast<float>(static_cast<std::uint32_t>(fx)),
                            std::bit_cast<float>(static_cast<std::uint32_t>(fy)),
                            std::bit_cast<float>(static_cast<std::uint32_t>(fz)));
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

inline void write_detection_csv(std::ostream& out, const std::vector<Detection2D>& dets) {
  out << "t,class,u_min,v_min,u_max,v_max,conf\n";
  for (const Detection2D& d : dets) {
    out << detail::fmt_g(d.t) << ',' << d.cls << ',' << detail::fmt_g(d.u_min) << ','
        << detail::fmt_g(d.v_min) << ',' << detail::fmt_g(d.u_max) << ','
        << detail::fmt_g(d.v_max) << ',' << detail::fmt_g(d.conf) << '\n';
  }
}

inline std::vector<Detection2D> read_detection_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,class,u_min,v_min,u_max,v_max,conf")
    throw ConfigError("detection replay: bad or missing CSV header");
  std::vector<Detection2D> dets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field[7];
    for (int i = 0; i < 7; ++i)
      if (!std::getline(row, field[i], ','))
        throw ConfigError("detection replay: short row '" + line + "'");
    try {
      Detection2D d;
      d.t = std::stod(field[0]);
      d.cls = field[1];
      d.u_min = std::stod(field[2]);
      d.v_min = std::stod(field[3]);
      d.u_max = std::stod(field[4]);
      d.v_max = std::stod(field[5]);
      d.conf = std::stod(field[6]);
      dets.push_back(std::move(d));
    } catch (const std::exception&) {
      throw ConfigError("detection replay: unparsable row '" + line + "'");
    }
  }
  return dets;
}

}  // namespace evasim
