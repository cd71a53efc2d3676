#ifndef TAMED_IO_HPP
#define TAMED_IO_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>
#include <unistd.h>

#include "tamed/errors.hpp"
#include "tamed/field.hpp"
#include "tamed/noise.hpp"
#include "tamed/solver.hpp"

namespace tamed {

using Json = nlohmann::ordered_json;

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Fixed notation with `digits` significant digits, trailing zeros kept (0 prints as "0").
inline std::string format_significant(double x, int digits) {
  if (x == 0.0) return "0";
  const int exponent = static_cast<int>(std::floor(std::log10(std::abs(x))));
  const int decimals = std::max(0, digits - 1 - exponent);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary file and renames it over `path`.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Git blob id: SHA-1 of "blob <size>\0" followed by the content.
inline std::string git_blob_sha1(std::string_view content) {
  std::string data = "blob " + std::to_string(content.size());
  data.push_back('\0');
  data.append(content);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) throw Error("SHA-1 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

// ---------------------------------------------------------------------------------------
// .sfld snapshots: one JSON header line {grid, name, time}, then little-endian float64
// (re, im) pairs in wavevector-major, component-minor order.

struct Snapshot {
  int n = 0;
  std::string name;
  double time = 0.0;
  SpectralField field;
};

namespace detail {

inline void put_le(std::string& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

inline double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

}  // namespace detail

inline std::string encode_sfld(const SpectralField& u, const std::string& name, double time) {
  Json header;
  header["grid"] = u.grid().n();
  header["name"] = name;
  header["time"] = time;
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + u.grid().size() * 48);
  for (std::size_t i = 0; i < u.grid().size(); ++i)
    for (int j = 0; j < 3; ++j) {
      detail::put_le(out, u(j, i).real());
      detail::put_le(out, u(j, i).imag());
    }
  return out;
}

inline void write_sfld(const std::filesystem::path& path, const SpectralField& u, const std::string& name,
                       double time) {
  atomic_write(path, encode_sfld(u, name, time));
}

inline Snapshot decode_sfld(const std::string& bytes, const std::string& origin = "snapshot") {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw ValidationError(origin + ": missing header line");
  Snapshot s;
  try {
    const Json header = Json::parse(bytes.substr(0, nl));
    s.n = header.at("grid").get<int>();
    s.name = header.value("name", std::string());
    s.time = header.value("time", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(origin + ": bad header: " + e.what());
  }
  if (s.n < 2 || s.n % 2 != 0) throw ValidationError(origin + ": grid must be a positive even integer");
  s.field = SpectralField(make_grid(s.n));
  const std::size_t count = s.field.grid().size();
  if (bytes.size() - nl - 1 != count * 48) {
    throw ValidationError(origin + ": expected " + std::to_string(count * 48) + " payload bytes, found " +
                          std::to_string(bytes.size() - nl - 1));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (std::size_t i = 0; i < count; ++i)
    for (int j = 0; j < 3; ++j, p += 16) {
      const double re = detail::get_le(p), im = detail::get_le(p + 8);
      if (!std::isfinite(re) || !std::isfinite(im)) throw ValidationError(origin + ": nonfinite coefficient");
      s.field(j, i) = Complex(re, im);
    }
  if (s.field.hermitian_defect() > 1e-12) throw ValidationError(origin + ": coefficients are not Hermitian");
  return s;
}

inline Snapshot read_sfld(const std::filesystem::path& path) { return decode_sfld(read_file(path), path.string()); }

// ---------------------------------------------------------------------------------------
// Controls: {"time_grid": [...], "marks": K, "values": row-major J x K}

inline Json control_to_json(const Control& g) {
  Json j;
  j["time_grid"] = g.time_grid();
  j["marks"] = g.marks();
  j["values"] = g.values();
  return j;
}

inline Control control_from_json(const Json& j, const std::string& origin = "control") {
  try {
    return Control(j.at("time_grid").get<std::vector<double>>(), j.at("marks").get<std::size_t>(),
                   j.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(origin + ": " + e.what());
  }
}

// Parse errors carry nlohmann's "line L, column C" position.
inline Json parse_json(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

inline Control read_control(const std::filesystem::path& path) {
  return control_from_json(parse_json(read_file(path), path.string()), path.string());
}

// ---------------------------------------------------------------------------------------
// Tables

inline std::string energy_csv(const Trajectory& traj) {
  std::string out = "t,H1_sq,cum_H2_sq,jump_flag\n";
  for (const auto& row : traj.energy)
    out += format_double(row.time) + "," + format_double(row.h1_sq) + "," + format_double(row.cum_h2_sq) + "," +
           (row.jump ? "1" : "0") + "\n";
  return out;
}

inline std::string events_csv(const std::vector<PoissonEvent>& events) {
  std::string out = "t,mark_index\n";
  for (const auto& e : events) out += format_double(e.time) + "," + std::to_string(e.mark) + "\n";
  return out;
}

inline std::string events_csv(const std::vector<JumpRecord>& jumps) {
  std::string out = "t,mark_index\n";
  for (const auto& j : jumps) out += format_double(j.time) + "," + std::to_string(j.mark) + "\n";
  return out;
}

inline std::string jumps_jsonl(const std::vector<JumpRecord>& jumps) {
  std::string out;
  for (const auto& j : jumps) {
    Json line;
    line["t"] = j.time;
    line["mark"] = j.mark;
    line["pre_h1"] = j.pre_h1;
    line["post_h1"] = j.post_h1;
    out += line.dump() + "\n";
  }
  return out;
}

}  // namespace tamed

#endif  // TAMED_IO_HPP
