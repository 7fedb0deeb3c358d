#pragma once

// Binary model file, all integers and doubles little-endian. Byte layout is
// documented in docs/model_format.md.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/model.hpp"
#include "edp/sstp.hpp"

namespace edp {

inline constexpr std::array<char, 4> kModelMagic = {'E', 'D', 'P', '1'};
inline constexpr std::array<char, 4> kModelTrailer = {'1', 'P', 'D', 'E'};
inline constexpr std::array<char, 4> kSstpMagic = {'E', 'D', 'S', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

// Everything needed to answer queries and apply updates later.
struct ModelFile {
  BoundingBox box{};
  SstpMatrix sstp;
  TransitionModel model;

  friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

namespace detail {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void bytes(const char* p, std::size_t n) {
    out_.write(p, static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed");
  }
  template <std::size_t N>
  void tag(const std::array<char, N>& t) { bytes(t.data(), N); }

  void u8(std::uint8_t v) { bytes(reinterpret_cast<const char*>(&v), 1); }
  void u32(std::uint32_t v) { unsigned_le(v); }
  void u64(std::uint64_t v) { unsigned_le(v); }
  void f64(double v) { unsigned_le(std::bit_cast<std::uint64_t>(v)); }

  void f64s(std::span<const double> v) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    } else {
      for (double x : v) f64(x);
    }
  }

 private:
  template <typename U>
  void unsigned_le(U v) {
    std::array<char, sizeof(U)> buf{};
    for (std::size_t k = 0; k < sizeof(U); ++k) buf[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
    bytes(buf.data(), buf.size());
  }

  std::ostream& out_;
};

class LeReader {
 public:
  LeReader(std::istream& in, std::uint64_t size) : in_(in), remaining_(size) {}

  std::uint64_t remaining() const noexcept { return remaining_; }

  void bytes(char* p, std::size_t n) {
    if (n > remaining_) throw CorruptionError("model file truncated");
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw CorruptionError("model file truncated");
    remaining_ -= n;
  }
  template <std::size_t N>
  std::array<char, N> tag() {
    std::array<char, N> t{};
    bytes(t.data(), N);
    return t;
  }

  std::uint8_t u8() {
    char c = 0;
    bytes(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() { return unsigned_le<std::uint32_t>(); }
  std::uint64_t u64() { return unsigned_le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(u64()); }

  void f64s(std::span<double> v) {
    if (v.size() * sizeof(double) > remaining_) throw CorruptionError("model file truncated");
    if constexpr (std::endian::native == std::endian::little) {
      bytes(reinterpret_cast<char*>(v.data()), v.size() * sizeof(double));
    } else {
      for (double& x : v) x = f64();
    }
  }

 private:
  template <typename U>
  U unsigned_le() {
    std::array<unsigned char, sizeof(U)> buf{};
    bytes(reinterpret_cast<char*>(buf.data()), buf.size());
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(buf[k]) << (8 * k);
    return v;
  }

  std::istream& in_;
  std::uint64_t remaining_;
};

inline std::uint64_t stream_size(std::istream& in) {
  const auto pos = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(pos);
  if (pos < 0 || end < 0) throw IoError("model stream is not seekable");
  return static_cast<std::uint64_t>(end - pos);
}

inline void write_sstp_body(LeWriter& w, const SstpMatrix& sstp) {
  for (CellId c = 0; c < sstp.cell_count(); ++c) {
    for (double p : sstp.row(c)) w.f64(p);
  }
  for (auto v : sstp.visit_counts()) w.u64(v);
  for (const auto& pc : sstp.pair_counts()) {
    for (auto v : pc) w.u64(v);
  }
  for (auto f : sstp.smoothed_flags()) w.u8(f);
}

inline SstpMatrix read_sstp_body(LeReader& r, Grid grid) {
  SstpMatrix sstp(grid);
  const auto n = static_cast<std::size_t>(grid.cell_count());
  if (r.remaining() < n * (4 * 8 + 8 + 4 * 8 + 1)) throw CorruptionError("model file truncated");
  for (CellId c = 0; c < grid.cell_count(); ++c) {
    NeighborRow row{};
    for (double& p : row) p = r.f64();
    sstp.restore_row(c, row);
  }
  std::vector<std::uint64_t> visits(n);
  for (auto& v : visits) v = r.u64();
  std::vector<std::array<std::uint64_t, 4>> pairs(n);
  for (auto& pc : pairs) {
    for (auto& v : pc) v = r.u64();
  }
  std::vector<std::uint8_t> smoothed(n);
  for (auto& f : smoothed) f = r.u8();
  sstp.restore_counts(std::move(visits), std::move(pairs), std::move(smoothed));
  return sstp;
}

}  // namespace detail

inline void save_model(std::ostream& out, const ModelFile& file) {
  const TransitionModel& m = file.model;
  if (!(file.sstp.grid() == m.grid())) throw DomainError("SSTP and model grids differ");
  detail::LeWriter w(out);
  w.tag(kModelMagic);
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(m.grid().side()));
  w.u32(static_cast<std::uint32_t>(m.max_detour()));
  w.u32(static_cast<std::uint32_t>(m.layer_count()));
  w.u64(m.epoch());
  w.f64(file.box.lat_min);
  w.f64(file.box.lat_max);
  w.f64(file.box.lon_min);
  w.f64(file.box.lon_max);
  w.f64s(m.layers());
  w.f64s(m.totals());
  detail::write_sstp_body(w, file.sstp);
  const auto& sd = m.start_dest().all();
  w.u64(m.start_dest().pair_count());
  for (const auto& [s, dests] : sd) {
    for (const auto& [d, count] : dests) {
      w.u32(static_cast<std::uint32_t>(s));
      w.u32(static_cast<std::uint32_t>(d));
      w.u64(count);
    }
  }
  w.tag(kModelTrailer);
}

inline ModelFile load_model(std::istream& in) {
  detail::LeReader r(in, detail::stream_size(in));
  if (r.remaining() < 4 || r.tag<4>() != kModelMagic) throw FormatError("not an EDP1 model file (bad magic)");
  const auto version = r.u32();
  if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
  const auto side = r.u32();
  const auto max_detour = r.u32();
  const auto layers = r.u32();
  if (side < 2 || side > 4096) throw FormatError("model grid side out of range");
  if (max_detour % 2 != 0 || max_detour > 1'000'000) throw FormatError("model max_detour invalid");
  if (layers != max_detour / 2 + 1) throw FormatError("model layer count inconsistent with max_detour");

  ModelFile file;
  const auto epoch = r.u64();
  file.box.lat_min = r.f64();
  file.box.lat_max = r.f64();
  file.box.lon_min = r.f64();
  file.box.lon_max = r.f64();

  const Grid grid(static_cast<int>(side));
  const auto nn = static_cast<std::uint64_t>(side) * side * side * side;
  if (r.remaining() < nn * 8 * (static_cast<std::uint64_t>(layers) + 1)) {
    throw CorruptionError("model file truncated");
  }
  file.model = TransitionModel(grid, static_cast<int>(max_detour));
  file.model.set_epoch(epoch);
  r.f64s(file.model.layers());
  r.f64s(file.model.totals());
  file.sstp = detail::read_sstp_body(r, grid);

  const auto pairs = r.u64();
  if (pairs > r.remaining() / 16) throw CorruptionError("model file truncated");
  StartDestCounts sd;
  for (std::uint64_t k = 0; k < pairs; ++k) {
    const auto s = static_cast<CellId>(r.u32());
    const auto d = static_cast<CellId>(r.u32());
    const auto count = r.u64();
    if (!grid.valid(s) || !grid.valid(d)) throw CorruptionError("start/destination cell out of range");
    sd.add(s, d, count);
  }
  file.model.set_start_dest(std::move(sd));
  if (r.tag<4>() != kModelTrailer) throw CorruptionError("model trailer missing");
  return file;
}

inline void save_model(const std::string& path, const ModelFile& file) {
  // Write next to the target and rename, so readers never see a partial file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    save_model(out, file);
    out.flush();
    if (!out) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  return load_model(in);
}

// Ground-truth sidecar: magic EDS1, u32 g, then g*g rows of four f64.
inline void save_sstp_sidecar(std::ostream& out, const SstpMatrix& sstp) {
  detail::LeWriter w(out);
  w.tag(kSstpMagic);
  w.u32(static_cast<std::uint32_t>(sstp.grid().side()));
  for (CellId c = 0; c < sstp.cell_count(); ++c) {
    for (double p : sstp.row(c)) w.f64(p);
  }
}

inline SstpMatrix load_sstp_sidecar(std::istream& in) {
  detail::LeReader r(in, detail::stream_size(in));
  if (r.remaining() < 4 || r.tag<4>() != kSstpMagic) throw FormatError("not an EDS1 sidecar (bad magic)");
  const auto side = r.u32();
  if (side < 2 || side > 4096) throw FormatError("sidecar grid side out of range");
  const Grid grid(static_cast<int>(side));
  std::vector<NeighborRow> rows(static_cast<std::size_t>(grid.cell_count()));
  if (r.remaining() < rows.size() * 32) throw CorruptionError("sidecar truncated");
  for (auto& row : rows) {
    for (double& p : row) p = r.f64();
  }
  return SstpMatrix::from_rows(grid, rows);
}

}  // namespace edp
