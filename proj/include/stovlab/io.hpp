#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "stovlab/entangled.hpp"
#include "stovlab/field.hpp"
#include "stovlab/instruments.hpp"
#include "stovlab/polarization.hpp"

namespace stovlab {

using ojson = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kFieldDumpVersion = 1;

namespace detail {

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void append_f64le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

inline double load_f64le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

inline void append_values(std::string& out, const ComplexGrid& g) {
  for (const cplx& v : g.data()) {
    append_f64le(out, v.real());
    append_f64le(out, v.imag());
  }
}

inline ojson meta_json(const FieldMeta& m) {
  ojson j;
  j["mode"] = m.mode;
  if (m.has_q) j["q"] = m.q;
  j["label"] = m.label;
  return j;
}

inline FieldMeta meta_from_json(const ojson& j) {
  FieldMeta m;
  m.mode = j.value("mode", std::string("canonical"));
  if (j.contains("q")) {
    m.q = j.at("q").get<int>();
    m.has_q = true;
  }
  m.label = j.value("label", std::string());
  return m;
}

inline ojson field_header(const GridSpec& g, double y0, ojson components, const FieldMeta& meta,
                          const std::string& data_file) {
  ojson h;
  h["version"] = kFieldDumpVersion;
  h["n_u"] = g.n_u();
  h["n_w"] = g.n_w();
  h["du"] = g.du();
  h["dw"] = g.dw();
  h["u_min"] = g.u(0);
  h["w_min"] = g.w(0);
  h["u_half"] = g.u_half();
  h["w_half"] = g.w_half();
  h["components"] = std::move(components);
  h["y0"] = y0;
  h["convention"] = {{"phase_origin", "+x"}, {"positive_rotation", "+x→+w"}};
  h["dtype"] = "f64le";
  h["layout"] = "row-major, u outer, w inner, re/im interleaved";
  h["data_file"] = data_file;
  h["meta"] = meta_json(meta);
  return h;
}

inline std::filesystem::path data_path_for(const std::filesystem::path& header_path) {
  std::filesystem::path p = header_path;
  p.replace_extension(".bin");
  return p;
}

}  // namespace detail

/// Writes a JSON header at `path` and the raw little-endian samples next to it
/// (same stem, .bin). Vector fields store all S samples, then all P samples.
inline void write_field(const ScalarField& f, const std::filesystem::path& path) {
  const std::filesystem::path data = detail::data_path_for(path);
  const ojson h = detail::field_header(f.grid(), f.y0(), "scalar", f.meta(), data.filename().string());
  std::string bytes;
  bytes.reserve(f.grid().size() * 16);
  detail::append_values(bytes, f.values());
  detail::write_bytes(data, bytes);
  detail::write_bytes(path, h.dump(2) + "\n");
}

inline void write_field(const VectorField& vf, const std::filesystem::path& path) {
  const std::filesystem::path data = detail::data_path_for(path);
  const ojson h = detail::field_header(vf.grid(), vf.y0(), ojson::array({"S", "P"}), vf.s_field().meta(),
                                       data.filename().string());
  std::string bytes;
  bytes.reserve(vf.grid().size() * 32);
  detail::append_values(bytes, vf.s_field().values());
  detail::append_values(bytes, vf.p_field().values());
  detail::write_bytes(data, bytes);
  detail::write_bytes(path, h.dump(2) + "\n");
}

using AnyField = std::variant<ScalarField, VectorField>;

/// Inverse of write_field. The header is validated in full before the data
/// file is opened.
inline AnyField read_field(const std::filesystem::path& path) {
  ojson h;
  try {
    h = ojson::parse(detail::read_bytes(path));
  } catch (const ojson::parse_error& e) {
    throw FormatError("malformed field header '" + path.string() + "': " + e.what());
  }
  std::size_t n_u = 0, n_w = 0, n_comp = 0;
  double u_half = 0.0, w_half = 0.0, y0 = 0.0;
  std::string data_file;
  FieldMeta meta;
  try {
    if (!h.is_object() || !h.contains("version")) throw FormatError("missing version");
    const int version = h.at("version").get<int>();
    if (version != kFieldDumpVersion)
      throw FormatError("unsupported field dump version " + std::to_string(version) + " (expected " +
                        std::to_string(kFieldDumpVersion) + ")");
    n_u = h.at("n_u").get<std::size_t>();
    n_w = h.at("n_w").get<std::size_t>();
    u_half = h.at("u_half").get<double>();
    w_half = h.at("w_half").get<double>();
    y0 = h.at("y0").get<double>();
    if (h.at("dtype").get<std::string>() != "f64le") throw FormatError("unsupported dtype");
    const ojson& comp = h.at("components");
    if (comp.is_string() && comp.get<std::string>() == "scalar") {
      n_comp = 1;
    } else if (comp == ojson::array({"S", "P"})) {
      n_comp = 2;
    } else {
      throw FormatError("unknown component list " + comp.dump());
    }
    data_file = h.at("data_file").get<std::string>();
    if (data_file.empty() || std::filesystem::path(data_file).has_parent_path())
      throw FormatError("data_file must be a bare file name");
    if (h.contains("meta")) meta = detail::meta_from_json(h.at("meta"));
  } catch (const FormatError& e) {
    throw FormatError("field header '" + path.string() + "': " + e.what());
  } catch (const ojson::exception& e) {
    throw FormatError("malformed field header '" + path.string() + "': " + e.what());
  }

  std::optional<GridSpec> grid;
  try {
    grid.emplace(n_u, n_w, u_half, w_half);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("field header describes an invalid grid: ") + e.what());
  }
  if (h.at("du").get<double>() != grid->du() || h.at("dw").get<double>() != grid->dw())
    throw FormatError("field header: du/dw inconsistent with extents");

  const std::string bytes = detail::read_bytes(path.parent_path() / data_file);
  const std::size_t expected = n_u * n_w * n_comp * 16;
  if (bytes.size() != expected)
    throw FormatError("field data size mismatch: expected " + std::to_string(expected) + " bytes, found " +
                      std::to_string(bytes.size()));

  auto load = [&](std::size_t component) {
    ComplexGrid g(n_u, n_w);
    const char* base = bytes.data() + component * n_u * n_w * 16;
    for (std::size_t k = 0; k < g.size(); ++k)
      g.data()[k] = cplx{detail::load_f64le(base + 16 * k), detail::load_f64le(base + 16 * k + 8)};
    return g;
  };
  if (n_comp == 1) return ScalarField(*grid, load(0), y0, meta);
  return VectorField(ScalarField(*grid, load(0), y0, meta), ScalarField(*grid, load(1), y0, meta));
}

/// Binary PGM (P5). Samples scale linearly from [0, scale_max] (default: the
/// image maximum) onto [0, maxval]; 16-bit samples are big-endian.
inline void write_image(const RealImage& img, const std::filesystem::path& path, int depth = 8,
                        std::optional<double> scale_max = std::nullopt) {
  if (depth != 8 && depth != 16) throw std::invalid_argument("write_image: depth must be 8 or 16");
  if (img.rows() == 0 || img.cols() == 0) throw std::invalid_argument("write_image: empty image");
  double vmax = 0.0;
  for (double v : img.data()) {
    if (!(v >= 0.0)) throw std::invalid_argument("write_image: values must be finite and non-negative");
    vmax = std::max(vmax, v);
  }
  if (scale_max) vmax = *scale_max;
  const unsigned maxval = depth == 8 ? 255u : 65535u;
  std::string bytes = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n" +
                      std::to_string(maxval) + "\n";
  for (double v : img.data()) {
    unsigned s = 0;
    if (vmax > 0.0) s = static_cast<unsigned>(std::lround(std::min(v / vmax, 1.0) * maxval));
    if (depth == 8) {
      bytes.push_back(static_cast<char>(s));
    } else {
      bytes.push_back(static_cast<char>((s >> 8) & 0xFFu));
      bytes.push_back(static_cast<char>(s & 0xFFu));
    }
  }
  detail::write_bytes(path, bytes);
}

using CsvColumns = std::vector<std::pair<std::string, std::vector<double>>>;

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_csv(const CsvColumns& columns, const std::filesystem::path& path) {
  if (columns.empty()) throw std::invalid_argument("write_csv: no columns");
  const std::size_t rows = columns.front().second.size();
  for (const auto& [name, col] : columns)
    if (col.size() != rows) throw std::invalid_argument("write_csv: column '" + name + "' has mismatched length");
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) out += ',';
    out += columns[c].first;
  }
  out += '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out += ',';
      out += format_double(columns[c].second[r]);
    }
    out += '\n';
  }
  detail::write_bytes(path, out);
}

inline void write_report(const ojson& record, const std::filesystem::path& path) {
  detail::write_bytes(path, record.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Report records

inline ojson convention_json() {
  return {{"phase_origin", "+x"},
          {"positive_rotation", "+x→+w"},
          {"jones_basis", "(S along x, P along y)"},
          {"stokes", "s1 = P - S, s2 = D - A, s3 = R - L"},
          {"element_angles", "from x, counterclockwise looking along +z"},
          {"spectrometer", "kernel exp(-i*Omega*w)/sqrt(2pi); positive u-Omega covariance <=> q > 0"}};
}

inline ojson to_json(const VisibilityResult& r) {
  return {{"v", r.v}, {"p_max", r.p_max}, {"p_min", r.p_min}, {"phase_at_max", r.phase_at_max}};
}

inline ojson to_json(const PolScanResult& r) {
  return {{"v", r.v}, {"p_max", r.p_max}, {"p_min", r.p_min}, {"n_angles", r.angles.size()}};
}

inline ojson to_json(const ChargeEstimate& c) {
  return {{"magnitude", c.magnitude},   {"sign", c.sign},
          {"confidence", c.confidence}, {"dark_regions", c.dark_regions},
          {"covariance", c.covariance}, {"correlation", c.correlation},
          {"axis", {c.axis_u, c.axis_omega}}};
}

inline ojson to_json(const OracleReport& r) {
  return {{"parity", to_string(r.parity)}, {"charge", r.charge},
          {"extrapolated", r.extrapolated}, {"checked", r.checked},
          {"flagged", r.flagged},          {"min_alignment", r.min_alignment}};
}

inline ojson to_json(const StokesSample& s) { return {{"s0", s.s0}, {"s1", s.s1}, {"s2", s.s2}, {"s3", s.s3}}; }

inline ojson to_json(const GridSpec& g) {
  return {{"n_u", g.n_u()}, {"n_w", g.n_w()}, {"u_half", g.u_half()}, {"w_half", g.w_half()}};
}

}  // namespace stovlab
