#pragma once

// File formats:
//   rawf32  little-endian float32 blob, channel-major, plus a "<path>.hdr" text
//           sidecar of key=value lines (version, channels, samples,
//           sample_rate_hz, label, complex).
//   csv     one column per channel, optional header row.
//   TFR1    binary plane container, see write_tfr1.
//   PGM     8-bit grayscale render of a plane magnitude.
//   ridges  CSV with columns ridge,frame_index,time_s,freq_hz,magnitude,bin.

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssqlab/common.hpp"
#include "ssqlab/linear_tfr.hpp"
#include "ssqlab/ridge_reconstruct.hpp"
#include "ssqlab/signal_model.hpp"
#include "ssqlab/synchrosqueeze.hpp"

namespace ssq {

namespace fs = std::filesystem;

/// Real multichannel recording, channels[channel][sample].
struct MultichannelRecord {
  Grid2<double> channels;
  double sample_rate_hz = 1.0;
  std::string label;
  /// Consecutive channel pairs hold (real, imaginary) parts of one complex channel.
  bool complex_pairs = false;

  [[nodiscard]] std::size_t channel_count() const noexcept { return channels.rows(); }
  [[nodiscard]] std::size_t sample_count() const noexcept { return channels.cols(); }
  [[nodiscard]] std::size_t signal_count() const noexcept {
    return complex_pairs ? channel_count() / 2 : channel_count();
  }
};

enum class RecordFormat { csv, rawf32 };

inline RecordFormat record_format_from_path(const fs::path& p) {
  return p.extension() == ".csv" ? RecordFormat::csv : RecordFormat::rawf32;
}

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline double parse_double(std::string_view text, const std::string& what) {
  std::string s(text);
  // trim
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) throw IoError(what + ": empty value");
  s = s.substr(b, e - b + 1);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw IoError(what + ": not a number '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint(std::string_view text, const std::string& what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw IoError(what + ": not an integer");
  return v;
}

inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline std::string serialize_key_values(const std::map<std::string, std::string>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

// Little-endian encoding helpers.
template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

class LeReader {
 public:
  LeReader(const std::string& data, std::string context) : data_(data), context_(std::move(context)) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) throw IoError(context_ + ": truncated file");
    std::array<char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
  }

  std::string bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError(context_ + ": truncated file");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  [[nodiscard]] bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::string context_;
  std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace detail

inline fs::path sidecar_path(const fs::path& data_path) { return fs::path(data_path.string() + ".hdr"); }

inline void write_rawf32(const MultichannelRecord& rec, const fs::path& path) {
  std::string blob;
  blob.reserve(rec.channels.size() * 4);
  for (double v : rec.channels.data()) detail::put_le(blob, static_cast<float>(v));
  detail::write_file_bytes(path, blob);
  std::map<std::string, std::string> hdr{
      {"version", "1"},
      {"channels", std::to_string(rec.channel_count())},
      {"samples", std::to_string(rec.sample_count())},
      {"sample_rate_hz", detail::format_double(rec.sample_rate_hz)},
      {"label", rec.label},
      {"complex", rec.complex_pairs ? "1" : "0"},
  };
  detail::write_file_bytes(sidecar_path(path), detail::serialize_key_values(hdr));
}

inline MultichannelRecord read_rawf32(const fs::path& path) {
  std::ifstream hin(sidecar_path(path));
  if (!hin) throw IoError("missing header " + sidecar_path(path).string());
  const auto hdr = detail::parse_key_values(hin);
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = hdr.find(key);
    if (it == hdr.end()) throw IoError("header " + sidecar_path(path).string() + " lacks '" + key + "'");
    return it->second;
  };
  if (field("version") != "1") throw IoError("unsupported rawf32 header version " + field("version"));
  const auto channels = detail::parse_uint(field("channels"), "channels");
  const auto samples = detail::parse_uint(field("samples"), "samples");
  MultichannelRecord rec;
  rec.sample_rate_hz = detail::parse_double(field("sample_rate_hz"), "sample_rate_hz");
  if (!(rec.sample_rate_hz > 0)) throw IoError("sample_rate_hz must be positive");
  if (auto it = hdr.find("label"); it != hdr.end()) rec.label = it->second;
  if (auto it = hdr.find("complex"); it != hdr.end()) rec.complex_pairs = it->second == "1";
  if (channels == 0 || samples == 0) throw IoError("record has no samples");
  if (rec.complex_pairs && channels % 2 != 0) throw IoError("complex record needs an even channel count");

  const std::string blob = detail::read_file_bytes(path);
  if (blob.size() != channels * samples * 4)
    throw IoError("data size " + std::to_string(blob.size()) + " does not match header (" +
                  std::to_string(channels * samples * 4) + " bytes expected)");
  detail::LeReader rd(blob, path.string());
  rec.channels = Grid2<double>(channels, samples);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t s = 0; s < samples; ++s) {
      const float v = rd.get<float>();
      if (!std::isfinite(v))
        throw IoError("non-finite sample at channel " + std::to_string(c) + ", sample " + std::to_string(s));
      rec.channels(c, s) = v;
    }
  return rec;
}

/// CSV: one column per channel; a first row that does not parse as numbers is a header.
inline MultichannelRecord read_csv(const fs::path& path, double sample_rate_hz, std::string label = {}) {
  require(sample_rate_hz > 0, "CSV input needs a positive sample rate");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    std::vector<double> values;
    bool numeric = true;
    for (const auto& field : fields) {
      try {
        values.push_back(detail::parse_double(field, "csv"));
      } catch (const IoError&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = fields.size();  // header row
        continue;
      }
      throw IoError(path.string() + ": row " + std::to_string(line_no) + " has a non-numeric field");
    }
    if (width == 0) width = values.size();
    if (values.size() != width)
      throw IoError(path.string() + ": row " + std::to_string(line_no) + " has " + std::to_string(values.size()) +
                    " fields, expected " + std::to_string(width));
    for (std::size_t c = 0; c < values.size(); ++c)
      if (!std::isfinite(values[c]))
        throw IoError(path.string() + ": non-finite value at row " + std::to_string(line_no) + ", column " +
                      std::to_string(c + 1));
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw IoError(path.string() + ": no data rows");
  MultichannelRecord rec;
  rec.sample_rate_hz = sample_rate_hz;
  rec.label = std::move(label);
  rec.channels = Grid2<double>(width, rows.size());
  for (std::size_t s = 0; s < rows.size(); ++s)
    for (std::size_t c = 0; c < width; ++c) rec.channels(c, s) = rows[s][c];
  return rec;
}

inline void write_csv(const MultichannelRecord& rec, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t c = 0; c < rec.channel_count(); ++c) out << (c ? "," : "") << "ch" << c;
  out << '\n' << std::setprecision(17);
  for (std::size_t s = 0; s < rec.sample_count(); ++s) {
    for (std::size_t c = 0; c < rec.channel_count(); ++c) out << (c ? "," : "") << rec.channels(c, s);
    out << '\n';
  }
}

inline MultichannelRecord read_record(const fs::path& path, RecordFormat format, double csv_sample_rate_hz = 0.0,
                                      std::string csv_label = {}) {
  return format == RecordFormat::csv ? read_csv(path, csv_sample_rate_hz, std::move(csv_label)) : read_rawf32(path);
}

inline void write_record(const MultichannelRecord& rec, const fs::path& path, RecordFormat format) {
  if (format == RecordFormat::csv)
    write_csv(rec, path);
  else
    write_rawf32(rec, path);
}

/// Signal index i of a record (a channel, or a channel pair for complex records).
inline SampledSignal signal_from_record(const MultichannelRecord& rec, std::size_t index) {
  require(index < rec.signal_count(), "signal index out of range");
  SampledSignal s;
  s.sample_rate_hz = rec.sample_rate_hz;
  s.samples.resize(rec.sample_count());
  if (rec.complex_pairs) {
    for (std::size_t n = 0; n < s.samples.size(); ++n)
      s.samples[n] = {rec.channels(2 * index, n), rec.channels(2 * index + 1, n)};
  } else {
    s.is_real = true;
    for (std::size_t n = 0; n < s.samples.size(); ++n) s.samples[n] = rec.channels(index, n);
  }
  return s;
}

/// Packs signals of equal length and rate into one record.
inline MultichannelRecord record_from_signals(const std::vector<std::vector<cplx>>& signals, double fs,
                                              bool is_real, std::string label = {}) {
  require(!signals.empty(), "no signals to pack");
  const std::size_t n = signals.front().size();
  for (const auto& s : signals) require(s.size() == n, "signals differ in length");
  MultichannelRecord rec;
  rec.sample_rate_hz = fs;
  rec.label = std::move(label);
  rec.complex_pairs = !is_real;
  rec.channels = Grid2<double>(is_real ? signals.size() : 2 * signals.size(), n);
  for (std::size_t i = 0; i < signals.size(); ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (is_real) {
        rec.channels(i, k) = signals[i][k].real();
      } else {
        rec.channels(2 * i, k) = signals[i][k].real();
        rec.channels(2 * i + 1, k) = signals[i][k].imag();
      }
    }
  return rec;
}

inline MultichannelRecord record_from_signal(const SampledSignal& s, std::string label = {}) {
  return record_from_signals({s.samples}, s.sample_rate_hz, s.is_real, std::move(label));
}

// ---------------------------------------------------------------------------
// TFR1

/// In-memory image of a TFR1 file.
///
/// Layout (little-endian): "TFR1" | u32 kind length | kind | u64 rows | u64 cols |
/// u8 is_complex | f64 time axis[cols] | f64 freq axis[rows] | u32 meta length |
/// meta (key=value lines) | payload row-major, complex64 (re, im float32) or float32.
struct PlaneFile {
  std::string kind;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_complex = true;
  std::vector<double> time_axis;
  std::vector<double> freq_axis;
  std::map<std::string, std::string> meta;
  std::vector<std::complex<float>> complex_payload;
  std::vector<float> real_payload;

  friend bool operator==(const PlaneFile&, const PlaneFile&) = default;
};

inline std::string encode_tfr1(const PlaneFile& f) {
  require(f.time_axis.size() == f.cols && f.freq_axis.size() == f.rows, "TFR1: axis lengths do not match");
  require(f.is_complex ? f.complex_payload.size() == f.rows * f.cols : f.real_payload.size() == f.rows * f.cols,
          "TFR1: payload size does not match");
  std::string out = "TFR1";
  detail::put_le(out, static_cast<std::uint32_t>(f.kind.size()));
  out += f.kind;
  detail::put_le(out, static_cast<std::uint64_t>(f.rows));
  detail::put_le(out, static_cast<std::uint64_t>(f.cols));
  detail::put_le(out, static_cast<std::uint8_t>(f.is_complex ? 1 : 0));
  for (double t : f.time_axis) detail::put_le(out, t);
  for (double v : f.freq_axis) detail::put_le(out, v);
  const std::string meta = detail::serialize_key_values(f.meta);
  detail::put_le(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  if (f.is_complex) {
    for (const auto& v : f.complex_payload) {
      detail::put_le(out, v.real());
      detail::put_le(out, v.imag());
    }
  } else {
    for (float v : f.real_payload) detail::put_le(out, v);
  }
  return out;
}

inline PlaneFile decode_tfr1(const std::string& bytes, const std::string& context = "TFR1") {
  detail::LeReader rd(bytes, context);
  if (rd.bytes(4) != "TFR1") throw IoError(context + ": bad magic");
  PlaneFile f;
  f.kind = rd.bytes(rd.get<std::uint32_t>());
  f.rows = rd.get<std::uint64_t>();
  f.cols = rd.get<std::uint64_t>();
  f.is_complex = rd.get<std::uint8_t>() != 0;
  f.time_axis.resize(f.cols);
  for (auto& t : f.time_axis) t = rd.get<double>();
  f.freq_axis.resize(f.rows);
  for (auto& v : f.freq_axis) v = rd.get<double>();
  std::istringstream meta(rd.bytes(rd.get<std::uint32_t>()));
  f.meta = detail::parse_key_values(meta);
  const std::size_t count = f.rows * f.cols;
  if (f.is_complex) {
    f.complex_payload.resize(count);
    for (auto& v : f.complex_payload) {
      const float re = rd.get<float>();
      const float im = rd.get<float>();
      v = {re, im};
    }
  } else {
    f.real_payload.resize(count);
    for (auto& v : f.real_payload) v = rd.get<float>();
  }
  if (!rd.at_end()) throw IoError(context + ": trailing bytes after payload");
  return f;
}

inline void write_tfr1(const PlaneFile& f, const fs::path& path) { detail::write_file_bytes(path, encode_tfr1(f)); }
inline PlaneFile read_tfr1(const fs::path& path) { return decode_tfr1(detail::read_file_bytes(path), path.string()); }

namespace detail {

inline std::string get_meta(const PlaneFile& f, const std::string& key) {
  auto it = f.meta.find(key);
  if (it == f.meta.end()) throw IoError("TFR1 metadata lacks '" + key + "'");
  return it->second;
}

inline double meta_double(const PlaneFile& f, const std::string& key) {
  return parse_double(get_meta(f, key), key);
}

inline std::size_t meta_size(const PlaneFile& f, const std::string& key) {
  return static_cast<std::size_t>(parse_uint(get_meta(f, key), key));
}

inline void fill_payload(PlaneFile& f, const Grid2<cplx>& values, bool magnitude_only) {
  f.is_complex = !magnitude_only;
  f.complex_payload.clear();
  f.real_payload.clear();
  if (magnitude_only) {
    f.real_payload.reserve(values.size());
    for (const auto& v : values.data()) f.real_payload.push_back(static_cast<float>(std::abs(v)));
  } else {
    f.complex_payload.reserve(values.size());
    for (const auto& v : values.data())
      f.complex_payload.emplace_back(static_cast<float>(v.real()), static_cast<float>(v.imag()));
  }
}

inline Grid2<cplx> payload_values(const PlaneFile& f) {
  Grid2<cplx> g(f.rows, f.cols);
  for (std::size_t i = 0; i < g.size(); ++i)
    g.data()[i] = f.is_complex ? cplx(f.complex_payload[i].real(), f.complex_payload[i].imag())
                               : cplx(f.real_payload[i], 0.0);
  return g;
}

inline void put_window_meta(PlaneFile& f, const StftParams& p) {
  f.meta["window_length"] = std::to_string(p.window.length_samples);
  f.meta["window_nw"] = format_double(p.window.time_half_bandwidth);
  f.meta["fft_length"] = std::to_string(p.resolved_fft_length());
}

inline void put_wavelet_meta(PlaneFile& f, const CwtParams& p) {
  f.meta["gmw_gamma"] = format_double(p.wavelet.gamma_symmetry);
  f.meta["gmw_beta"] = format_double(p.wavelet.beta_decay);
  f.meta["voices_per_octave"] = std::to_string(p.voices_per_octave);
  f.meta["scale_min"] = format_double(p.scale_min);
  f.meta["scale_max"] = format_double(p.scale_max);
}

inline StftParams window_from_meta(const PlaneFile& f) {
  StftParams p;
  p.window.length_samples = meta_size(f, "window_length");
  p.window.time_half_bandwidth = meta_double(f, "window_nw");
  p.fft_length = meta_size(f, "fft_length");
  p.hop_samples = meta_size(f, "hop_samples");
  return p;
}

inline CwtParams wavelet_from_meta(const PlaneFile& f) {
  CwtParams p;
  p.wavelet.gamma_symmetry = meta_double(f, "gmw_gamma");
  p.wavelet.beta_decay = meta_double(f, "gmw_beta");
  p.voices_per_octave = meta_size(f, "voices_per_octave");
  p.scale_min = meta_double(f, "scale_min");
  p.scale_max = meta_double(f, "scale_max");
  return p;
}

}  // namespace detail

/// TFRPlane -> TFR1 image. `source` carries the transform settings for provenance.
inline PlaneFile to_plane_file(const TFRPlane& t, const StftParams* stft_source = nullptr,
                               const CwtParams* cwt_source = nullptr, bool magnitude_only = false) {
  PlaneFile f;
  f.kind = to_string(t.kind);
  f.rows = t.rows();
  f.cols = t.cols();
  f.time_axis = t.time_axis_s;
  f.freq_axis = t.freq_axis_hz;
  f.meta["sample_rate_hz"] = detail::format_double(t.sample_rate_hz);
  f.meta["is_real"] = t.is_real ? "1" : "0";
  f.meta["row_measure"] = detail::format_double(t.row_measure);
  f.meta["hop_samples"] = std::to_string(t.hop_samples);
  f.meta["boundary_cols"] = std::to_string(t.max_boundary_cols());
  if (stft_source != nullptr) detail::put_window_meta(f, *stft_source);
  if (cwt_source != nullptr) detail::put_wavelet_meta(f, *cwt_source);
  detail::fill_payload(f, t.values, magnitude_only);
  return f;
}

inline TFRPlane tfr_from_plane_file(const PlaneFile& f) {
  TFRPlane t;
  if (f.kind == "stft")
    t.kind = TfrKind::stft;
  else if (f.kind == "cwt")
    t.kind = TfrKind::cwt;
  else
    throw IoError("TFR1 kind '" + f.kind + "' is not a linear transform");
  t.values = detail::payload_values(f);
  t.time_axis_s = f.time_axis;
  t.freq_axis_hz = f.freq_axis;
  t.sample_rate_hz = detail::meta_double(f, "sample_rate_hz");
  t.is_real = detail::get_meta(f, "is_real") == "1";
  t.row_measure = detail::meta_double(f, "row_measure");
  t.hop_samples = detail::meta_size(f, "hop_samples");
  t.boundary_cols.assign(f.rows, detail::meta_size(f, "boundary_cols"));
  if (t.kind == TfrKind::cwt && f.meta.contains("gmw_gamma")) {
    const auto cp = detail::wavelet_from_meta(f);
    std::vector<double> scales;
    for (double hz : f.freq_axis) scales.push_back(cp.wavelet.peak_omega() * t.sample_rate_hz / (kTwoPi * hz));
    t.scale_axis = std::move(scales);
  }
  return t;
}

inline PlaneFile to_plane_file(const SSTPlane& s, bool magnitude_only = false) {
  PlaneFile f;
  f.kind = to_string(s.kind);
  f.rows = s.rows();
  f.cols = s.cols();
  f.time_axis = s.time_axis_s;
  f.freq_axis = s.eta_axis_hz;
  f.meta["sample_rate_hz"] = detail::format_double(s.sample_rate_hz);
  f.meta["is_real"] = s.is_real ? "1" : "0";
  f.meta["hop_samples"] = std::to_string(s.hop_samples);
  f.meta["boundary_cols"] = std::to_string(s.boundary_cols);
  f.meta["freq_lo_hz"] = detail::format_double(s.params.freq_range->first);
  f.meta["freq_hi_hz"] = detail::format_double(s.params.freq_range->second);
  f.meta["spacing"] = to_string(s.spacing());
  f.meta["kernel"] = to_string(s.params.kernel);
  f.meta["epsilon_hz"] = detail::format_double(s.params.epsilon_width);
  f.meta["gamma_value"] = detail::format_double(s.params.gamma_threshold.value);
  f.meta["gamma_relative"] = s.params.gamma_threshold.relative ? "1" : "0";
  f.meta["deposited_count"] = std::to_string(s.deposited_count);
  f.meta["dropped_count"] = std::to_string(s.dropped_count);
  if (s.kind == SstKind::sst_stft)
    detail::put_window_meta(f, s.stft_source);
  else
    detail::put_wavelet_meta(f, s.cwt_source);
  detail::fill_payload(f, s.values, magnitude_only);
  return f;
}

inline SSTPlane sst_from_plane_file(const PlaneFile& f) {
  SSTPlane s;
  if (f.kind == "sst-stft")
    s.kind = SstKind::sst_stft;
  else if (f.kind == "sst-cwt")
    s.kind = SstKind::sst_cwt;
  else
    throw IoError("TFR1 kind '" + f.kind + "' is not a synchrosqueezed plane");
  s.values = detail::payload_values(f);
  s.time_axis_s = f.time_axis;
  s.eta_axis_hz = f.freq_axis;
  s.sample_rate_hz = detail::meta_double(f, "sample_rate_hz");
  s.is_real = detail::get_meta(f, "is_real") == "1";
  s.hop_samples = detail::meta_size(f, "hop_samples");
  s.boundary_cols = detail::meta_size(f, "boundary_cols");
  s.params.freq_range = std::make_pair(detail::meta_double(f, "freq_lo_hz"), detail::meta_double(f, "freq_hi_hz"));
  s.params.n_out_bins = f.rows;
  s.params.spacing = detail::get_meta(f, "spacing") == "log" ? BinSpacing::logarithmic : BinSpacing::linear;
  s.params.kernel = detail::get_meta(f, "kernel") == "gaussian" ? Kernel::gaussian : Kernel::hard;
  s.params.epsilon_width = detail::meta_double(f, "epsilon_hz");
  s.params.gamma_threshold = {detail::meta_double(f, "gamma_value"), detail::get_meta(f, "gamma_relative") == "1"};
  s.deposited_count = detail::meta_size(f, "deposited_count");
  s.dropped_count = detail::meta_size(f, "dropped_count");
  if (s.kind == SstKind::sst_stft) {
    s.stft_source = detail::window_from_meta(f);
  } else {
    s.cwt_source = detail::wavelet_from_meta(f);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Ridges CSV

inline void write_ridges_csv(const SSTPlane& s, const std::vector<Ridge>& ridges, std::ostream& out) {
  out << "ridge,frame_index,time_s,freq_hz,magnitude,bin\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ridges.size(); ++i) {
    const auto& r = ridges[i];
    for (std::size_t m = 0; m < r.bin_track.size(); ++m)
      out << i << ',' << m << ',' << s.time_axis_s[m] << ',' << r.freq_track_hz[m] << ','
          << std::abs(s.values(r.bin_track[m], m)) << ',' << r.bin_track[m] << '\n';
  }
}

inline std::vector<Ridge> read_ridges_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("ridge CSV is empty");
  std::vector<Ridge> ridges;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw IoError("ridge CSV row " + std::to_string(line_no) + " needs 6 fields");
    const auto idx = detail::parse_uint(f[0], "ridge");
    const auto frame = detail::parse_uint(f[1], "frame_index");
    if (idx > ridges.size()) throw IoError("ridge CSV row " + std::to_string(line_no) + ": ridge index skips");
    if (idx == ridges.size()) ridges.emplace_back();
    auto& r = ridges[idx];
    if (frame != r.bin_track.size())
      throw IoError("ridge CSV row " + std::to_string(line_no) + ": frames must be consecutive");
    r.freq_track_hz.push_back(detail::parse_double(f[3], "freq_hz"));
    const double mag = detail::parse_double(f[4], "magnitude");
    r.energy += mag;
    r.bin_track.push_back(static_cast<std::size_t>(detail::parse_uint(f[5], "bin")));
  }
  return ridges;
}

// ---------------------------------------------------------------------------
// Images

enum class ImageScale { linear, log };
enum class ImageNormalize { percentile99, max };

/// 8-bit grayscale pixels, row 0 is the top (highest frequency).
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

inline GrayImage render_magnitude(const Grid2<cplx>& values, ImageScale scale, ImageNormalize normalize,
                                  double dynamic_range_db = 80.0) {
  require(!values.empty(), "cannot render an empty plane");
  GrayImage img;
  img.height = values.rows();
  img.width = values.cols();
  img.pixels.assign(img.width * img.height, 0);
  std::vector<double> mags(values.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    mags[i] = std::abs(values.data()[i]);
    peak = std::max(peak, mags[i]);
  }
  if (!(peak > 0.0)) return img;
  double ref = peak;
  if (normalize == ImageNormalize::percentile99) {
    std::vector<double> sorted = mags;
    const std::size_t k = std::min(sorted.size() - 1, static_cast<std::size_t>(0.99 * static_cast<double>(sorted.size())));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    if (sorted[k] > 0.0) ref = sorted[k];
  }
  const double delta = 1e-12 * peak;
  const double ref_db = 20.0 * std::log10(ref + delta);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < values.cols(); ++c) {
      const double m = mags[r * values.cols() + c];
      double u = 0.0;
      if (scale == ImageScale::linear) {
        u = m / ref;
      } else {
        const double db = 20.0 * std::log10(m + delta);
        u = (db - (ref_db - dynamic_range_db)) / dynamic_range_db;
      }
      u = std::clamp(u, 0.0, 1.0);
      img.pixels[(values.rows() - 1 - r) * values.cols() + c] = static_cast<std::uint8_t>(std::lround(u * 255.0));
    }
  }
  return img;
}

inline void write_pgm(const GrayImage& img, const fs::path& path) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  detail::write_file_bytes(path, out);
}

inline GrayImage read_pgm(const fs::path& path) {
  const std::string bytes = detail::read_file_bytes(path);
  std::istringstream in(bytes);
  std::string magic;
  GrayImage img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255) throw IoError(path.string() + ": not an 8-bit P5 PGM");
  in.get();
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw IoError(path.string() + ": truncated PGM");
  return img;
}

template <typename Plane>
GrayImage export_image(const Plane& plane, const fs::path& path, ImageScale scale = ImageScale::log,
                       ImageNormalize normalize = ImageNormalize::max) {
  auto img = render_magnitude(plane.values, scale, normalize);
  write_pgm(img, path);
  return img;
}

}  // namespace ssq
