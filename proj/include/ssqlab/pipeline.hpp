#pragma once

// Batch segmentation: multichannel records -> per-(record, channel, segment)
// float32 magnitude images concatenated into one tensor file, plus a TSV
// manifest addressing each image by byte offset.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssqlab/common.hpp"
#include "ssqlab/io.hpp"
#include "ssqlab/linear_tfr.hpp"
#include "ssqlab/synchrosqueeze.hpp"

namespace ssq {

struct SegmentPlan {
  std::size_t window_samples = 5000;
  std::size_t hop_samples = 224;
  /// When false, a trailing partial window is zero-padded and kept.
  bool drop_incomplete_tail = true;

  void validate() const {
    require(window_samples >= 1, "segment window must be positive");
    require(hop_samples >= 1 && hop_samples <= window_samples, "segment hop must lie in [1, window]");
  }

  [[nodiscard]] std::size_t count(std::size_t length) const {
    validate();
    if (length < window_samples) {
      require(!drop_incomplete_tail, "record of " + std::to_string(length) + " samples is shorter than the " +
                                         std::to_string(window_samples) + "-sample segment window");
      return 1;
    }
    std::size_t full = (length - window_samples) / hop_samples + 1;
    if (!drop_incomplete_tail && (full - 1) * hop_samples + window_samples < length) ++full;
    return full;
  }

  [[nodiscard]] std::size_t start(std::size_t index) const noexcept { return index * hop_samples; }
};

/// Window `index` of a channel; samples past the end read as zero.
inline std::vector<double> segment_samples(std::span<const double> channel, const SegmentPlan& plan,
                                           std::size_t index) {
  std::vector<double> out(plan.window_samples, 0.0);
  const std::size_t begin = plan.start(index);
  for (std::size_t i = 0; i < out.size() && begin + i < channel.size(); ++i) out[i] = channel[begin + i];
  return out;
}

/// All windows of every channel, indexed [channel][segment].
inline std::vector<std::vector<std::vector<double>>> segment(const MultichannelRecord& rec, const SegmentPlan& plan) {
  const std::size_t n = plan.count(rec.sample_count());
  std::vector<std::vector<std::vector<double>>> out(rec.channel_count());
  for (std::size_t c = 0; c < rec.channel_count(); ++c)
    for (std::size_t i = 0; i < n; ++i) out[c].push_back(segment_samples(rec.channels.row(c), plan, i));
  return out;
}

enum class TransformKind { stft, cwt, sst_stft, sst_cwt };

inline const char* to_string(TransformKind k) {
  switch (k) {
    case TransformKind::stft: return "stft";
    case TransformKind::cwt: return "cwt";
    case TransformKind::sst_stft: return "sst-stft";
    case TransformKind::sst_cwt: return "sst-cwt";
  }
  return "?";
}

inline TransformKind parse_transform_kind(const std::string& s) {
  if (s == "stft") return TransformKind::stft;
  if (s == "cwt") return TransformKind::cwt;
  if (s == "sst-stft") return TransformKind::sst_stft;
  if (s == "sst-cwt") return TransformKind::sst_cwt;
  throw ValidationError("unknown transform '" + s + "' (expected stft, cwt, sst-stft or sst-cwt)");
}

struct PreprocessOptions {
  SegmentPlan plan;
  TransformKind transform = TransformKind::sst_stft;
  /// STFT hop inside a segment; CWT planes keep every frame_hop-th column.
  std::size_t frame_hop = 224;
  StftParams stft;
  /// Scale range left at zero selects the default grid for the segment length.
  CwtParams cwt;
  SSTParams sst;
  std::size_t workers = 0;
};

/// Float32 magnitude image, rows = frequency bins, cols = frames.
struct SegmentImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> pixels;
};

namespace detail {

inline SegmentImage magnitude_image(const Grid2<cplx>& v, std::size_t col_step) {
  SegmentImage img;
  img.rows = v.rows();
  img.cols = (v.cols() + col_step - 1) / col_step;
  img.pixels.reserve(img.rows * img.cols);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); c += col_step) img.pixels.push_back(static_cast<float>(std::abs(v(r, c))));
  return img;
}

}  // namespace detail

inline SegmentImage transform_segment(std::span<const double> samples, double fs, const PreprocessOptions& o) {
  const SampledSignal x = make_real_signal(samples, fs);
  StftParams sp = o.stft;
  sp.hop_samples = o.frame_hop;
  CwtParams cp = o.cwt;
  if (cp.scale_min == 0.0 && cp.scale_max == 0.0) cp = default_scale_grid(fs, samples.size(), cp);
  switch (o.transform) {
    case TransformKind::stft: return detail::magnitude_image(stft(x, sp, 1).values, 1);
    case TransformKind::sst_stft: return detail::magnitude_image(sst_stft(x, sp, o.sst, 1).values, 1);
    case TransformKind::cwt: return detail::magnitude_image(cwt(x, cp, 1).values, o.frame_hop);
    case TransformKind::sst_cwt: return detail::magnitude_image(sst_cwt(x, cp, o.sst, 1).values, o.frame_hop);
  }
  throw ValidationError("unknown transform");
}

struct ManifestEntry {
  std::string record_id;
  std::size_t channel = 0;
  std::size_t segment = 0;
  std::string label;
  std::uint64_t byte_offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// "ok", or "error: <message>" for a record that could not be processed.
  std::string status = "ok";

  [[nodiscard]] bool ok() const { return status == "ok"; }
  [[nodiscard]] std::uint64_t byte_size() const { return ok() ? std::uint64_t{4} * rows * cols : 0; }
};

struct Manifest {
  std::map<std::string, std::string> summary;
  std::vector<ManifestEntry> entries;
};

/// A record to process; `load` runs inside the batch so its failures are isolated.
struct RecordInput {
  std::string id;
  std::function<MultichannelRecord()> load;
};

inline RecordInput record_input(std::string id, MultichannelRecord rec) {
  return {std::move(id), [r = std::move(rec)] { return r; }};
}

inline RecordInput record_input(const fs::path& path, RecordFormat format, double csv_sample_rate_hz = 0.0) {
  return {path.stem().string(), [=] { return read_record(path, format, csv_sample_rate_hz); }};
}

inline constexpr const char* kManifestColumns = "record_id\tchannel\tsegment\tlabel\tbyte_offset\trows\tcols\tstatus";

namespace detail {

inline std::string sanitize_field(std::string s) {
  for (auto& ch : s)
    if (ch == '\t' || ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

inline void write_manifest_line(std::ostream& os, const ManifestEntry& e) {
  os << sanitize_field(e.record_id) << '\t' << e.channel << '\t' << e.segment << '\t' << sanitize_field(e.label)
     << '\t' << e.byte_offset << '\t' << e.rows << '\t' << e.cols << '\t' << sanitize_field(e.status) << '\n';
}

}  // namespace detail

/// Runs the batch. Channels of a record are transformed in parallel, images are
/// written in (record, channel, segment) order by this thread alone, so the
/// tensor and manifest bytes do not depend on the worker count.
inline Manifest preprocess_batch(const std::vector<RecordInput>& inputs, const PreprocessOptions& o,
                                 const fs::path& tensor_path, const fs::path& manifest_path) {
  o.plan.validate();
  require(o.frame_hop >= 1, "frame hop must be at least 1 sample");
  require(!inputs.empty(), "no input records");
  const std::size_t workers = o.workers != 0 ? o.workers : default_worker_count();

  std::ofstream tensor(tensor_path, std::ios::binary | std::ios::trunc);
  if (!tensor) throw IoError("cannot write " + tensor_path.string());

  Manifest man;
  std::uint64_t offset = 0;
  std::size_t failed = 0;
  std::optional<double> batch_fs;
  std::optional<std::size_t> segments_per_channel;
  bool uniform_segments = true;

  for (const auto& in : inputs) {
    std::vector<ManifestEntry> entries;
    std::string blob;
    try {
      const MultichannelRecord rec = in.load();
      require(rec.channel_count() > 0 && rec.sample_count() > 0, "record is empty");
      require(!rec.complex_pairs, "preprocessing expects real channels");
      if (!batch_fs) batch_fs = rec.sample_rate_hz;
      require(rec.sample_rate_hz == *batch_fs, "sample rate differs from the rest of the batch");
      const std::size_t nseg = o.plan.count(rec.sample_count());
      const std::size_t nch = rec.channel_count();

      // One buffer per channel, computed in blocks of `workers` channels.
      for (std::size_t c0 = 0; c0 < nch; c0 += workers) {
        const std::size_t block = std::min(workers, nch - c0);
        std::vector<std::vector<SegmentImage>> images(block);
        parallel_for(
            block,
            [&](std::size_t b) {
              const auto channel = rec.channels.row(c0 + b);
              images[b].reserve(nseg);
              for (std::size_t s = 0; s < nseg; ++s) {
                const auto seg = segment_samples(channel, o.plan, s);
                images[b].push_back(transform_segment(seg, rec.sample_rate_hz, o));
              }
            },
            block);
        for (std::size_t b = 0; b < block; ++b)
          for (std::size_t s = 0; s < nseg; ++s) {
            const auto& img = images[b][s];
            ManifestEntry e{in.id, c0 + b, s, rec.label, offset + blob.size(), img.rows, img.cols, "ok"};
            for (float v : img.pixels) detail::put_le(blob, v);
            entries.push_back(std::move(e));
          }
      }
      if (!segments_per_channel)
        segments_per_channel = nseg;
      else if (*segments_per_channel != nseg)
        uniform_segments = false;
    } catch (const std::exception& ex) {
      ++failed;
      entries.clear();
      blob.clear();
      ManifestEntry e;
      e.record_id = in.id;
      e.byte_offset = offset;
      e.status = std::string("error: ") + ex.what();
      entries.push_back(std::move(e));
    }
    tensor.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    offset += blob.size();
    for (auto& e : entries) man.entries.push_back(std::move(e));
  }
  tensor.close();
  if (!tensor) throw IoError("write failed for " + tensor_path.string());

  std::size_t images = 0;
  for (const auto& e : man.entries) images += e.ok() ? 1 : 0;
  man.summary["records"] = std::to_string(inputs.size());
  man.summary["failed_records"] = std::to_string(failed);
  man.summary["images"] = std::to_string(images);
  man.summary["tensor_bytes"] = std::to_string(offset);
  man.summary["transform"] = to_string(o.transform);
  man.summary["window_samples"] = std::to_string(o.plan.window_samples);
  man.summary["hop_samples"] = std::to_string(o.plan.hop_samples);
  man.summary["frame_hop"] = std::to_string(o.frame_hop);
  man.summary["dtype"] = "float32-le";
  if (segments_per_channel && uniform_segments)
    man.summary["segments_per_channel"] = std::to_string(*segments_per_channel);

  std::ofstream mout(manifest_path, std::ios::trunc);
  if (!mout) throw IoError("cannot write " + manifest_path.string());
  for (const auto& [k, v] : man.summary) mout << "# " << k << '=' << v << '\n';
  mout << kManifestColumns << '\n';
  for (const auto& e : man.entries) detail::write_manifest_line(mout, e);
  if (!mout) throw IoError("write failed for " + manifest_path.string());
  return man;
}

/// Parses a manifest and checks that the ok entries tile the tensor contiguously
/// from offset 0; pass the tensor size to check the end as well.
inline Manifest read_manifest(const fs::path& path, std::optional<std::uint64_t> tensor_bytes = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Manifest man;
  std::string line;
  std::size_t line_no = 0;
  bool seen_columns = false;
  std::uint64_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) man.summary[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!seen_columns) {
      if (line != kManifestColumns) throw IoError(path.string() + ": unexpected manifest header");
      seen_columns = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) f.push_back(cell);
    if (f.size() != 8) throw IoError(path.string() + ": line " + std::to_string(line_no) + " needs 8 fields");
    ManifestEntry e;
    e.record_id = f[0];
    e.channel = static_cast<std::size_t>(detail::parse_uint(f[1], "channel"));
    e.segment = static_cast<std::size_t>(detail::parse_uint(f[2], "segment"));
    e.label = f[3];
    e.byte_offset = detail::parse_uint(f[4], "byte_offset");
    e.rows = static_cast<std::size_t>(detail::parse_uint(f[5], "rows"));
    e.cols = static_cast<std::size_t>(detail::parse_uint(f[6], "cols"));
    e.status = f[7];
    if (e.ok()) {
      if (e.byte_offset != expected)
        throw IoError(path.string() + ": line " + std::to_string(line_no) + " offset " +
                      std::to_string(e.byte_offset) + " does not follow the previous image (expected " +
                      std::to_string(expected) + ")");
      if (e.rows == 0 || e.cols == 0) throw IoError(path.string() + ": line " + std::to_string(line_no) + " has an empty image");
      expected += e.byte_size();
    }
    man.entries.push_back(std::move(e));
  }
  if (!seen_columns) throw IoError(path.string() + ": missing manifest header");
  if (tensor_bytes && *tensor_bytes != expected)
    throw IoError(path.string() + ": images cover " + std::to_string(expected) + " bytes but the tensor holds " +
                  std::to_string(*tensor_bytes));
  return man;
}

inline SegmentImage read_segment_image(std::istream& tensor, const ManifestEntry& e) {
  require(e.ok(), "manifest entry has no image");
  SegmentImage img{e.rows, e.cols, std::vector<float>(e.rows * e.cols)};
  std::string raw(e.byte_size(), '\0');
  tensor.seekg(static_cast<std::streamoff>(e.byte_offset));
  tensor.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!tensor) throw IoError("tensor file is shorter than the manifest claims");
  detail::LeReader rd(raw, "tensor");
  for (auto& v : img.pixels) v = rd.get<float>();
  return img;
}

}  // namespace ssq
