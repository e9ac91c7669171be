#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "ssqlab/pipeline.hpp"

using namespace ssq;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ssqlab_pipe_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

MultichannelRecord noisy_record(std::size_t channels, std::size_t samples, std::uint64_t seed,
                                std::string label) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  MultichannelRecord rec;
  rec.sample_rate_hz = 250.0;
  rec.label = std::move(label);
  rec.channels = Grid2<double>(channels, samples);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t n = 0; n < samples; ++n)
      rec.channels(c, n) = std::sin(2.0 * 3.14159265358979 * (8.0 + 3.0 * c) * n / 250.0) + 0.3 * nd(rng);
  return rec;
}

PreprocessOptions small_options(TransformKind kind) {
  PreprocessOptions o;
  o.plan = {400, 150, true};
  o.transform = kind;
  o.frame_hop = 20;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("segment counts and starts", "[pipeline]") {
  SegmentPlan plan;
  REQUIRE(plan.count(240000) == 1050);
  REQUIRE(plan.start(1049) + plan.window_samples <= 240000);
  REQUIRE(plan.count(5000) == 1);
  REQUIRE(SegmentPlan{5000, 5000, true}.count(15000) == 3);
  REQUIRE(SegmentPlan{5000, 5000, true}.count(15001) == 3);
  REQUIRE_THROWS_MATCHES(plan.count(4999), ValidationError, MessageMatches(ContainsSubstring("shorter")));
  REQUIRE_THROWS_AS((SegmentPlan{100, 0, true}.count(1000)), ValidationError);
  REQUIRE_THROWS_AS((SegmentPlan{100, 101, true}.count(1000)), ValidationError);
}

TEST_CASE("disjoint segments tile the record", "[pipeline]") {
  MultichannelRecord rec;
  rec.channels = Grid2<double>(2, 15000);
  for (std::size_t n = 0; n < 15000; ++n) rec.channels(1, n) = static_cast<double>(n);
  const auto segs = segment(rec, {5000, 5000, true});
  REQUIRE(segs.size() == 2);
  REQUIRE(segs[1].size() == 3);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < 5000; ++i) REQUIRE(segs[1][s][i] == static_cast<double>(s * 5000 + i));
}

TEST_CASE("kept tails are zero padded", "[pipeline]") {
  const SegmentPlan plan{100, 60, false};
  REQUIRE(plan.count(250) == 4);
  REQUIRE(plan.count(220) == 3);
  REQUIRE(plan.count(40) == 1);
  std::vector<double> ch(250, 1.0);
  const auto tail = segment_samples(ch, plan, 3);
  for (std::size_t i = 0; i < 70; ++i) REQUIRE(tail[i] == 1.0);
  for (std::size_t i = 70; i < 100; ++i) REQUIRE(tail[i] == 0.0);
}

TEST_CASE("transform kinds parse and print", "[pipeline]") {
  for (auto k : {TransformKind::stft, TransformKind::cwt, TransformKind::sst_stft, TransformKind::sst_cwt})
    REQUIRE(parse_transform_kind(to_string(k)) == k);
  REQUIRE_THROWS_AS(parse_transform_kind("wigner"), ValidationError);
}

TEST_CASE("batch layout: ordering, offsets and image contents", "[pipeline]") {
  TempDir dir("batch");
  const auto a = noisy_record(3, 1000, 1, "left");
  const auto b = noisy_record(2, 700, 2, "right");
  const auto o = small_options(TransformKind::sst_stft);
  const auto man = preprocess_batch({record_input("a", a), record_input("b", b)}, o, dir / "t.bin", dir / "m.tsv");

  // a: 3 channels × 5 segments, b: 2 channels × 3 segments.
  REQUIRE(man.entries.size() == 21);
  REQUIRE(man.summary.at("images") == "21");
  REQUIRE(man.summary.at("failed_records") == "0");
  REQUIRE_FALSE(man.summary.contains("segments_per_channel"));
  std::size_t i = 0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t s = 0; s < 5; ++s, ++i) {
      REQUIRE(man.entries[i].record_id == "a");
      REQUIRE(man.entries[i].channel == c);
      REQUIRE(man.entries[i].segment == s);
      REQUIRE(man.entries[i].label == "left");
    }
  REQUIRE(man.entries[15].record_id == "b");

  const auto size = fs::file_size(dir / "t.bin");
  REQUIRE(std::to_string(size) == man.summary.at("tensor_bytes"));
  const auto back = read_manifest(dir / "m.tsv", size);
  REQUIRE(back.entries.size() == 21);
  REQUIRE(back.summary == man.summary);

  std::ifstream tensor(dir / "t.bin", std::ios::binary);
  for (std::size_t k : {0u, 7u, 20u}) {
    const auto& e = back.entries[k];
    const auto& rec = e.record_id == "a" ? a : b;
    const auto seg = segment_samples(rec.channels.row(e.channel), o.plan, e.segment);
    const auto expect = transform_segment(seg, rec.sample_rate_hz, o);
    const auto got = read_segment_image(tensor, e);
    REQUIRE(got.rows == expect.rows);
    REQUIRE(got.cols == expect.cols);
    REQUIRE(got.pixels == expect.pixels);
  }
}

TEST_CASE("linear and squeezed STFT images share dimensions", "[pipeline]") {
  std::vector<double> seg(400, 0.0);
  for (std::size_t n = 0; n < seg.size(); ++n) seg[n] = std::cos(0.4 * static_cast<double>(n));
  const auto lin = transform_segment(seg, 250.0, small_options(TransformKind::stft));
  const auto sq = transform_segment(seg, 250.0, small_options(TransformKind::sst_stft));
  REQUIRE(lin.rows == sq.rows);
  REQUIRE(lin.cols == sq.cols);
  REQUIRE(lin.cols == 20);

  const auto cw = transform_segment(seg, 250.0, small_options(TransformKind::cwt));
  const auto scw = transform_segment(seg, 250.0, small_options(TransformKind::sst_cwt));
  REQUIRE(cw.cols == 20);
  REQUIRE(cw.rows == scw.rows);
  REQUIRE(cw.cols == scw.cols);
}

TEST_CASE("a failing record is reported and the batch continues", "[pipeline]") {
  TempDir dir("fail");
  const auto good = noisy_record(2, 800, 3, "ok");
  const auto shortrec = noisy_record(2, 100, 4, "short");
  RecordInput broken{"broken", []() -> MultichannelRecord { throw IoError("disk on fire"); }};
  const auto man = preprocess_batch({record_input("g1", good), broken, record_input("s", shortrec), record_input("g2", good)},
                                    small_options(TransformKind::stft), dir / "t.bin", dir / "m.tsv");
  REQUIRE(man.summary.at("failed_records") == "2");
  const auto back = read_manifest(dir / "m.tsv", fs::file_size(dir / "t.bin"));
  std::size_t errors = 0;
  for (const auto& e : back.entries)
    if (!e.ok()) {
      ++errors;
      REQUIRE(e.status.rfind("error: ", 0) == 0);
    }
  REQUIRE(errors == 2);
  REQUIRE(back.entries[6].record_id == "broken");
  REQUIRE_THAT(back.entries[6].status, ContainsSubstring("disk on fire"));
  REQUIRE_THAT(back.entries[7].status, ContainsSubstring("shorter"));
  REQUIRE(back.entries.back().record_id == "g2");
}

TEST_CASE("batch output does not depend on the worker count", "[pipeline]") {
  TempDir dir("det");
  const std::vector<RecordInput> inputs{record_input("a", noisy_record(5, 900, 5, "x")),
                                        record_input("b", noisy_record(3, 900, 6, "y"))};
  auto o = small_options(TransformKind::sst_stft);
  o.workers = 1;
  preprocess_batch(inputs, o, dir / "t1.bin", dir / "m1.tsv");
  o.workers = 4;
  preprocess_batch(inputs, o, dir / "t4.bin", dir / "m4.tsv");
  REQUIRE(slurp(dir / "t1.bin") == slurp(dir / "t4.bin"));
  REQUIRE(slurp(dir / "m1.tsv") == slurp(dir / "m4.tsv"));
}

TEST_CASE("tampered manifests are rejected", "[pipeline]") {
  TempDir dir("tamper");
  preprocess_batch({record_input("a", noisy_record(2, 600, 7, "x"))}, small_options(TransformKind::stft), dir / "t.bin",
                   dir / "m.tsv");
  const auto size = fs::file_size(dir / "t.bin");
  REQUIRE_NOTHROW(read_manifest(dir / "m.tsv", size));
  REQUIRE_THROWS_AS(read_manifest(dir / "m.tsv", size + 4), IoError);

  std::string text = slurp(dir / "m.tsv");
  const std::string good = text;
  // Shift the second image's offset by one float.
  auto pos = text.find("\na\t0\t1\t");
  REQUIRE(pos != std::string::npos);
  pos = text.find('\t', pos + 7);
  const auto end = text.find('\t', pos + 1);
  const auto off = std::stoull(text.substr(pos + 1, end - pos - 1));
  text.replace(pos + 1, end - pos - 1, std::to_string(off + 4));
  std::ofstream(dir / "bad.tsv") << text;
  REQUIRE_THROWS_MATCHES(read_manifest(dir / "bad.tsv"), IoError, MessageMatches(ContainsSubstring("does not follow")));

  std::ofstream(dir / "hdr.tsv") << "record\tchannel\n";
  REQUIRE_THROWS_AS(read_manifest(dir / "hdr.tsv"), IoError);
  REQUIRE_THROWS_AS(read_manifest(dir / "none.tsv"), IoError);
}

TEST_CASE("batch parameter checks", "[pipeline]") {
  TempDir dir("params");
  auto o = small_options(TransformKind::stft);
  REQUIRE_THROWS_AS(preprocess_batch({}, o, dir / "t", dir / "m"), ValidationError);
  o.frame_hop = 0;
  REQUIRE_THROWS_AS(preprocess_batch({record_input("a", noisy_record(1, 500, 1, ""))}, o, dir / "t", dir / "m"),
                    ValidationError);
}
