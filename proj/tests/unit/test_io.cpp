#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "oracles.hpp"
#include "ssqlab/io.hpp"

using namespace ssq;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::MessageMatches;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ssqlab_io_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

MultichannelRecord random_record(std::size_t channels, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  MultichannelRecord rec;
  rec.sample_rate_hz = 250.0;
  rec.label = "subject 3";
  rec.channels = Grid2<double>(channels, samples);
  for (auto& v : rec.channels.data()) v = nd(rng);  // float-representable values
  return rec;
}

}  // namespace

TEST_CASE("rawf32 round trip is bit exact", "[io]") {
  TempDir dir("raw");
  const auto rec = random_record(16, 4000, 1);
  write_rawf32(rec, dir / "a.f32");
  REQUIRE(fs::file_size(dir / "a.f32") == 16 * 4000 * 4);
  const auto back = read_rawf32(dir / "a.f32");
  REQUIRE(back.channels == rec.channels);
  REQUIRE(back.sample_rate_hz == 250.0);
  REQUIRE(back.label == "subject 3");
  REQUIRE_FALSE(back.complex_pairs);

  write_rawf32(back, dir / "b.f32");
  REQUIRE(detail::read_file_bytes(dir / "a.f32") == detail::read_file_bytes(dir / "b.f32"));
  REQUIRE(detail::read_file_bytes(sidecar_path(dir / "a.f32")) == detail::read_file_bytes(sidecar_path(dir / "b.f32")));
}

TEST_CASE("complex signals survive a record round trip", "[io]") {
  TempDir dir("cplx");
  const auto x = synthesize_mcs(preset("paper-3comp"));
  const auto rec = record_from_signal(x, "preset");
  REQUIRE(rec.complex_pairs);
  REQUIRE(rec.channel_count() == 2);
  write_record(rec, dir / "x.f32", RecordFormat::rawf32);
  const auto y = signal_from_record(read_record(dir / "x.f32", RecordFormat::rawf32), 0);
  REQUIRE_FALSE(y.is_real);
  REQUIRE(y.size() == x.size());
  for (std::size_t n = 0; n < x.size(); ++n) REQUIRE(std::abs(y.samples[n] - x.samples[n]) < 1e-6);
}

TEST_CASE("rawf32 reports size mismatches and bad samples", "[io]") {
  TempDir dir("rawbad");
  auto rec = random_record(3, 10, 2);
  write_rawf32(rec, dir / "a.f32");
  std::string blob = detail::read_file_bytes(dir / "a.f32");
  write_text(dir / "a.f32", blob.substr(0, blob.size() - 4));
  REQUIRE_THROWS_MATCHES(read_rawf32(dir / "a.f32"), IoError, MessageMatches(ContainsSubstring("does not match header")));

  rec.channels(2, 7) = std::numeric_limits<double>::quiet_NaN();
  write_rawf32(rec, dir / "b.f32");
  REQUIRE_THROWS_MATCHES(read_rawf32(dir / "b.f32"), IoError,
                         MessageMatches(ContainsSubstring("channel 2, sample 7")));

  fs::remove(sidecar_path(dir / "b.f32"));
  REQUIRE_THROWS_AS(read_rawf32(dir / "b.f32"), IoError);
}

TEST_CASE("CSV with and without a header row", "[io]") {
  TempDir dir("csv");
  write_text(dir / "h.csv", "fp1,fp2\n1.5,-2\n3,4e-1\n");
  write_text(dir / "n.csv", "1.5,-2\r\n3,4e-1\r\n\n");
  for (const char* name : {"h.csv", "n.csv"}) {
    const auto rec = read_csv(dir / name, 128.0, "x");
    REQUIRE(rec.channel_count() == 2);
    REQUIRE(rec.sample_count() == 2);
    REQUIRE(rec.channels(0, 0) == 1.5);
    REQUIRE(rec.channels(1, 0) == -2.0);
    REQUIRE(rec.channels(1, 1) == 0.4);
    REQUIRE(rec.sample_rate_hz == 128.0);
  }
  const auto rec = random_record(3, 50, 3);
  write_csv(rec, dir / "w.csv");
  REQUIRE(read_csv(dir / "w.csv", 250.0).channels == rec.channels);
}

TEST_CASE("CSV errors name the offending row", "[io]") {
  TempDir dir("csvbad");
  write_text(dir / "short.csv", "a,b,c\n1,2,3\n4,5\n");
  REQUIRE_THROWS_MATCHES(read_csv(dir / "short.csv", 100.0), IoError,
                         MessageMatches(ContainsSubstring("row 3 has 2 fields, expected 3")));
  write_text(dir / "nan.csv", "1,2\n3,nan\n");
  REQUIRE_THROWS_MATCHES(read_csv(dir / "nan.csv", 100.0), IoError,
                         MessageMatches(ContainsSubstring("row 2, column 2")));
  write_text(dir / "text.csv", "1,2\n3,abc\n");
  REQUIRE_THROWS_MATCHES(read_csv(dir / "text.csv", 100.0), IoError, MessageMatches(ContainsSubstring("row 2")));
  write_text(dir / "empty.csv", "a,b\n");
  REQUIRE_THROWS_AS(read_csv(dir / "empty.csv", 100.0), IoError);
  REQUIRE_THROWS_AS(read_csv(dir / "missing.csv", 100.0), IoError);
  REQUIRE_THROWS_AS(read_csv(dir / "empty.csv", 0.0), ValidationError);
}

TEST_CASE("large 16-channel CSV parses", "[io][slow]") {
  TempDir dir("csvbig");
  const std::size_t samples = 240000;
  {
    std::ofstream out(dir / "big.csv");
    for (std::size_t s = 0; s < samples; ++s)
      for (std::size_t c = 0; c < 16; ++c) out << static_cast<int>((s * 7 + c) % 1000) - 500 << (c == 15 ? '\n' : ',');
  }
  const auto rec = read_csv(dir / "big.csv", 250.0);
  REQUIRE(rec.channel_count() == 16);
  REQUIRE(rec.sample_count() == samples);
  REQUIRE(rec.channels(15, samples - 1) == static_cast<double>(static_cast<int>(((samples - 1) * 7 + 15) % 1000) - 500));
}

TEST_CASE("TFR1 byte-level round trip for every plane kind", "[io]") {
  const auto x = synthesize_mcs(preset("paper-3comp"));
  StftParams sp;
  sp.hop_samples = 8;
  const auto cp = default_scale_grid(205.0, x.size());
  const auto t_stft = stft(x, sp);
  const auto t_cwt = cwt(x, cp);
  const auto s_stft = sst_stft(x, sp);
  const auto s_cwt = sst_cwt(x, cp);

  const std::vector<PlaneFile> files{to_plane_file(t_stft, &sp), to_plane_file(t_cwt, nullptr, &cp),
                                     to_plane_file(s_stft), to_plane_file(s_cwt),
                                     to_plane_file(s_stft, true), to_plane_file(t_cwt, nullptr, &cp, true)};
  for (const auto& f : files) {
    CAPTURE(f.kind, f.is_complex);
    const std::string bytes = encode_tfr1(f);
    const auto g = decode_tfr1(bytes);
    REQUIRE(g == f);
    REQUIRE(encode_tfr1(g) == bytes);
  }
  REQUIRE(files[0].kind == "stft");
  REQUIRE(files[1].kind == "cwt");
  REQUIRE(files[2].kind == "sst-stft");
  REQUIRE(files[3].kind == "sst-cwt");
  REQUIRE_FALSE(files[4].is_complex);

  const auto back = sst_from_plane_file(decode_tfr1(encode_tfr1(files[2])));
  REQUIRE(back.rows() == s_stft.rows());
  REQUIRE(back.eta_axis_hz == s_stft.eta_axis_hz);
  REQUIRE(back.deposited_count == s_stft.deposited_count);
  for (std::size_t i = 0; i < back.values.size(); ++i) {
    // Decoded values are the stored floats, which sit within half a float ulp of
    // the source. (Recomputing float(src) here gets folded away by GCC 11's SLP
    // vectorizer at -O3, so the reference is the payload itself.)
    const cplx src = s_stft.values.data()[i];
    const cplx got = back.values.data()[i];
    REQUIRE(got == cplx(files[2].complex_payload[i]));
    REQUIRE(std::abs(got.real() - src.real()) <= 0x1p-24 * std::abs(src.real()));
    REQUIRE(std::abs(got.imag() - src.imag()) <= 0x1p-24 * std::abs(src.imag()));
  }
  const auto lin = tfr_from_plane_file(files[1]);
  REQUIRE(lin.kind == TfrKind::cwt);
  REQUIRE(lin.scale_axis.has_value());
  REQUIRE(lin.scale_axis->size() == t_cwt.rows());
  REQUIRE_THROWS_AS(sst_from_plane_file(files[0]), IoError);
  REQUIRE_THROWS_AS(tfr_from_plane_file(files[3]), IoError);
}

TEST_CASE("TFR1 rejects corrupt input", "[io]") {
  StftParams sp;
  sp.hop_samples = 16;
  const auto f = to_plane_file(stft(synthesize_mcs(single_tone_spec(20.0, 2.0, 100.0)), sp), &sp);
  std::string bytes = encode_tfr1(f);
  std::string bad = bytes;
  bad[0] = 'X';
  REQUIRE_THROWS_MATCHES(decode_tfr1(bad), IoError, MessageMatches(ContainsSubstring("bad magic")));
  REQUIRE_THROWS_AS(decode_tfr1(bytes.substr(0, bytes.size() - 3)), IoError);
  REQUIRE_THROWS_AS(decode_tfr1(bytes.substr(0, 10)), IoError);
  REQUIRE_THROWS_MATCHES(decode_tfr1(bytes + "x"), IoError, MessageMatches(ContainsSubstring("trailing")));
}

TEST_CASE("rendered images: blank, orientation, dimensions", "[io]") {
  TempDir dir("img");
  Grid2<cplx> zero(12, 30, cplx{});
  const auto blank = render_magnitude(zero, ImageScale::log, ImageNormalize::percentile99);
  REQUIRE(blank.width == 30);
  REQUIRE(blank.height == 12);
  for (auto p : blank.pixels) REQUIRE(p == 0);

  const auto s = sst_stft(synthesize_mcs(single_tone_spec(50.0, 4.0, 205.0)), [] {
    StftParams sp;
    sp.hop_samples = 4;
    return sp;
  }());
  const auto img = export_image(s, dir / "tone.pgm");
  const auto back = read_pgm(dir / "tone.pgm");
  REQUIRE(back.width == s.cols());
  REQUIRE(back.height == s.rows());
  REQUIRE(back.pixels == img.pixels);

  // The tone's bin is bright and, with low frequencies at the bottom, sits at
  // height − 1 − bin from the top.
  const std::size_t bin = static_cast<std::size_t>(std::lround(50.0 / (s.eta_axis_hz[1] - s.eta_axis_hz[0])));
  const std::size_t row = s.rows() - 1 - bin;
  const std::size_t mid = s.cols() / 2;
  REQUIRE(back.pixels[row * back.width + mid] == 255);
  REQUIRE(back.pixels[(s.rows() - 1) * back.width + mid] < 128);

  const auto lin = render_magnitude(s.values, ImageScale::linear, ImageNormalize::max);
  REQUIRE(lin.pixels[row * lin.width + mid] >= 200);

  write_text(dir / "bad.pgm", "P2\n1 1\n255\n0");
  REQUIRE_THROWS_AS(read_pgm(dir / "bad.pgm"), IoError);
}

TEST_CASE("ridge CSV round trip", "[io]") {
  StftParams sp;
  sp.hop_samples = 4;
  const auto s = sst_stft(synthesize_mcs(preset("paper-3comp")), sp);
  RidgeParams p;
  p.count = 3;
  const auto r = extract_ridges(s, p);
  std::stringstream buf;
  write_ridges_csv(s, r.ridges, buf);
  const auto back = read_ridges_csv(buf);
  REQUIRE(back.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    REQUIRE(back[k].bin_track == r.ridges[k].bin_track);
    REQUIRE(back[k].freq_track_hz == r.ridges[k].freq_track_hz);
  }
  std::stringstream bad("ridge,frame_index,time_s,freq_hz,magnitude,bin\n0,1,0,1,1,1\n");
  REQUIRE_THROWS_AS(read_ridges_csv(bad), IoError);
}
