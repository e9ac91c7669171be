// ssqlab command-line front end.
//
// Exit codes: 0 success, 2 invalid arguments or parameters, 1 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ssqlab/ssqlab.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ssq;

struct CommonOptions {
  double fs = 0.0;
  std::size_t window_len = 32;
  double nw = 4.0;
  double gmw_gamma = 3.0;
  double gmw_beta = 60.0;
  std::size_t hop = 1;
  double gamma_rel = 1e-8;
  std::string kernel = "hard";
  double epsilon = 0.0;
  std::size_t voices = 32;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  [[nodiscard]] StftParams stft() const {
    StftParams p;
    p.window.length_samples = window_len;
    p.window.time_half_bandwidth = nw;
    p.hop_samples = hop;
    return p;
  }

  [[nodiscard]] CwtParams cwt(double sample_rate, std::size_t n) const {
    CwtParams p;
    p.wavelet.gamma_symmetry = gmw_gamma;
    p.wavelet.beta_decay = gmw_beta;
    p.voices_per_octave = voices;
    return default_scale_grid(sample_rate, n, p);
  }

  [[nodiscard]] SSTParams sst() const {
    SSTParams p;
    p.gamma_threshold = Threshold::rel(gamma_rel);
    p.kernel = kernel == "gaussian" ? Kernel::gaussian : Kernel::hard;
    p.epsilon_width = epsilon;
    return p;
  }
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--fs", o.fs, "Sample rate in Hz (CSV input, synth override)")->check(CLI::PositiveNumber);
  sub->add_option("--window-len", o.window_len, "DPSS window length in samples")->capture_default_str();
  sub->add_option("--nw", o.nw, "DPSS time-half-bandwidth product")->capture_default_str();
  sub->add_option("--gmw-gamma", o.gmw_gamma, "Morse wavelet symmetry")->capture_default_str();
  sub->add_option("--gmw-beta", o.gmw_beta, "Morse wavelet decay")->capture_default_str();
  sub->add_option("--gamma-rel", o.gamma_rel, "Phase-transform threshold relative to max |T|")->capture_default_str();
  sub->add_option("--kernel", o.kernel, "Squeezing kernel")->check(CLI::IsMember({"hard", "gaussian"}))->capture_default_str();
  sub->add_option("--epsilon", o.epsilon, "Gaussian kernel width in Hz")->capture_default_str();
  sub->add_option("--voices", o.voices, "CWT voices per octave")->capture_default_str();
  sub->add_option("--seed", o.seed, "Noise seed")->capture_default_str();
  sub->add_option("--threads", o.threads, "Worker threads (0 = SSQLAB_THREADS or all cores)");
}

SampledSignal load_signal(const fs::path& path, const CommonOptions& o, std::size_t index) {
  const auto rec = read_record(path, record_format_from_path(path), o.fs);
  auto x = signal_from_record(rec, index);
  if (o.fs > 0) x.sample_rate_hz = o.fs;
  return x;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw IoError("cannot write " + path);
  return file;
}

std::vector<std::vector<double>> ridge_tracks(const std::vector<Ridge>& ridges) {
  std::vector<std::vector<double>> t;
  for (const auto& r : ridges) t.push_back(r.freq_track_hz);
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synchrosqueezing toolkit: synthesis, transforms, ridges, reconstruction and batch preprocessing"};
  app.require_subcommand(1);
  CommonOptions common;

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesize a test signal");
  add_common(synth, common);
  std::string preset_name;
  double tone_hz = 0.0;
  double duration = 10.0;
  double synth_snr = std::numeric_limits<double>::infinity();
  bool synth_real = false;
  std::string synth_out, truth_out;
  synth->add_option("--preset", preset_name, "Built-in multicomponent preset (paper-3comp)");
  synth->add_option("--tone", tone_hz, "Unit-amplitude tone frequency in Hz");
  synth->add_option("--duration", duration, "Tone duration in seconds")->capture_default_str();
  synth->add_option("--snr", synth_snr, "Add white Gaussian noise at this SNR (dB)");
  synth->add_flag("--real", synth_real, "Write the real part instead of the analytic signal");
  synth->add_option("-o,--output", synth_out, "Output record (.rawf32 or .csv)")->required();
  synth->add_option("--truth", truth_out, "Also write the clean components, one complex channel each");

  // transform
  auto* transform = app.add_subcommand("transform", "Linear transform (STFT or CWT) to a TFR1 file");
  add_common(transform, common);
  transform->add_option("--hop", common.hop, "STFT hop in samples")->capture_default_str();
  std::string branch = "stft", in_path, out_path;
  std::size_t channel = 0;
  bool magnitude_only = false;
  transform->add_option("--branch", branch)->check(CLI::IsMember({"stft", "cwt"}))->capture_default_str();
  transform->add_option("-i,--input", in_path)->required()->check(CLI::ExistingFile);
  transform->add_option("-o,--output", out_path)->required();
  transform->add_option("--channel", channel, "Signal index within the record");
  transform->add_flag("--magnitude", magnitude_only, "Store magnitudes instead of complex values");

  // ssq
  auto* ssq_cmd = app.add_subcommand("ssq", "Synchrosqueezed transform to a TFR1 file");
  add_common(ssq_cmd, common);
  ssq_cmd->add_option("--hop", common.hop, "STFT hop in samples")->capture_default_str();
  std::size_t n_out = 0;
  double f_lo = -1.0, f_hi = -1.0;
  std::string spacing;
  ssq_cmd->add_option("--branch", branch)->check(CLI::IsMember({"stft", "cwt"}))->capture_default_str();
  ssq_cmd->add_option("-i,--input", in_path)->required()->check(CLI::ExistingFile);
  ssq_cmd->add_option("-o,--output", out_path)->required();
  ssq_cmd->add_option("--channel", channel, "Signal index within the record");
  ssq_cmd->add_option("--n-out", n_out, "Output frequency bins (0 = branch default)");
  ssq_cmd->add_option("--f-lo", f_lo, "Lowest output frequency in Hz");
  ssq_cmd->add_option("--f-hi", f_hi, "Highest output frequency in Hz");
  ssq_cmd->add_option("--spacing", spacing)->check(CLI::IsMember({"linear", "log"}));
  ssq_cmd->add_flag("--magnitude", magnitude_only, "Store magnitudes instead of complex values");

  // ridges
  auto* ridges_cmd = app.add_subcommand("ridges", "Extract ridges from an SST TFR1 file");
  RidgeParams ridge_params;
  ridges_cmd->add_option("-i,--input", in_path)->required()->check(CLI::ExistingFile);
  ridges_cmd->add_option("-o,--output", out_path, "Ridge CSV (default stdout)");
  ridges_cmd->add_option("--count", ridge_params.count, "Number of ridges")->capture_default_str();
  ridges_cmd->add_option("--penalty", ridge_params.penalty, "Jump penalty")->capture_default_str();
  ridges_cmd->add_option("--max-jump", ridge_params.max_jump, "Largest bin jump per frame")->capture_default_str();
  ridges_cmd->add_option("--band", ridge_params.band_bins, "Half-width cleared around each ridge (0 = default)");

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "Reconstruct modes along ridges");
  std::string ridges_path;
  std::size_t band = 0;
  recon->add_option("-i,--input", in_path, "SST TFR1 file")->required()->check(CLI::ExistingFile);
  recon->add_option("--ridges", ridges_path, "Ridge CSV")->required()->check(CLI::ExistingFile);
  recon->add_option("-o,--output", out_path, "Mode CSV (default stdout)");
  recon->add_option("--band", band, "Band half-width in bins (0 = branch default)");

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "Concentration and reconstruction metrics");
  std::string truth_path, modes_path, report_format = "text";
  std::size_t halfwidth = 1;
  double order = 3.0, interior = 0.8;
  metrics_cmd->add_option("-i,--input", in_path, "TFR1 file")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--ridges", ridges_path, "Ridge CSV for the ridge energy fraction")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--halfwidth", halfwidth, "Ridge halfwidth in bins")->capture_default_str();
  metrics_cmd->add_option("--order", order, "Renyi entropy order")->capture_default_str();
  metrics_cmd->add_option("--modes", modes_path, "Mode CSV from reconstruct")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--truth", truth_path, "Clean components written by synth --truth")->check(CLI::ExistingFile);
  metrics_cmd->add_option("--interior", interior, "Interior fraction for L2 errors")->capture_default_str();
  metrics_cmd->add_option("--format", report_format)->check(CLI::IsMember({"text", "csv"}));
  metrics_cmd->add_option("-o,--output", out_path, "Report path (default stdout)");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Segment records into a tensor of TFR magnitude images");
  add_common(prep, common);
  PreprocessOptions prep_opts;
  std::vector<std::string> inputs;
  std::string transform_name = "sst-stft", tensor_path = "segments.f32", manifest_path = "manifest.tsv";
  bool keep_tail = false;
  prep->add_option("inputs", inputs, "Record files (.rawf32 or .csv)")->required()->check(CLI::ExistingFile);
  prep->add_option("--transform", transform_name)
      ->check(CLI::IsMember({"stft", "cwt", "sst-stft", "sst-cwt"}))
      ->capture_default_str();
  prep->add_option("--window", prep_opts.plan.window_samples, "Segment length in samples")->capture_default_str();
  prep->add_option("--hop", prep_opts.plan.hop_samples, "Segment hop in samples")->capture_default_str();
  prep->add_option("--frame-hop", prep_opts.frame_hop, "STFT hop / CWT column step inside a segment")
      ->capture_default_str();
  prep->add_flag("--keep-tail", keep_tail, "Zero-pad and keep a trailing partial segment");
  prep->add_option("--tensor", tensor_path)->capture_default_str();
  prep->add_option("--manifest", manifest_path)->capture_default_str();

  // render
  auto* render = app.add_subcommand("render", "Render a TFR1 plane to an 8-bit PGM image");
  std::string scale_name = "log", normalize_name = "max";
  render->add_option("-i,--input", in_path)->required()->check(CLI::ExistingFile);
  render->add_option("-o,--output", out_path)->required();
  render->add_option("--scale", scale_name)->check(CLI::IsMember({"linear", "log"}))->capture_default_str();
  render->add_option("--normalize", normalize_name)->check(CLI::IsMember({"max", "percentile99"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      require(preset_name.empty() != (tone_hz == 0.0), "synth needs exactly one of --preset or --tone");
      MCSSpec spec = preset_name.empty()
                         ? single_tone_spec(tone_hz, duration, common.fs > 0 ? common.fs : 205.0)
                         : preset(preset_name);
      if (!preset_name.empty() && common.fs > 0) spec.sample_rate_hz = common.fs;
      spec.validate();
      auto x = add_awgn(synthesize_mcs(spec), synth_snr, common.seed);
      if (synth_real) {
        for (auto& v : x.samples) v = v.real();
        x.is_real = true;
      }
      const fs::path out(synth_out);
      write_record(record_from_signal(x, preset_name.empty() ? "tone" : preset_name), out,
                   record_format_from_path(out));
      if (!truth_out.empty()) {
        std::vector<std::vector<cplx>> comps;
        for (std::size_t k = 0; k < spec.components.size(); ++k) comps.push_back(synthesize_component(spec, k).samples);
        const fs::path tp(truth_out);
        write_record(record_from_signals(comps, spec.sample_rate_hz, false, "truth"), tp, record_format_from_path(tp));
      }
    } else if (*transform) {
      const auto x = load_signal(in_path, common, channel);
      if (branch == "stft") {
        const auto sp = common.stft();
        write_tfr1(to_plane_file(stft(x, sp, common.threads), &sp, nullptr, magnitude_only), out_path);
      } else {
        const auto cp = common.cwt(x.sample_rate_hz, x.size());
        write_tfr1(to_plane_file(cwt(x, cp, common.threads), nullptr, &cp, magnitude_only), out_path);
      }
    } else if (*ssq_cmd) {
      const auto x = load_signal(in_path, common, channel);
      auto p = common.sst();
      p.n_out_bins = n_out;
      if (f_lo >= 0 || f_hi >= 0) {
        require(f_lo >= 0 && f_hi > 0, "--f-lo and --f-hi must be given together");
        p.freq_range = std::make_pair(f_lo, f_hi);
      }
      if (!spacing.empty()) p.spacing = spacing == "log" ? BinSpacing::logarithmic : BinSpacing::linear;
      const SSTPlane s = branch == "stft" ? sst_stft(x, common.stft(), p, common.threads)
                                          : sst_cwt(x, common.cwt(x.sample_rate_hz, x.size()), p, common.threads);
      for (const auto& d : s.diagnostics) std::cerr << "note: " << d << '\n';
      write_tfr1(to_plane_file(s, magnitude_only), out_path);
    } else if (*ridges_cmd) {
      const auto s = sst_from_plane_file(read_tfr1(in_path));
      const auto result = extract_ridges(s, ridge_params);
      for (const auto& d : result.diagnostics) std::cerr << "note: " << d << '\n';
      std::ofstream file;
      write_ridges_csv(s, result.ridges, open_output(out_path, file));
    } else if (*recon) {
      const auto s = sst_from_plane_file(read_tfr1(in_path));
      std::ifstream rin(ridges_path);
      const auto ridges = read_ridges_csv(rin);
      require(!ridges.empty(), "ridge file holds no ridges");
      const std::size_t d = band != 0 ? band : default_band_bins(s.kind);
      std::vector<ModeEstimate> modes;
      for (std::size_t i = 0; i < ridges.size(); ++i) modes.push_back(reconstruct_mode(s, ridges[i], d, i));
      std::ofstream file;
      auto& out = open_output(out_path, file);
      out << "time_s";
      for (std::size_t i = 0; i < modes.size(); ++i) out << ",mode" << i << "_re,mode" << i << "_im";
      out << '\n' << std::setprecision(17);
      for (std::size_t m = 0; m < s.cols(); ++m) {
        out << s.time_axis_s[m];
        for (const auto& mode : modes) out << ',' << mode.samples[m].real() << ',' << mode.samples[m].imag();
        out << '\n';
      }
    } else if (*metrics_cmd) {
      require(!in_path.empty() || !modes_path.empty(), "metrics needs --input and/or --modes");
      std::map<std::string, double> report;
      if (!in_path.empty()) {
        const auto f = read_tfr1(in_path);
        const Grid2<cplx> values = detail::payload_values(f);
        report["renyi_entropy_bits"] = renyi_entropy(values, order);
        if (!ridges_path.empty()) {
          std::ifstream rin(ridges_path);
          const auto ridges = read_ridges_csv(rin);
          require(!ridges.empty(), "ridge file holds no ridges");
          report["ridge_energy_fraction"] = ridge_energy_fraction(values, f.freq_axis, ridge_tracks(ridges), halfwidth);
        }
      }
      if (!modes_path.empty()) {
        require(!truth_path.empty(), "--modes needs --truth");
        const auto truth = read_record(truth_path, record_format_from_path(truth_path));
        auto table = read_csv(modes_path, 1.0);
        require(table.channel_count() >= 3 && table.channel_count() % 2 == 1, "mode CSV has an unexpected shape");
        const std::size_t nmodes = (table.channel_count() - 1) / 2;
        for (std::size_t i = 0; i < nmodes; ++i) {
          std::vector<cplx> est;
          std::vector<std::size_t> idx;
          for (std::size_t m = 0; m < table.sample_count(); ++m) {
            est.emplace_back(table.channels(1 + 2 * i, m), table.channels(2 + 2 * i, m));
            idx.push_back(static_cast<std::size_t>(std::llround(table.channels(0, m) * truth.sample_rate_hz)));
          }
          // Ridges come out in energy order; score each against its closest component.
          double best = std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < truth.signal_count(); ++k) {
            const auto comp = signal_from_record(truth, k);
            std::vector<cplx> ref;
            for (auto n : idx) {
              require(n < comp.size(), "mode time axis runs past the truth record");
              ref.push_back(comp.samples[n]);
            }
            best = std::min(best, relative_l2_error(est, ref, interior));
          }
          report["mode" + std::to_string(i) + "_relative_l2"] = best;
        }
      }
      std::ofstream file;
      auto& out = open_output(out_path, file);
      if (report_format == "csv")
        write_report_csv(out, report);
      else
        write_report(out, report);
    } else if (*prep) {
      prep_opts.transform = parse_transform_kind(transform_name);
      prep_opts.plan.drop_incomplete_tail = !keep_tail;
      prep_opts.stft = common.stft();
      prep_opts.cwt.wavelet = {common.gmw_gamma, common.gmw_beta};
      prep_opts.cwt.voices_per_octave = common.voices;
      prep_opts.sst = common.sst();
      prep_opts.workers = common.threads;
      std::vector<RecordInput> records;
      for (const auto& p : inputs) records.push_back(record_input(fs::path(p), record_format_from_path(p), common.fs));
      const auto man = preprocess_batch(records, prep_opts, tensor_path, manifest_path);
      for (const auto& [k, v] : man.summary) std::cout << k << '=' << v << '\n';
      for (const auto& e : man.entries)
        if (!e.ok()) std::cerr << "record " << e.record_id << ": " << e.status << '\n';
    } else if (*render) {
      const auto f = read_tfr1(in_path);
      const auto img = render_magnitude(detail::payload_values(f),
                                        scale_name == "log" ? ImageScale::log : ImageScale::linear,
                                        normalize_name == "max" ? ImageNormalize::max : ImageNormalize::percentile99);
      write_pgm(img, out_path);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
