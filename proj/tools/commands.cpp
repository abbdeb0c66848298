#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "melmix/errors.hpp"
#include "melmix/filters.hpp"
#include "melmix/formats.hpp"
#include "melmix/random.hpp"
#include "melmix/sampling.hpp"
#include "melmix/trainer.hpp"
#include "melmix/wav.hpp"

namespace melmix::cli {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fixed6(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

class CsvReport {
 public:
  CsvReport() { out_ << "model,mode,condition,var_l,nll,lsd\n"; }

  void row(const std::string& model, const std::string& mode, std::size_t condition, double var_l, double nll,
           double lsd) {
    out_ << model << ',' << mode << ',' << condition << ',' << csv_number(var_l) << ',' << csv_number(nll) << ','
         << csv_number(lsd) << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

double nearest_lsd(const Grid& g, const std::vector<Grid>& reference) {
  double best = std::numeric_limits<double>::infinity();
  for (const Grid& r : reference) best = std::min(best, log_spectral_distance(g, r));
  return best;
}

struct StudyModel {
  std::string name;
  TrainConfig cfg;
};

}  // namespace

MelSpectrogram analyze(const AudioBuffer& audio, std::size_t n_mels) {
  MelConfig mel;
  mel.n_mels = n_mels;
  mel.sample_rate = audio.sample_rate;
  mel.f_max = std::min(mel.f_max, audio.sample_rate / 2.0);
  return mel_spectrogram(audio, StftConfig{}, mel);
}

AudioBuffer vocode(const MelSpectrogram& mel, int iters, double momentum, MelInversion method, double* convergence) {
  const StftConfig stft;
  const Grid magnitude = mel_to_linear(mel, stft.fft_size, method);
  GriffinLimResult gl = griffin_lim(magnitude, stft, mel.config.sample_rate, iters, momentum);
  if (convergence != nullptr) *convergence = gl.spectral_convergence;
  return std::move(gl.audio);
}

double resynthesis_lsd(const MelSpectrogram& reference, const Grid& input, int iters, double momentum) {
  const AudioBuffer audio = vocode({input, reference.config}, iters, momentum);
  return log_spectral_distance(reference.values, analyze(audio, reference.config.n_mels).values);
}

std::string study_csv(const ConditionedDataset& data, const StudyOptions& opts) {
  if (opts.samples == 0) throw DomainError("study needs at least one sample per row");
  std::vector<StudyModel> models;
  for (auto [name, head, k] : {std::tuple{"mse", Head::mse, std::size_t{1}},
                               std::tuple{"tvcgmm-k1", Head::tvcgmm, std::size_t{1}},
                               std::tuple{"tvcgmm-k5", Head::tvcgmm, std::size_t{5}}}) {
    TrainConfig cfg;
    cfg.head = head;
    cfg.components = k;
    cfg.steps = opts.steps;
    cfg.learning_rate = opts.learning_rate;
    cfg.seed = opts.seed;
    cfg.log_every = opts.steps;
    models.push_back({name, cfg});
  }
  std::vector<ModelBundle> bundles;
  for (const StudyModel& m : models) bundles.push_back(fit(data, m.cfg));

  CsvReport report;
  for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
    const auto specs = data.condition_specs(c);
    const std::size_t gt = std::min(opts.samples, specs.size());
    double gt_var = 0.0;
    for (std::size_t i = 0; i < gt; ++i) gt_var += var_laplacian(specs[i]);
    report.row("ground_truth", "data", c, gt_var / static_cast<double>(gt), kNan, kNan);

    for (std::size_t m = 0; m < models.size(); ++m) {
      const TvcGmmField& field = bundles[m].fields[c];
      const double loss = models[m].cfg.head == Head::tvcgmm ? bundles[m].final_losses[c] : kNan;
      const Grid mean = mean_field(field);
      report.row(models[m].name, "mean", c, var_laplacian(mean), loss, nearest_lsd(mean, specs));
      for (SampleMode mode : {SampleMode::naive, SampleMode::conditional}) {
        double var = 0.0, lsd = 0.0;
        for (std::size_t i = 0; i < opts.samples; ++i) {
          const Grid s = sample(field, {mode, stream_seed(opts.seed, c, i), 1.0});
          var += var_laplacian(s);
          lsd += nearest_lsd(s, specs);
        }
        const auto n = static_cast<double>(opts.samples);
        report.row(models[m].name, mode == SampleMode::naive ? "naive" : "conditional", c, var / n, loss, lsd / n);
      }
    }
  }
  return report.str();
}

std::string study_wav_csv(const AudioBuffer& audio, const StudyOptions& opts) {
  const MelSpectrogram mel = analyze(audio);
  CsvReport report;
  const std::pair<const char*, Grid> variants[] = {
      {"ground_truth", mel.values}, {"smooth", smooth(mel.values, 1.0)}, {"sharpen", sharpen(mel.values, 1.0)}};
  for (const auto& [name, grid] : variants) {
    report.row("griffin_lim", name, 0, var_laplacian(grid), kNan,
               resynthesis_lsd(mel, grid, opts.gl_iters, opts.gl_momentum));
  }
  return report.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TVC-GMM mel-spectrogram modelling and over-smoothness diagnostics", "melmix"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Global random seed");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic conditioned dataset (TVDS)");
  std::string gen_spec, gen_out;
  bool gen_default = false;
  std::size_t gen_n = 50;
  auto* spec_opt = gen->add_option("--spec", gen_spec, "Synthetic spec JSON")->check(CLI::ExistingFile);
  gen->add_flag("--default", gen_default, "Use the built-in four-condition spec")->excludes(spec_opt);
  gen->add_option("--out", gen_out, "Output TVDS file")->required();
  gen->add_option("--n", gen_n, "Samples per condition")->capture_default_str();

  // fit
  auto* fitc = app.add_subcommand("fit", "Fit a model bundle to a dataset");
  std::string fit_data, fit_out, fit_head = "tvcgmm";
  TrainConfig fit_cfg;
  fitc->add_option("--data", fit_data, "Input TVDS dataset")->required()->check(CLI::ExistingFile);
  fitc->add_option("--head", fit_head, "tvcgmm or mse")->check(CLI::IsMember({"tvcgmm", "mse"}))->capture_default_str();
  auto* k_opt = fitc->add_option("--k", fit_cfg.components, "Mixture components")->capture_default_str();
  fitc->add_option("--steps", fit_cfg.steps, "Adam steps")->capture_default_str();
  fitc->add_option("--lr", fit_cfg.learning_rate, "Adam learning rate")->capture_default_str();
  fitc->add_option("--log-every", fit_cfg.log_every, "Loss curve interval")->capture_default_str();
  fitc->add_option("--out", fit_out, "Output model directory")->required();

  // sample
  auto* samplec = app.add_subcommand("sample", "Draw a spectrogram from a fitted model");
  std::string sample_model, sample_out, sample_mode = "conditional";
  std::uint32_t sample_condition = 0;
  double temperature = 1.0;
  samplec->add_option("--model", sample_model, "Model directory")->required()->check(CLI::ExistingDirectory);
  samplec->add_option("--condition", sample_condition, "Condition id")->capture_default_str();
  samplec->add_option("--mode", sample_mode, "naive, conditional or mean")
      ->check(CLI::IsMember({"naive", "conditional", "mean"}))
      ->capture_default_str();
  samplec->add_option("--temperature", temperature, "Cholesky scale at sampling time")->capture_default_str();
  samplec->add_option("--out", sample_out, "Output TFG1 file")->required();

  // filter
  auto* filterc = app.add_subcommand("filter", "Smooth or sharpen a spectrogram");
  std::string filter_in, filter_out, filter_op;
  double sigma = 1.0, strength = 1.0;
  filterc->add_option("--in", filter_in, "Input TFG1 file")->required();
  filterc->add_option("--op", filter_op, "smooth or sharpen")->required()->check(CLI::IsMember({"smooth", "sharpen"}));
  filterc->add_option("--sigma", sigma, "Gaussian sigma for smooth")->capture_default_str();
  filterc->add_option("--strength", strength, "Laplacian strength for sharpen")->capture_default_str();
  filterc->add_option("--out", filter_out, "Output TFG1 file")->required();

  // varl
  auto* varlc = app.add_subcommand("varl", "Print the variance of the Laplacian");
  std::string varl_in;
  varlc->add_option("--in", varl_in, "Input TFG1 file")->required();

  // vocode
  auto* vocodec = app.add_subcommand("vocode", "Griffin-Lim resynthesis of a log-mel spectrogram");
  std::string vocode_in, vocode_out;
  int iters = 60, sample_rate = 22050;
  double momentum = 0.99;
  bool nnls = false;
  vocodec->add_option("--in", vocode_in, "Input TFG1 log-mel file")->required();
  vocodec->add_option("--out", vocode_out, "Output WAV file")->required();
  vocodec->add_option("--iters", iters, "Griffin-Lim iterations")->capture_default_str();
  vocodec->add_option("--momentum", momentum, "Fast Griffin-Lim momentum")->capture_default_str();
  vocodec->add_option("--sample-rate", sample_rate, "Sample rate of the mel analysis")->capture_default_str();
  vocodec->add_flag("--nnls", nnls, "Non-negative least squares mel inversion");

  // analyze
  auto* analyzec = app.add_subcommand("analyze", "Log-mel analysis of a WAV file");
  std::string analyze_in, analyze_out;
  std::size_t n_mels = 80;
  analyzec->add_option("--in", analyze_in, "Input WAV file")->required();
  analyzec->add_option("--out", analyze_out, "Output TFG1 file")->required();
  analyzec->add_option("--n-mels", n_mels, "Mel bands")->capture_default_str();

  // lsd
  auto* lsdc = app.add_subcommand("lsd", "Print the log-spectral distance of two spectrograms");
  std::string lsd_a, lsd_b;
  lsdc->add_option("--a", lsd_a, "First TFG1 file")->required();
  lsdc->add_option("--b", lsd_b, "Second TFG1 file")->required();

  // study
  auto* studyc = app.add_subcommand("study", "Fit, sample and tabulate Var_L / NLL / LSD");
  std::string study_data, study_wav, study_out;
  StudyOptions study_opts;
  auto* data_opt = studyc->add_option("--data", study_data, "Input TVDS dataset")->check(CLI::ExistingFile);
  studyc->add_option("--wav", study_wav, "Input WAV file")->check(CLI::ExistingFile)->excludes(data_opt);
  studyc->add_option("--out", study_out, "Output CSV report")->required();
  studyc->add_option("--steps", study_opts.steps, "Adam steps per fit")->capture_default_str();
  studyc->add_option("--lr", study_opts.learning_rate, "Adam learning rate")->capture_default_str();
  studyc->add_option("--samples", study_opts.samples, "Samples per row")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  const bool seed_given = app.count("--seed") > 0;

  try {
    if (*gen) {
      if (gen_spec.empty() && !gen_default) throw ConfigError("gen needs --spec FILE or --default");
      if (gen_n == 0) throw DomainError("--n must be at least 1");
      SynthSpec spec = default_synth_spec(seed);
      if (!gen_spec.empty()) {
        std::ifstream in(gen_spec);
        std::stringstream text;
        text << in.rdbuf();
        spec = synth_spec_from_json(text.str());
        if (seed_given) spec.seed = seed;
      }
      const ConditionedDataset data = generate(spec, gen_n);
      save_tvds(gen_out, data);
      err << "wrote " << data.records.size() << " records to " << gen_out << '\n';
    } else if (*fitc) {
      fit_cfg.head = parse_head(fit_head);
      fit_cfg.seed = seed;
      if (fit_cfg.head == Head::mse && k_opt->count() > 0) err << "warning: --k is ignored for the mse head\n";
      const ModelBundle bundle = fit(load_tvds(fit_data), fit_cfg);
      save_bundle(fit_out, bundle);
      out << "condition,final_loss\n";
      for (std::size_t c = 0; c < bundle.final_losses.size(); ++c) {
        out << c << ',' << csv_number(bundle.final_losses[c]) << '\n';
      }
    } else if (*samplec) {
      const ModelBundle bundle = load_bundle(sample_model);
      if (sample_condition >= bundle.fields.size()) {
        throw DomainError("unknown condition " + std::to_string(sample_condition) + " (model has " +
                          std::to_string(bundle.fields.size()) + ")");
      }
      const TvcGmmField& field = bundle.fields[sample_condition];
      Grid result;
      if (sample_mode == "mean") {
        result = mean_field(field);
      } else {
        const SampleMode mode = sample_mode == "naive" ? SampleMode::naive : SampleMode::conditional;
        result = sample(field, {mode, stream_seed(seed, sample_condition), temperature});
      }
      save_tfg1(sample_out, result);
    } else if (*filterc) {
      const Grid in = load_tfg1(filter_in);
      save_tfg1(filter_out, filter_op == "smooth" ? smooth(in, sigma) : sharpen(in, strength));
    } else if (*varlc) {
      out << fixed6(var_laplacian(load_tfg1(varl_in))) << '\n';
    } else if (*vocodec) {
      MelConfig cfg;
      cfg.sample_rate = sample_rate;
      cfg.f_max = std::min(cfg.f_max, sample_rate / 2.0);
      MelSpectrogram mel{load_tfg1(vocode_in), cfg};
      mel.config.n_mels = mel.values.cols();
      double convergence = 0.0;
      const AudioBuffer audio =
          vocode(mel, iters, momentum, nnls ? MelInversion::nnls : MelInversion::pseudo_inverse, &convergence);
      write_wav(vocode_out, audio);
      out << "spectral_convergence " << fixed6(convergence) << '\n';
    } else if (*analyzec) {
      save_tfg1(analyze_out, analyze(read_wav(analyze_in), n_mels).values);
    } else if (*lsdc) {
      out << fixed6(log_spectral_distance(load_tfg1(lsd_a), load_tfg1(lsd_b))) << '\n';
    } else if (*studyc) {
      if (study_data.empty() == study_wav.empty()) throw ConfigError("study needs exactly one of --data or --wav");
      study_opts.seed = seed;
      const std::string csv =
          study_data.empty() ? study_wav_csv(read_wav(study_wav), study_opts) : study_csv(load_tvds(study_data), study_opts);
      std::ofstream file(study_out, std::ios::binary);
      if (!(file << csv)) throw IoError("cannot write " + study_out);
    }
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace melmix::cli
