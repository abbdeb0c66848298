#include "melmix/trainer.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "melmix/errors.hpp"
#include "melmix/filters.hpp"
#include "melmix/formats.hpp"
#include "melmix/random.hpp"
#include "melmix/sampling.hpp"

namespace melmix {

namespace {

using json = nlohmann::json;

/// Adam state over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

std::vector<double> flatten(const TvcGmmField& field) {
  std::vector<double> flat;
  flat.reserve(field.all().size() * kParamsPerComponent);
  for (const TvcComponent& c : field.all()) {
    const auto p = pack(c);
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return flat;
}

void unflatten(std::span<const double> flat, TvcGmmField& field) {
  auto comps = field.all();
  for (std::size_t i = 0; i < comps.size(); ++i) {
    comps[i] = unpack(flat.subspan(i * kParamsPerComponent).first<kParamsPerComponent>());
  }
}

void check_dataset(const ConditionedDataset& data) {
  if (data.records.empty()) throw DomainError("dataset is empty");
  const Grid& first = data.records.front().spec;
  for (const auto& r : data.records) {
    if (!r.spec.same_shape(first)) throw DomainError("all dataset spectrograms must share one shape");
    if (r.condition >= data.n_conditions) throw DomainError("record condition id exceeds n_conditions");
    for (double v : r.spec.values()) {
      if (!std::isfinite(v)) throw DomainError("dataset contains non-finite values");
    }
  }
  for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
    bool found = false;
    for (const auto& r : data.records) found = found || r.condition == c;
    if (!found) throw DomainError("condition " + std::to_string(c) + " has no records");
  }
}

TvcGmmField init_condition(const std::vector<Grid>& specs, std::size_t components, std::uint64_t seed,
                           std::uint32_t condition, double jitter) {
  const ChainBatch batch(specs);
  TvcGmmField field(batch.rows(), batch.cols(), components);
  const auto n = static_cast<double>(batch.samples());
  for (std::size_t b = 0; b < field.bins(); ++b) {
    Vec3 mean{};
    Vec3 sq{};
    for (const ChainTarget& x : batch.bin(b)) {
      for (int i = 0; i < 3; ++i) {
        mean[i] += x[i];
        sq[i] += x[i] * x[i];
      }
    }
    Chol3 chol;
    for (int i = 0; i < 3; ++i) {
      mean[i] /= n;
      const double var = std::max(sq[i] / n - mean[i] * mean[i], 0.0);
      chol.diag_pre[i] = softplus_inverse(std::max(std::sqrt(var) - kDiagonalFloor, 1e-6));
    }
    Rng rng(stream_seed(seed, condition, b));
    for (TvcComponent& c : field.bin(b)) {
      c.logit = 0.0;
      c.chol = chol;
      c.mean = mean;
      if (components > 1) {
        for (double& m : c.mean) m += jitter * rng.normal();
      }
    }
  }
  return field;
}

double mse_loss(const Grid& means, const std::vector<Grid>& specs) {
  double acc = 0.0;
  for (const Grid& s : specs) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double d = means.values()[i] - s.values()[i];
      acc += d * d;
    }
  }
  return acc / (static_cast<double>(specs.size()) * static_cast<double>(means.size()));
}

[[noreturn]] void diverged(std::uint32_t condition, std::size_t step) {
  throw TrainingError("training diverged (non-finite loss) for condition " + std::to_string(condition) +
                          " at step " + std::to_string(step) + "; last finite step " + std::to_string(step - 1),
                      static_cast<long>(step) - 1);
}

/// Returns the loss before each update (steps entries) and the final loss.
std::pair<std::vector<double>, double> fit_tvcgmm(TvcGmmField& field, const std::vector<Grid>& specs,
                                                  const TrainConfig& cfg, std::uint32_t condition) {
  const ChainBatch batch(specs);
  std::vector<double> params = flatten(field);
  std::vector<double> grad(params.size());
  Adam adam(params.size(), cfg);
  std::vector<double> losses;
  losses.reserve(cfg.steps);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const NllGradient g = nll_gradient(field, batch);
    if (!std::isfinite(g.value)) diverged(condition, step);
    losses.push_back(g.value);
    const auto comps = g.gradient.all();
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const auto p = pack(comps[i]);
      std::copy(p.begin(), p.end(), grad.begin() + static_cast<std::ptrdiff_t>(i * kParamsPerComponent));
    }
    adam.step(params, grad);
    unflatten(params, field);
  }
  const double final_loss = nll(field, batch);
  if (!std::isfinite(final_loss)) diverged(condition, cfg.steps + 1);
  return {losses, final_loss};
}

std::pair<std::vector<double>, double> fit_mse(Grid& means, const std::vector<Grid>& specs, const TrainConfig& cfg,
                                               std::uint32_t condition) {
  const Grid target = sample_mean(specs);
  const double scale = 2.0 / static_cast<double>(means.size());
  std::vector<double> grad(means.size());
  Adam adam(means.size(), cfg);
  std::vector<double> losses;
  losses.reserve(cfg.steps);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const double loss = mse_loss(means, specs);
    if (!std::isfinite(loss)) diverged(condition, step);
    losses.push_back(loss);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = scale * (means.values()[i] - target.values()[i]);
    adam.step(means.values(), grad);
  }
  return {losses, mse_loss(means, specs)};
}

json config_to_json(const TrainConfig& cfg) {
  return {{"head", to_string(cfg.head)}, {"components", cfg.components},     {"steps", cfg.steps},
          {"learning_rate", cfg.learning_rate}, {"beta1", cfg.beta1},       {"beta2", cfg.beta2},
          {"epsilon", cfg.epsilon},             {"seed", cfg.seed},         {"log_every", cfg.log_every},
          {"init_jitter", cfg.init_jitter}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.head = parse_head(j.at("head").get<std::string>());
  cfg.components = j.at("components").get<std::size_t>();
  cfg.steps = j.at("steps").get<std::size_t>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.beta1 = j.at("beta1").get<double>();
  cfg.beta2 = j.at("beta2").get<double>();
  cfg.epsilon = j.at("epsilon").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.log_every = j.at("log_every").get<std::size_t>();
  cfg.init_jitter = j.at("init_jitter").get<double>();
  return cfg;
}

}  // namespace

std::string to_string(Head head) { return head == Head::tvcgmm ? "tvcgmm" : "mse"; }

Head parse_head(const std::string& name) {
  if (name == "tvcgmm") return Head::tvcgmm;
  if (name == "mse") return Head::mse;
  throw ConfigError("unknown head '" + name + "' (expected tvcgmm or mse)");
}

void TrainConfig::validate() const {
  if (components == 0) throw ConfigError("K must be at least 1");
  if (steps == 0) throw ConfigError("steps must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (log_every == 0) throw ConfigError("log_every must be at least 1");
  if (!(init_jitter >= 0.0)) throw ConfigError("init_jitter must be non-negative");
}

Grid sample_mean(const std::vector<Grid>& specs) {
  if (specs.empty()) throw DomainError("sample_mean of no spectrograms");
  Grid mean(specs.front().rows(), specs.front().cols());
  for (const Grid& s : specs) {
    for (std::size_t i = 0; i < s.size(); ++i) mean.values()[i] += s.values()[i];
  }
  for (double& v : mean.values()) v /= static_cast<double>(specs.size());
  return mean;
}

TvcGmmField mse_field(const Grid& means) {
  TvcGmmField field(means.rows(), means.cols(), 1);
  Mat3 zero{};
  const Chol3 floored = chol_from_covariance(zero);
  for (std::size_t t = 0; t < means.rows(); ++t) {
    for (std::size_t f = 0; f < means.cols(); ++f) {
      TvcComponent& c = field.bin(t, f)[0];
      c.mean = {means(t, f), means(std::min(t + 1, means.rows() - 1), f), means(t, std::min(f + 1, means.cols() - 1))};
      c.chol = floored;
    }
  }
  return field;
}

ModelBundle init_fields(const ConditionedDataset& data, std::size_t components, std::uint64_t seed, double jitter) {
  check_dataset(data);
  if (components == 0) throw ConfigError("K must be at least 1");
  ModelBundle bundle;
  bundle.config.components = components;
  bundle.config.seed = seed;
  bundle.config.init_jitter = jitter;
  for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
    bundle.fields.push_back(init_condition(data.condition_specs(c), components, seed, c, jitter));
  }
  return bundle;
}

ModelBundle fit(const ConditionedDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  check_dataset(data);
  ModelBundle bundle;
  bundle.config = cfg;
  if (cfg.head == Head::mse) bundle.config.components = 1;
  std::vector<std::vector<double>> losses;
  for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
    const auto specs = data.condition_specs(c);
    if (cfg.head == Head::tvcgmm) {
      TvcGmmField field = init_condition(specs, cfg.components, cfg.seed, c, cfg.init_jitter);
      auto [curve, final_loss] = fit_tvcgmm(field, specs, cfg, c);
      bundle.fields.push_back(std::move(field));
      losses.push_back(std::move(curve));
      bundle.final_losses.push_back(final_loss);
    } else {
      Grid means(specs.front().rows(), specs.front().cols());
      auto [curve, final_loss] = fit_mse(means, specs, cfg, c);
      bundle.fields.push_back(mse_field(means));
      losses.push_back(std::move(curve));
      bundle.final_losses.push_back(final_loss);
    }
  }
  for (std::size_t step = cfg.log_every; step <= cfg.steps; step += cfg.log_every) {
    LossPoint point;
    point.step = step;
    for (const auto& l : losses) point.per_condition.push_back(l[step - 1]);
    for (double v : point.per_condition) point.loss += v;
    point.loss /= static_cast<double>(point.per_condition.size());
    bundle.curve.push_back(std::move(point));
  }
  return bundle;
}

std::vector<ConditionReport> evaluate(const ModelBundle& bundle, const ConditionedDataset& data,
                                      const EvalConfig& cfg) {
  check_dataset(data);
  if (bundle.fields.size() != data.n_conditions) {
    throw DomainError("bundle has " + std::to_string(bundle.fields.size()) + " conditions, dataset has " +
                      std::to_string(data.n_conditions));
  }
  if (cfg.samples == 0) throw DomainError("evaluation needs at least one sample");
  std::vector<ConditionReport> reports;
  for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
    const TvcGmmField& field = bundle.fields[c];
    const auto specs = data.condition_specs(c);
    if (field.rows() != specs.front().rows() || field.cols() != specs.front().cols()) {
      throw DomainError("bundle field shape does not match dataset for condition " + std::to_string(c));
    }
    ConditionReport r;
    r.condition = c;
    const Grid prediction = mean_field(field);
    r.loss = bundle.config.head == Head::tvcgmm ? nll(field, ChainBatch(specs)) : mse_loss(prediction, specs);
    r.var_l_mean_field = var_laplacian(prediction);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
      const std::uint64_t seed = stream_seed(cfg.seed, c, i);
      r.var_l_naive += var_laplacian(sample_naive(field, {SampleMode::naive, seed, 1.0}));
      r.var_l_conditional += var_laplacian(sample_conditional(field, {SampleMode::conditional, seed, 1.0}));
    }
    r.var_l_naive /= static_cast<double>(cfg.samples);
    r.var_l_conditional /= static_cast<double>(cfg.samples);
    const std::size_t gt = std::min(cfg.samples, specs.size());
    for (std::size_t i = 0; i < gt; ++i) r.var_l_ground_truth += var_laplacian(specs[i]);
    r.var_l_ground_truth /= static_cast<double>(gt);
    reports.push_back(r);
  }
  return reports;
}

std::string loss_curve_csv(const ModelBundle& bundle) {
  std::ostringstream out;
  out.precision(10);
  out << "step,loss";
  for (std::size_t c = 0; c < bundle.fields.size(); ++c) out << ",condition_" << c;
  out << '\n';
  for (const LossPoint& p : bundle.curve) {
    out << p.step << ',' << p.loss;
    for (double v : p.per_condition) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json manifest;
  manifest["format"] = "melmix-model";
  manifest["version"] = 1;
  manifest["config"] = config_to_json(bundle.config);
  manifest["conditions"] = json::array();
  for (std::size_t c = 0; c < bundle.fields.size(); ++c) {
    const std::string file = "condition_" + std::to_string(c) + ".tvcg";
    save_tvcg(dir / file, bundle.fields[c]);
    json entry = {{"id", c}, {"file", file}};
    entry["final_loss"] = c < bundle.final_losses.size() ? json(bundle.final_losses[c]) : json(nullptr);
    manifest["conditions"].push_back(entry);
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  std::ofstream(dir / "loss.csv") << loss_curve_csv(bundle);
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
  ModelBundle bundle;
  try {
    const json manifest = json::parse(in);
    bundle.config = config_from_json(manifest.at("config"));
    for (const json& entry : manifest.at("conditions")) {
      bundle.fields.push_back(load_tvcg(dir / entry.at("file").get<std::string>()));
      const json& loss = entry.at("final_loss");
      bundle.final_losses.push_back(loss.is_null() ? std::nan("") : loss.get<double>());
    }
  } catch (const json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  return bundle;
}

}  // namespace melmix
