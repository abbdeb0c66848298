#include "melmix/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "melmix/errors.hpp"
#include "melmix/parallel.hpp"
#include "melmix/random.hpp"

namespace melmix {

namespace {

Grid bump(std::size_t rows, std::size_t cols, double center_t, double center_f, double width, double height,
          double offset) {
  Grid g(rows, cols);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t f = 0; f < cols; ++f) {
      const double dt = static_cast<double>(t) - center_t;
      const double df = static_cast<double>(f) - center_f;
      g(t, f) = offset + height * std::exp(-(dt * dt + df * df) / (2.0 * width * width));
    }
  }
  return g;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

void SynthSpec::validate() const {
  if (rows < 2 || cols < 2) throw DomainError("synthetic grids must be at least 2x2");
  if (conditions.empty()) throw DomainError("synthetic spec needs at least one condition");
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    const ConditionSpec& cond = conditions[c];
    const std::string where = "condition " + std::to_string(c) + ": ";
    if (cond.weights.empty()) throw DomainError(where + "weights must not be empty");
    double total = 0.0;
    for (double w : cond.weights) {
      if (!(w > 0.0)) throw DomainError(where + "weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError(where + "weights must sum to 1");
    if (cond.patterns.size() != cond.weights.size()) {
      throw DomainError(where + "needs one pattern per mode weight");
    }
    for (const Grid& p : cond.patterns) {
      if (p.rows() != rows || p.cols() != cols) throw DomainError(where + "pattern shape does not match T x F");
      if (!p.all_finite()) throw DomainError(where + "patterns must be finite");
    }
    if (!(cond.noise_std > 0.0)) throw DomainError(where + "noise_std must be positive");
    if (!(cond.rho_t >= 0.0 && cond.rho_t < 1.0)) throw DomainError(where + "rho_t must lie in [0, 1)");
    if (!(cond.rho_f >= 0.0 && cond.rho_f < 1.0)) throw DomainError(where + "rho_f must lie in [0, 1)");
  }
}

SynthSpec default_synth_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  struct Layout {
    double center_t, center_f, width;
    double weight0;
  };
  const Layout layouts[] = {{5.0, 4.0, 3.0, 0.5}, {9.0, 11.0, 4.0, 0.4}, {7.5, 7.5, 5.0, 0.5}, {11.0, 5.0, 3.5, 0.6}};
  for (const Layout& l : layouts) {
    ConditionSpec cond;
    cond.weights = {l.weight0, 1.0 - l.weight0};
    cond.patterns = {bump(spec.rows, spec.cols, l.center_t, l.center_f, l.width, 2.5, 0.0),
                     bump(spec.rows, spec.cols, l.center_t, l.center_f, l.width, 2.5, 2.5)};
    spec.conditions.push_back(std::move(cond));
  }
  return spec;
}

std::vector<Grid> ConditionedDataset::condition_specs(std::uint32_t condition) const {
  std::vector<Grid> out;
  for (const auto& r : records) {
    if (r.condition == condition) out.push_back(r.spec);
  }
  return out;
}

Grid ar_noise_field(std::size_t rows, std::size_t cols, double noise_std, double rho_t, double rho_f, Rng& rng) {
  Grid n(rows, cols);
  const double st = std::sqrt(1.0 - rho_t * rho_t);
  const double sf = std::sqrt(1.0 - rho_f * rho_f);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t f = 0; f < cols; ++f) {
      const double eps = rng.normal();
      if (t == 0 && f == 0) {
        n(t, f) = noise_std * eps;
      } else if (t == 0) {
        n(t, f) = rho_f * n(t, f - 1) + noise_std * sf * eps;
      } else if (f == 0) {
        n(t, f) = rho_t * n(t - 1, f) + noise_std * st * eps;
      } else {
        n(t, f) = rho_t * n(t - 1, f) + rho_f * n(t, f - 1) - rho_t * rho_f * n(t - 1, f - 1) +
                  noise_std * st * sf * eps;
      }
    }
  }
  return n;
}

ConditionedDataset generate(const SynthSpec& spec, std::size_t samples_per_condition) {
  spec.validate();
  if (samples_per_condition == 0) throw DomainError("samples per condition must be positive");
  ConditionedDataset data;
  data.n_conditions = spec.conditions.size();
  const std::size_t total = data.n_conditions * samples_per_condition;
  data.records.resize(total);
  parallel_for(total, [&](std::size_t i) {
    const std::size_t c = i / samples_per_condition;
    const std::size_t n = i % samples_per_condition;
    const ConditionSpec& cond = spec.conditions[c];
    Rng rng(stream_seed(spec.seed, c, n));
    const std::size_t mode = rng.categorical(cond.weights);
    Grid g = ar_noise_field(spec.rows, spec.cols, cond.noise_std, cond.rho_t, cond.rho_f, rng);
    const Grid& pattern = cond.patterns[mode];
    for (std::size_t j = 0; j < g.size(); ++j) g.values()[j] += pattern.values()[j];
    data.records[i] = {static_cast<std::uint32_t>(c), std::move(g)};
  });
  return data;
}

double UnivariateMixture::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) m += weights[i] * means[i];
  return m;
}

double UnivariateMixture::cdf(double x) const {
  double p = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) p += weights[i] * normal_cdf((x - means[i]) / std_dev);
  return p;
}

UnivariateMixture true_bin_marginal(const SynthSpec& spec, std::size_t condition, std::size_t t, std::size_t f) {
  if (condition >= spec.conditions.size()) throw DomainError("condition index out of range");
  if (t >= spec.rows || f >= spec.cols) throw DomainError("bin index out of range");
  const ConditionSpec& cond = spec.conditions[condition];
  UnivariateMixture m;
  m.weights = cond.weights;
  m.std_dev = cond.noise_std;
  for (const Grid& p : cond.patterns) m.means.push_back(p(t, f));
  return m;
}

TvcGmmField generating_field(const SynthSpec& spec, std::size_t condition) {
  spec.validate();
  if (condition >= spec.conditions.size()) throw DomainError("condition index out of range");
  const ConditionSpec& cond = spec.conditions[condition];
  TvcGmmField field(spec.rows, spec.cols, cond.weights.size());
  const double var = cond.noise_std * cond.noise_std;
  for (std::size_t t = 0; t < spec.rows; ++t) {
    const std::size_t nt = std::min(t + 1, spec.rows - 1);
    for (std::size_t f = 0; f < spec.cols; ++f) {
      const std::size_t nf = std::min(f + 1, spec.cols - 1);
      const std::size_t pos_t[3] = {t, nt, t};
      const std::size_t pos_f[3] = {f, f, nf};
      Mat3 cov{};
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const auto dt = static_cast<double>(pos_t[i] > pos_t[j] ? pos_t[i] - pos_t[j] : pos_t[j] - pos_t[i]);
          const auto df = static_cast<double>(pos_f[i] > pos_f[j] ? pos_f[i] - pos_f[j] : pos_f[j] - pos_f[i]);
          cov[i][j] = var * std::pow(cond.rho_t, dt) * std::pow(cond.rho_f, df);
        }
      }
      const Chol3 chol = chol_from_covariance(cov);
      auto comps = field.bin(t, f);
      for (std::size_t m = 0; m < comps.size(); ++m) {
        const Grid& p = cond.patterns[m];
        comps[m].logit = std::log(cond.weights[m]);
        comps[m].mean = {p(t, f), p(nt, f), p(t, nf)};
        comps[m].chol = chol;
      }
    }
  }
  return field;
}

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

Histogram marginal_histogram(const ConditionedDataset& data, std::uint32_t condition, Axis axis, std::size_t index,
                             std::size_t bins) {
  if (bins == 0) throw DomainError("histogram needs at least one bin");
  std::vector<double> values;
  for (const auto& r : data.records) {
    if (r.condition != condition) continue;
    if (axis == Axis::time) {
      if (index >= r.spec.cols()) throw DomainError("frequency index out of range");
      for (std::size_t t = 0; t < r.spec.rows(); ++t) values.push_back(r.spec(t, index));
    } else {
      if (index >= r.spec.rows()) throw DomainError("time index out of range");
      for (std::size_t f = 0; f < r.spec.cols(); ++f) values.push_back(r.spec(index, f));
    }
  }
  if (values.empty()) throw DomainError("no records for condition " + std::to_string(condition));
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto i = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    ++h.counts[std::min(i, bins - 1)];
  }
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out.precision(9);
  out << "bin_low,bin_high,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << h.edges[i] << ',' << h.edges[i + 1] << ',' << h.counts[i] << '\n';
  }
  return out.str();
}

}  // namespace melmix
