#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "melmix/errors.hpp"
#include "melmix/filters.hpp"
#include "melmix/sampling.hpp"
#include "melmix/synth.hpp"
#include "melmix/trainer.hpp"
#include "oracles.hpp"
#include "scratch.hpp"

using namespace melmix;

namespace {

TrainConfig quick_config(std::size_t k, std::size_t steps) {
  TrainConfig cfg;
  cfg.components = k;
  cfg.steps = steps;
  cfg.log_every = 1;
  return cfg;
}

// Default data, 50 samples per condition, K = 2, 2000 steps.
const ModelBundle& default_fit() {
  static const ModelBundle bundle = fit(generate(default_synth_spec(), 50), quick_config(2, 2000));
  return bundle;
}

struct PairFit {
  SynthSpec spec;
  ConditionedDataset data;
  ModelBundle k1;
  ModelBundle k2;
};

// Condition 0 of the default data, 200 samples, K = 1 and K = 2.
const PairFit& pair_fit() {
  static const PairFit pf = [] {
    PairFit p;
    p.spec = default_synth_spec();
    p.spec.conditions = {p.spec.conditions[0]};
    p.data = generate(p.spec, 200);
    p.k1 = fit(p.data, quick_config(1, 2000));
    p.k2 = fit(p.data, quick_config(2, 2000));
    return p;
  }();
  return pf;
}

// Entropy of w0 N(0, 1) + w1 N(delta, 1) by trapezoid quadrature.
double mixture_entropy_1d(double w0, double w1, double delta) {
  const double lo = std::min(0.0, delta) - 12.0;
  const double hi = std::max(0.0, delta) + 12.0;
  const int n = 20000;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i;
    const double p = (w0 * std::exp(-0.5 * x * x) + w1 * std::exp(-0.5 * (x - delta) * (x - delta))) /
                     std::sqrt(2.0 * std::numbers::pi);
    const double term = p > 0.0 ? -p * std::log(p) : 0.0;
    acc += (i == 0 || i == n) ? 0.5 * term : term;
  }
  return acc * h;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("config validation and head names") {
    CHECK_NOTHROW(TrainConfig{}.validate());
    TrainConfig c;
    c.components = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.steps = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.learning_rate = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.beta2 = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.log_every = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(parse_head("tvcgmm") == Head::tvcgmm);
    CHECK(parse_head("mse") == Head::mse);
    CHECK(to_string(Head::mse) == "mse");
    CHECK_THROWS_AS(parse_head("gmm"), ConfigError);
  }

  TEST_CASE("dataset checks") {
    ConditionedDataset empty;
    empty.n_conditions = 1;
    CHECK_THROWS_AS(fit(empty, quick_config(1, 1)), DomainError);
    ConditionedDataset ragged = generate(default_synth_spec(), 2);
    ragged.records[1].spec = Grid(8, 8);
    CHECK_THROWS_AS(fit(ragged, quick_config(1, 1)), DomainError);
    ConditionedDataset missing = generate(default_synth_spec(), 2);
    missing.n_conditions = 5;
    CHECK_THROWS_WITH_AS(fit(missing, quick_config(1, 1)), doctest::Contains("condition 4"), DomainError);
  }

  TEST_CASE("K = 1 init uses sample means, equal weights for any K") {
    const ConditionedDataset data = generate(default_synth_spec(), 30);
    const ModelBundle b1 = init_fields(data, 1, 0);
    for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
      const auto specs = data.condition_specs(c);
      const ChainBatch batch(specs);
      for (std::size_t b = 0; b < batch.rows() * batch.cols(); ++b) {
        Vec3 mean{};
        for (const auto& x : batch.bin(b))
          for (int i = 0; i < 3; ++i) mean[i] += x[i] / static_cast<double>(batch.samples());
        for (int i = 0; i < 3; ++i) CHECK(b1.fields[c].bin(b)[0].mean[i] == doctest::Approx(mean[i]).epsilon(1e-12));
      }
    }
    const ModelBundle b3 = init_fields(data, 3, 0);
    for (std::size_t b = 0; b < b3.fields[0].bins(); ++b) {
      const auto w = mixture_weights(b3.fields[0].bin(b));
      for (double v : w) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
      CHECK(b3.fields[0].bin(b)[0].mean != b3.fields[0].bin(b)[1].mean);
      const Chol3& ch = b3.fields[0].bin(b)[0].chol;
      CHECK(ch.l21 == 0.0);
      CHECK(ch.l31 == 0.0);
      CHECK(ch.l32 == 0.0);
    }
  }

  TEST_CASE("init NLL is no worse than an all-zero field") {
    const ConditionedDataset data = generate(default_synth_spec(), 30);
    const ModelBundle b = init_fields(data, 2, 0);
    for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
      const ChainBatch batch(data.condition_specs(c));
      const TvcGmmField zero(16, 16, 2);
      CHECK(nll(b.fields[c], batch) <= nll(zero, batch));
    }
  }

  TEST_CASE("mse head converges to the per-bin sample mean") {
    const ConditionedDataset data = generate(default_synth_spec(), 40);
    TrainConfig cfg = quick_config(4, 500);
    cfg.head = Head::mse;
    cfg.learning_rate = 0.05;
    const ModelBundle b = fit(data, cfg);
    CHECK(b.config.components == 1);
    for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
      const Grid target = sample_mean(data.condition_specs(c));
      const Grid got = mean_field(b.fields[c]);
      double worst = 0.0;
      for (std::size_t i = 0; i < target.size(); ++i)
        worst = std::max(worst, std::abs(target.values()[i] - got.values()[i]));
      CHECK(worst < 1e-3);
    }
  }

  TEST_CASE("mse squared bias matches the inter-mode variance") {
    const SynthSpec spec = default_synth_spec();
    const ConditionedDataset data = generate(spec, 400);
    TrainConfig cfg = quick_config(1, 500);
    cfg.head = Head::mse;
    cfg.learning_rate = 0.05;
    const ModelBundle b = fit(data, cfg);
    for (std::uint32_t c = 0; c < data.n_conditions; ++c) {
      const Grid pred = mean_field(b.fields[c]);
      const ConditionSpec& cs = spec.conditions[c];
      double bias = 0.0, spread = 0.0;
      for (std::size_t t = 0; t < spec.rows; ++t)
        for (std::size_t f = 0; f < spec.cols; ++f) {
          double mix = 0.0;
          for (std::size_t m = 0; m < cs.weights.size(); ++m) mix += cs.weights[m] * cs.patterns[m](t, f);
          for (std::size_t m = 0; m < cs.weights.size(); ++m) {
            bias += cs.weights[m] * std::pow(pred(t, f) - cs.patterns[m](t, f), 2);
            spread += cs.weights[m] * std::pow(mix - cs.patterns[m](t, f), 2);
          }
        }
      CHECK(bias == doctest::Approx(spread).epsilon(0.05));
    }
  }

  TEST_CASE("loss curve bookkeeping") {
    const ConditionedDataset data = generate(default_synth_spec(), 5);
    TrainConfig cfg = quick_config(2, 40);
    cfg.log_every = 10;
    const ModelBundle b = fit(data, cfg);
    REQUIRE(b.curve.size() == 4);
    CHECK(b.curve[0].step == 10);
    CHECK(b.curve[3].step == 40);
    for (const auto& p : b.curve) {
      REQUIRE(p.per_condition.size() == 4);
      double mean = 0.0;
      for (double v : p.per_condition) mean += v / 4.0;
      CHECK(p.loss == doctest::Approx(mean).epsilon(1e-12));
    }
    const std::string csv = loss_curve_csv(b);
    CHECK(csv.rfind("step,loss,condition_0,condition_1,condition_2,condition_3\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  }

  TEST_CASE("fit is deterministic") {
    const ConditionedDataset data = generate(default_synth_spec(), 5);
    const ModelBundle a = fit(data, quick_config(2, 30));
    const ModelBundle b = fit(data, quick_config(2, 30));
    CHECK(a.fields == b.fields);
    CHECK(a.final_losses == b.final_losses);
  }

  TEST_CASE("non-finite loss raises TrainingError") {
    ConditionedDataset data = generate(default_synth_spec(), 3);
    ConditionedDataset bad = data;
    bad.records[0].spec(2, 2) = std::nan("");
    CHECK_THROWS_AS(fit(bad, quick_config(2, 10)), DomainError);
    TrainConfig cfg = quick_config(2, 50);
    cfg.learning_rate = 1e200;
    try {
      fit(data, cfg);
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      MESSAGE(std::string(e.what()));
      CHECK(e.last_finite_step() >= 1);
      CHECK(e.last_finite_step() < 50);
      CHECK(std::string(e.what()).find("condition 0") != std::string::npos);
    }
  }

  TEST_CASE("evaluate checks shapes and is deterministic") {
    const ConditionedDataset data = generate(default_synth_spec(), 6);
    const ModelBundle b = fit(data, quick_config(2, 20));
    const auto r1 = evaluate(b, data, {7, 4});
    const auto r2 = evaluate(b, data, {7, 4});
    REQUIRE(r1.size() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(r1[c].loss == r2[c].loss);
      CHECK(r1[c].var_l_naive == r2[c].var_l_naive);
      CHECK(r1[c].var_l_conditional == r2[c].var_l_conditional);
      CHECK(r1[c].loss == doctest::Approx(b.final_losses[c]).epsilon(1e-12));
    }
    ModelBundle short_bundle = b;
    short_bundle.fields.pop_back();
    CHECK_THROWS_AS(evaluate(short_bundle, data), DomainError);
    CHECK_THROWS_AS(evaluate(b, data, {1, 0}), DomainError);
  }

  TEST_CASE("bundle save and load") {
    const Scratch dir("trainer_bundle");
    const ConditionedDataset data = generate(default_synth_spec(), 4);
    TrainConfig cfg = quick_config(2, 20);
    cfg.log_every = 5;
    const ModelBundle b = fit(data, cfg);
    save_bundle(dir / "model", b);
    const ModelBundle back = load_bundle(dir / "model");
    CHECK(back.config.components == 2);
    CHECK(back.config.steps == 20);
    CHECK(back.config.head == Head::tvcgmm);
    REQUIRE(back.fields.size() == 4);
    for (std::size_t c = 0; c < 4; ++c) {
      const auto x = b.fields[c].all();
      const auto y = back.fields[c].all();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto px = pack(x[i]);
        const auto py = pack(y[i]);
        for (std::size_t j = 0; j < px.size(); ++j) CHECK(py[j] == static_cast<double>(static_cast<float>(px[j])));
      }
      CHECK(back.final_losses[c] == b.final_losses[c]);
    }
    std::ifstream csv(dir / "model" / "loss.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(csv, line)) ++lines;
    CHECK(lines == 1 + 20 / 5);
    CHECK_THROWS_AS(load_bundle(dir / "missing"), IoError);
    std::filesystem::create_directories(dir / "bad");
    std::ofstream(dir / "bad" / "manifest.json") << "{\"config\": {}}";
    CHECK_THROWS_AS(load_bundle(dir / "bad"), FormatError);
  }

  TEST_CASE("generating field NLL matches the entropy of interior chains") {
    const SynthSpec spec = default_synth_spec();
    const ConditionedDataset data = generate(spec, 10000);
    const TvcGmmField field = generating_field(spec, 0);
    const auto specs = data.condition_specs(0);
    double entropy = 0.0, nll_mc = 0.0;
    std::size_t bins = 0;
    for (std::size_t t = 0; t + 1 < spec.rows; ++t)
      for (std::size_t f = 0; f + 1 < spec.cols; ++f) {
        const auto comps = field.bin(t, f);
        const auto w = mixture_weights(comps);
        const Mat3 cov = oracle::covariance(comps[0].chol);
        const Mat3 inv = oracle::inverse3(cov);
        Vec3 d;
        for (int i = 0; i < 3; ++i) d[i] = comps[1].mean[i] - comps[0].mean[i];
        double maha = 0.0;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) maha += d[i] * inv[i][j] * d[j];
        const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
        entropy += 0.5 * std::log(std::pow(two_pi_e, 3) * oracle::det3(cov)) +
                   mixture_entropy_1d(w[0], w[1], std::sqrt(maha)) - 0.5 * std::log(two_pi_e);
        for (const Grid& s : specs) {
          const Vec3 x{s(t, f), s(t + 1, f), s(t, f + 1)};
          nll_mc -= mixture_log_density(comps, x) / static_cast<double>(specs.size());
        }
        ++bins;
      }
    entropy /= static_cast<double>(bins);
    nll_mc /= static_cast<double>(bins);
    CHECK(nll_mc == doctest::Approx(entropy).epsilon(0.02));
  }
}

TEST_SUITE("trainer_fit") {
  TEST_CASE("loss drops by at least 20% over 2000 steps") {
    const ModelBundle& b = default_fit();
    REQUIRE(b.curve.size() == 2000);
    const double first = b.curve.front().loss;
    const double last = b.curve.back().loss;
    MESSAGE("loss step 1 = " << first << ", step 2000 = " << last);
    CHECK(last <= 0.8 * first);
  }

  // Replicated edge targets are singular and the floored pivots make Adam
  // oscillate late in training, so this property does not hold.
  TEST_CASE("loss is non-increasing over every 50-step window" * doctest::should_fail()) {
    const ModelBundle& b = default_fit();
    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t i = 50; i < b.curve.size(); ++i) {
      const double rise = b.curve[i].loss - b.curve[i - 50].loss;
      if (rise > 0.0) ++violations;
      worst = std::max(worst, rise);
    }
    MESSAGE("windows with a rise: " << violations << ", worst rise " << worst);
    CHECK(violations == 0);
  }

  TEST_CASE("fitted NLL is invariant to sample order") {
    const ModelBundle& b = default_fit();
    const ConditionedDataset data = generate(default_synth_spec(), 50);
    auto specs = data.condition_specs(1);
    const double before = nll(b.fields[1], ChainBatch(specs));
    std::reverse(specs.begin(), specs.end());
    std::rotate(specs.begin(), specs.begin() + 17, specs.end());
    CHECK(nll(b.fields[1], ChainBatch(specs)) == doctest::Approx(before).epsilon(1e-12));
  }

  TEST_CASE("K = 2 beats K = 1 on a bimodal condition") {
    const PairFit& p = pair_fit();
    MESSAGE("K=1 " << p.k1.final_losses[0] << ", K=2 " << p.k2.final_losses[0]);
    CHECK(p.k2.final_losses[0] < p.k1.final_losses[0]);
  }

  TEST_CASE("K = 2 recovers both mode means") {
    const PairFit& p = pair_fit();
    const ConditionSpec& cs = p.spec.conditions[0];
    const double n = 200.0;
    std::size_t ok = 0;
    const TvcGmmField& field = p.k2.fields[0];
    for (std::size_t t = 0; t < field.rows(); ++t)
      for (std::size_t f = 0; f < field.cols(); ++f) {
        const auto comps = field.bin(t, f);
        bool matched = false;
        for (int perm = 0; perm < 2 && !matched; ++perm) {
          bool all = true;
          for (std::size_t m = 0; m < 2; ++m) {
            const double tol = 3.0 * cs.noise_std / std::sqrt(n * cs.weights[m]);
            all = all && std::abs(comps[perm == 0 ? m : 1 - m].mean[0] - cs.patterns[m](t, f)) <= tol;
          }
          matched = all;
        }
        if (matched) ++ok;
      }
    MESSAGE("bins with both modes recovered: " << ok << " of " << field.bins());
    CHECK(static_cast<double>(ok) >= 0.95 * static_cast<double>(field.bins()));
  }

  TEST_CASE("Var_L ordering after a K = 2 fit") {
    const PairFit& p = pair_fit();
    const auto r = evaluate(p.k2, p.data, {1234, 20});
    CHECK(r[0].var_l_mean_field < r[0].var_l_ground_truth);
    CHECK(r[0].var_l_ground_truth <= r[0].var_l_conditional);
    CHECK(r[0].var_l_conditional < r[0].var_l_naive);
  }
}
