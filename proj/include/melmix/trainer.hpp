#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "melmix/synth.hpp"
#include "melmix/tvcgmm.hpp"

namespace melmix {

/// tvcgmm: mixture NLL on chain targets. mse: per-bin mean table trained
/// with squared error, the over-smoothing baseline.
enum class Head { tvcgmm, mse };

std::string to_string(Head head);
Head parse_head(const std::string& name);

struct TrainConfig {
  Head head = Head::tvcgmm;
  std::size_t components = 2;
  std::size_t steps = 2000;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t log_every = 10;
  /// Std of the Gaussian jitter added to initial means when K > 1.
  double init_jitter = 0.1;

  void validate() const;
};

struct LossPoint {
  std::size_t step = 0;
  /// Mean over conditions.
  double loss = 0.0;
  std::vector<double> per_condition;
};

/// One fitted field per condition (the mse head is stored as a K = 1 field
/// with floored covariance, so every sampler works on it unchanged).
struct ModelBundle {
  TrainConfig config;
  std::vector<TvcGmmField> fields;
  std::vector<LossPoint> curve;
  std::vector<double> final_losses;
};

/// Means from the per-bin sample means of the chain targets (plus jitter
/// when K > 1), diagonal scales from the per-bin sample stds, zero
/// off-diagonals and zero logits.
ModelBundle init_fields(const ConditionedDataset& data, std::size_t components, std::uint64_t seed,
                        double jitter = 0.1);

/// Full-batch Adam per condition. Throws TrainingError on a non-finite loss.
ModelBundle fit(const ConditionedDataset& data, const TrainConfig& cfg);

/// K = 1 field whose chains are (m[t,f], m[t+1,f], m[t,f+1]) with the
/// covariance pinned at the floor.
TvcGmmField mse_field(const Grid& means);

/// Per-bin sample mean of a condition's spectrograms.
Grid sample_mean(const std::vector<Grid>& specs);

struct EvalConfig {
  std::uint64_t seed = 1234;
  std::size_t samples = 20;
};

struct ConditionReport {
  std::uint32_t condition = 0;
  /// NLL for the tvcgmm head, per-bin mean squared error for mse.
  double loss = 0.0;
  double var_l_mean_field = 0.0;
  double var_l_naive = 0.0;
  double var_l_conditional = 0.0;
  /// Mean Var_L over the first `samples` records of the condition.
  double var_l_ground_truth = 0.0;
};

std::vector<ConditionReport> evaluate(const ModelBundle& bundle, const ConditionedDataset& data,
                                      const EvalConfig& cfg = {});

/// condition_<id>.tvcg per condition, manifest.json and loss.csv.
void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& dir);

/// "step,loss,condition_0,..." with one row per logged step.
std::string loss_curve_csv(const ModelBundle& bundle);

}  // namespace melmix
