#pragma once

// Training loop: single-head and mixed-head modes, restricted-range
// fine-tuning, metrics, checkpoints.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "difflab/checkpoint.hpp"
#include "difflab/datasets.hpp"
#include "difflab/loss_profile.hpp"
#include "difflab/model.hpp"
#include "difflab/optimizer.hpp"
#include "difflab/schedule.hpp"
#include "difflab/tsampler.hpp"

namespace difflab {

struct ScheduleConfig {
  std::string kind = "linear";  // linear | cosine
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  double cosine_s = 0.008;

  Schedule build() const;
  nlohmann::json to_json() const;
  static ScheduleConfig from_json(const nlohmann::json& j);
};

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Uniform;
  std::optional<std::vector<double>> weights;  // inline table, index t − 1
  std::string weights_csv;                     // or a CSV file (t,weight)
  std::string preset;                          // or "late_heavy"
  std::optional<SlotPartition> partition;      // inline partition
  std::string partition_json;                  // or a partition file
  int adapt_period = 500;
  double gamma = 1.0;
  std::size_t adapt_n_per_t = 16;

  // Relative file paths resolve against base_dir.
  SamplerSpec build(int T, const std::filesystem::path& base_dir = {}) const;
  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

enum class MixedGranularity { PerSample, PerBatch };
enum class MixedObjective { Selected, NormalizedSum };

struct MixedOptions {
  MixedGranularity granularity = MixedGranularity::PerSample;
  ErrorSpace selection_space = ErrorSpace::X0;
  MixedObjective objective = MixedObjective::Selected;
};

struct TrainConfig {
  bool mixed = false;
  PredictionType pred_type = PredictionType::A;  // single mode
  MixedOptions mixed_options;
  SamplerConfig sampler;
  std::size_t batch = 128;
  long long steps = 20000;
  double lr = 1e-3;
  std::optional<std::pair<int, int>> restrict_range;
  std::uint64_t seed = 0;
  long long checkpoint_every = 0;
  long long profile_every = 0;
  std::size_t profile_n_per_t = 256;
  ErrorSpace profile_space = ErrorSpace::Target;
  DatasetSpec dataset;
  ScheduleConfig schedule;
  ModelConfig model;  // heads and T are derived from mode and schedule
  bool record_wall_time = false;
  // Not serialized: keep per-head output gradients in each StepReport.
  bool record_head_grads = false;
  // Resolves relative sampler file paths.
  std::filesystem::path base_dir;

  std::string mode_name() const;  // "d" | "v" | "a" | "mixed"
  ModelConfig model_config() const;
  void validate() const;
  nlohmann::json to_json() const;
  // Rejects unknown keys at every level.
  static TrainConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

struct StepReport {
  long long step = 0;
  std::vector<int> ts;
  std::array<std::optional<double>, 3> head_loss;  // raw-target MSE per head
  std::array<double, 3> selected_frac{0.0, 0.0, 0.0};
  std::vector<PredictionType> selected;      // per sample
  std::vector<double> sample_selection_loss; // per sample, selection space, for the selected head
  std::vector<std::array<double, 3>> sample_head_loss;  // per sample, selection space, all heads (mixed)
  double loss = 0.0;  // the backpropagated objective
  double grad_norm = 0.0;
  double ms = 0.0;
  std::size_t amplified = 0;  // A-type recoveries with ᾱ_t < 1e-12
  // Filled when TrainConfig::record_head_grads is set.
  PerHead<Tensor> head_output_grads;
  PerHead<std::array<Tensor, 2>> head_param_grads;
};

inline constexpr const char* kMetricsHeader =
    "step,t_min,t_max,loss_d,loss_v,loss_a,selected_frac_d,selected_frac_v,selected_frac_a,grad_norm,ms_per_step";

std::string metrics_row(const StepReport& r, bool with_time);

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);
  // exact = true restores every stream, optimizer and sampler state and
  // requires an identical config hash. exact = false keeps parameters,
  // optimizer moments and step counter but takes randomness and sampling
  // from `cfg` (fine-tuning).
  Trainer(TrainConfig cfg, const Checkpoint& ckpt, bool exact);

  StepReport step();

  Checkpoint checkpoint() const;
  const TrainConfig& config() const noexcept { return cfg_; }
  const DenoiserModel& model() const noexcept { return model_; }
  DenoiserModel& model() noexcept { return model_; }
  const Schedule& schedule() const noexcept { return schedule_; }
  const Tensor& data() const noexcept { return data_; }
  const TimestepSampler& sampler() const noexcept { return sampler_; }
  const AdamState& optimizer() const noexcept { return adam_; }
  long long step_count() const noexcept { return step_; }
  // Selection counts per (t − 1, head code), accumulated in mixed mode.
  const std::vector<std::array<double, 3>>& selection_counts() const noexcept { return sel_counts_; }
  void set_last_checkpoint(std::string path) { last_checkpoint_ = std::move(path); }

 private:
  void init_common();
  StepReport step_impl();

  TrainConfig cfg_;
  Schedule schedule_;
  Tensor data_;
  DenoiserModel model_;
  TimestepSampler sampler_;
  AdamState adam_;
  RngStream data_rng_, noise_rng_, ts_rng_;
  long long step_ = 0;
  std::vector<std::array<double, 3>> sel_counts_;
  std::string last_checkpoint_;
};

// Mixed-model inference table: per t the head chosen most often in training
// (ties by selection priority; A where no data).
std::vector<PredictionType> head_table_from_counts(const std::vector<std::array<double, 3>>& counts);
std::vector<std::array<double, 3>> selection_counts_from_checkpoint(const Checkpoint& ckpt);

struct TrainArtifacts {
  std::filesystem::path metrics_csv;
  std::filesystem::path final_checkpoint;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::filesystem::path> profiles;
  std::optional<std::filesystem::path> selection_csv;
};

// Runs `steps` steps (default cfg.steps) writing metrics.csv, periodic
// checkpoints and profiles, final.ckpt, and selection_freq.csv in mixed mode.
TrainArtifacts run_training(Trainer& trainer, const std::filesystem::path& outdir,
                            std::optional<long long> steps = std::nullopt);

// Rebuild model, schedule and data description from a checkpoint.
DenoiserModel model_from_checkpoint(const Checkpoint& ckpt);
Schedule schedule_from_checkpoint(const Checkpoint& ckpt);
TrainConfig config_from_checkpoint(const Checkpoint& ckpt);

}  // namespace difflab
