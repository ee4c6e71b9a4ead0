#include "difflab/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>

#include "difflab/csv.hpp"
#include "difflab/errors.hpp"
#include "difflab/profiler.hpp"

namespace difflab {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string_view name(MixedGranularity g) { return g == MixedGranularity::PerSample ? "per_sample" : "per_batch"; }
std::string_view name(MixedObjective o) { return o == MixedObjective::Selected ? "selected" : "normalized_sum"; }

nlohmann::json stream_json(const RngStream& s) { return {s.state().key, s.state().counter}; }
RngStream stream_from_json(const nlohmann::json& j) {
  return RngStream(StreamState{j.at(0).get<std::uint64_t>(), j.at(1).get<std::uint64_t>()});
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

Schedule ScheduleConfig::build() const {
  if (kind == "linear") return Schedule::linear(T, beta_start, beta_end);
  if (kind == "cosine") return Schedule::cosine(T, cosine_s);
  throw ConfigError("schedule: unknown kind '" + kind + "' (expected linear|cosine)");
}

nlohmann::json ScheduleConfig::to_json() const {
  return {{"kind", kind}, {"T", T}, {"beta_start", beta_start}, {"beta_end", beta_end}, {"cosine_s", cosine_s}};
}

ScheduleConfig ScheduleConfig::from_json(const nlohmann::json& j) {
  check_keys(j, {"kind", "T", "beta_start", "beta_end", "cosine_s"}, "schedule");
  ScheduleConfig c;
  read_opt(j, "kind", c.kind);
  read_opt(j, "T", c.T);
  read_opt(j, "beta_start", c.beta_start);
  read_opt(j, "beta_end", c.beta_end);
  read_opt(j, "cosine_s", c.cosine_s);
  return c;
}

SamplerSpec SamplerConfig::build(int T, const std::filesystem::path& base_dir) const {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  SamplerSpec s;
  s.kind = kind;
  s.T = T;
  s.adapt_period = adapt_period;
  s.gamma = gamma;
  if (kind == SamplerKind::Weighted) {
    const int sources = (weights ? 1 : 0) + (!weights_csv.empty() ? 1 : 0) + (!preset.empty() ? 1 : 0);
    if (sources != 1) throw ConfigError("sampler: weighted needs exactly one of weights, weights_csv, preset");
    if (weights) s.weights = *weights;
    else if (!weights_csv.empty()) s.weights = read_weight_csv(resolve(weights_csv), T);
    else if (preset == "late_heavy") s.weights = late_heavy_weights(T);
    else throw ConfigError("sampler: unknown preset '" + preset + "'");
  }
  if (kind == SamplerKind::SlotStratified) {
    if (partition && !partition_json.empty()) throw ConfigError("sampler: give partition or partition_json, not both");
    if (partition) s.partition = *partition;
    else if (!partition_json.empty()) s.partition = SlotPartition::read_json(resolve(partition_json));
    else throw ConfigError("sampler: slot_stratified needs a partition");
  }
  if (kind == SamplerKind::LossAdaptive && adapt_n_per_t < 1) throw ConfigError("sampler: adapt_n_per_t must be >= 1");
  s.validate_and_normalize();
  return s;
}

nlohmann::json SamplerConfig::to_json() const {
  nlohmann::json j = {{"kind", name(kind)}};
  if (weights) j["weights"] = *weights;
  if (!weights_csv.empty()) j["weights_csv"] = weights_csv;
  if (!preset.empty()) j["preset"] = preset;
  if (partition) j["partition"] = partition->to_json();
  if (!partition_json.empty()) j["partition_json"] = partition_json;
  if (kind == SamplerKind::LossAdaptive) {
    j["adapt_period"] = adapt_period;
    j["gamma"] = gamma;
    j["adapt_n_per_t"] = adapt_n_per_t;
  }
  return j;
}

SamplerConfig SamplerConfig::from_json(const nlohmann::json& j) {
  check_keys(j, {"kind", "weights", "weights_csv", "preset", "partition", "partition_json", "adapt_period", "gamma",
                 "adapt_n_per_t"},
             "sampler");
  SamplerConfig c;
  if (j.contains("kind")) c.kind = parse_sampler_kind(j.at("kind").get<std::string>());
  if (j.contains("weights")) c.weights = j.at("weights").get<std::vector<double>>();
  read_opt(j, "weights_csv", c.weights_csv);
  read_opt(j, "preset", c.preset);
  if (j.contains("partition")) c.partition = SlotPartition::from_json(j.at("partition"));
  read_opt(j, "partition_json", c.partition_json);
  read_opt(j, "adapt_period", c.adapt_period);
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "adapt_n_per_t", c.adapt_n_per_t);
  return c;
}

std::string TrainConfig::mode_name() const { return mixed ? "mixed" : std::string(name(pred_type)); }

ModelConfig TrainConfig::model_config() const {
  ModelConfig m = model;
  m.T = schedule.T;
  m.data_dim = 2;
  if (mixed) m.heads = {PredictionType::D, PredictionType::V, PredictionType::A};
  else m.heads = {pred_type};
  return m;
}

void TrainConfig::validate() const {
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and >= 0");
  if (restrict_range) {
    const auto [lo, hi] = *restrict_range;
    if (lo < 1 || hi > schedule.T || lo > hi) throw ConfigError("train: restrict_range must lie within [1, T]");
  }
  if (checkpoint_every < 0 || profile_every < 0) throw ConfigError("train: *_every must be >= 0");
  if (profile_every > 0 && profile_n_per_t < 1) throw ConfigError("train: profile_n_per_t must be >= 1");
  model_config().validate();
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["mode"] = mode_name();
  if (mixed) {
    j["mixed"] = {{"granularity", name(mixed_options.granularity)},
                  {"selection_space", name(mixed_options.selection_space)},
                  {"objective", name(mixed_options.objective)}};
  }
  j["sampler"] = sampler.to_json();
  j["batch"] = batch;
  j["steps"] = steps;
  j["lr"] = lr;
  j["restrict_range"] = restrict_range ? nlohmann::json{restrict_range->first, restrict_range->second} : nlohmann::json();
  j["seed"] = seed;
  j["checkpoint_every"] = checkpoint_every;
  j["profile_every"] = profile_every;
  j["profile_n_per_t"] = profile_n_per_t;
  j["profile_space"] = name(profile_space);
  j["dataset"] = dataset.to_json();
  j["schedule"] = schedule.to_json();
  j["model"] = {{"time_embed_dim", model.time_embed_dim}, {"hidden", model.hidden}};
  j["record_wall_time"] = record_wall_time;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  check_keys(j, {"mode", "mixed", "sampler", "batch", "steps", "lr", "restrict_range", "seed", "checkpoint_every",
                 "profile_every", "profile_n_per_t", "profile_space", "dataset", "schedule", "model", "record_wall_time"},
             "train");
  TrainConfig c;
  try {
    if (j.contains("mode")) {
      const auto m = j.at("mode").get<std::string>();
      c.mixed = m == "mixed";
      if (!c.mixed) c.pred_type = parse_prediction_type(m);
    }
    if (j.contains("mixed")) {
      const auto& mj = j.at("mixed");
      check_keys(mj, {"granularity", "selection_space", "objective"}, "train.mixed");
      if (mj.contains("granularity")) {
        const auto g = mj.at("granularity").get<std::string>();
        if (g == "per_sample") c.mixed_options.granularity = MixedGranularity::PerSample;
        else if (g == "per_batch") c.mixed_options.granularity = MixedGranularity::PerBatch;
        else throw ConfigError("train.mixed: unknown granularity '" + g + "'");
      }
      if (mj.contains("selection_space")) {
        c.mixed_options.selection_space = parse_error_space(mj.at("selection_space").get<std::string>());
      }
      if (mj.contains("objective")) {
        const auto o = mj.at("objective").get<std::string>();
        if (o == "selected") c.mixed_options.objective = MixedObjective::Selected;
        else if (o == "normalized_sum") c.mixed_options.objective = MixedObjective::NormalizedSum;
        else throw ConfigError("train.mixed: unknown objective '" + o + "'");
      }
    }
    if (j.contains("sampler")) c.sampler = SamplerConfig::from_json(j.at("sampler"));
    read_opt(j, "batch", c.batch);
    read_opt(j, "steps", c.steps);
    read_opt(j, "lr", c.lr);
    if (j.contains("restrict_range") && !j.at("restrict_range").is_null()) {
      const auto r = j.at("restrict_range").get<std::vector<int>>();
      if (r.size() != 2) throw ConfigError("train: restrict_range must be [lo, hi]");
      c.restrict_range = std::pair{r[0], r[1]};
    }
    read_opt(j, "seed", c.seed);
    read_opt(j, "checkpoint_every", c.checkpoint_every);
    read_opt(j, "profile_every", c.profile_every);
    read_opt(j, "profile_n_per_t", c.profile_n_per_t);
    if (j.contains("profile_space")) c.profile_space = parse_error_space(j.at("profile_space").get<std::string>());
    if (j.contains("dataset")) c.dataset = DatasetSpec::from_json(j.at("dataset"));
    if (j.contains("schedule")) c.schedule = ScheduleConfig::from_json(j.at("schedule"));
    if (j.contains("model")) {
      const auto& mj = j.at("model");
      check_keys(mj, {"time_embed_dim", "hidden"}, "train.model");
      read_opt(mj, "time_embed_dim", c.model.time_embed_dim);
      read_opt(mj, "hidden", c.model.hidden);
    }
    read_opt(j, "record_wall_time", c.record_wall_time);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Metrics

std::string metrics_row(const StepReport& r, bool with_time) {
  std::string s = std::to_string(r.step);
  const auto [tmin, tmax] = std::minmax_element(r.ts.begin(), r.ts.end());
  s += ',' + std::to_string(r.ts.empty() ? 0 : *tmin) + ',' + std::to_string(r.ts.empty() ? 0 : *tmax);
  for (const auto& l : r.head_loss) s += ',' + (l ? format_double(*l) : std::string());
  for (double f : r.selected_frac) s += ',' + format_double(f);
  s += ',' + format_double(r.grad_norm);
  s += ',' + format_double(with_time ? r.ms : 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)),
      schedule_(cfg_.schedule.build()),
      sampler_(cfg_.sampler.build(cfg_.schedule.T, cfg_.base_dir)) {
  cfg_.validate();
  RngStream init = Rng(cfg_.seed).stream("init");
  model_ = DenoiserModel(cfg_.model_config(), init);
  init_common();
}

Trainer::Trainer(TrainConfig cfg, const Checkpoint& ckpt, bool exact)
    : cfg_(std::move(cfg)),
      schedule_(cfg_.schedule.build()),
      sampler_(cfg_.sampler.build(cfg_.schedule.T, cfg_.base_dir)) {
  cfg_.validate();
  const auto& h = ckpt.header;
  if (exact && h.at("config_hash").get<std::string>() != cfg_.hash()) {
    throw ConfigError("checkpoint was written by a different configuration (config hash mismatch)");
  }
  const ModelConfig mc = ModelConfig::from_json(h.at("model"));
  if (mc.to_json() != cfg_.model_config().to_json()) {
    throw ConfigError("checkpoint model layout does not match the configuration");
  }
  if (Schedule::from_json(h.at("schedule")).to_json() != schedule_.to_json()) {
    throw ConfigError("checkpoint schedule does not match the configuration");
  }
  model_ = model_from_checkpoint(ckpt);
  init_common();
  step_ = h.at("step").get<long long>();
  adam_.step = h.at("adam_step").get<long long>();
  if (adam_.step > 0) {
    for (const auto& p : model_.params()) {
      adam_.m.push_back(ckpt.blob("adam.m/" + p.name));
      adam_.v.push_back(ckpt.blob("adam.v/" + p.name));
    }
  }
  sel_counts_ = selection_counts_from_checkpoint(ckpt);
  if (exact) {
    const auto& rng = h.at("rng");
    data_rng_ = stream_from_json(rng.at("data"));
    noise_rng_ = stream_from_json(rng.at("noise"));
    ts_rng_ = stream_from_json(rng.at("timesteps"));
    sampler_.set_state(h.at("sampler"));
  }
}

void Trainer::init_common() {
  data_ = generate(cfg_.dataset);
  const Rng root(cfg_.seed);
  data_rng_ = root.stream("data");
  noise_rng_ = root.stream("noise");
  ts_rng_ = root.stream("timesteps");
  if (cfg_.restrict_range) sampler_ = sampler_.restricted(cfg_.restrict_range->first, cfg_.restrict_range->second);
  sel_counts_.assign(static_cast<std::size_t>(cfg_.schedule.T), {0.0, 0.0, 0.0});
}

StepReport Trainer::step() {
  try {
    return step_impl();
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at step " + std::to_string(step_ + 1) + "; last good checkpoint: " +
                       (last_checkpoint_.empty() ? std::string("none") : last_checkpoint_));
  }
}

StepReport Trainer::step_impl() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t B = cfg_.batch;
  const std::size_t d = cfg_.model_config().data_dim;

  if (sampler_.spec().kind == SamplerKind::LossAdaptive && step_ % sampler_.spec().adapt_period == 0) {
    ProfileOptions po;
    po.pred_type = cfg_.mixed ? PredictionType::A : cfg_.pred_type;
    po.space = ErrorSpace::Target;
    po.n_per_t = cfg_.sampler.adapt_n_per_t;
    sampler_.refresh(profile(model_, data_, schedule_, po, Rng(cfg_.seed).stream("adaptive", static_cast<std::uint64_t>(step_))));
  }

  StepReport rep;
  rep.ts = sampler_.sample(B, ts_rng_);
  Tensor x0 = Tensor::matrix(B, d);
  for (std::size_t i = 0; i < B; ++i) {
    const auto idx = data_rng_.below(data_.rows());
    for (std::size_t j = 0; j < d; ++j) x0.at(i, j) = data_.at(idx, j);
  }
  const Tensor eps = noise_rng_.gauss({B, d});
  const Tensor xt = schedule_.forward_sample(x0, rep.ts, eps);

  Tape tape;
  ForwardResult fwd = model_.forward(tape, xt, rep.ts);
  PerHead<Tensor> targets;
  std::array<std::vector<double>, 3> raw_sse;  // per head, per sample
  for (PredictionType p : kAllPredictionTypes) {
    if (!fwd.heads[code(p)]) continue;
    targets[code(p)] = make_target(p, schedule_, rep.ts, x0, eps);
    const Tensor& y = fwd.heads[code(p)]->value();
    auto& r = raw_sse[code(p)];
    r.assign(B, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double e = y.at(i, j) - targets[code(p)]->at(i, j);
        r[i] += e * e;
      }
      total += r[i];
    }
    rep.head_loss[code(p)] = total / static_cast<double>(B * d);
  }

  Var objective;
  rep.selected.assign(B, cfg_.pred_type);
  if (!cfg_.mixed) {
    const auto p = cfg_.pred_type;
    objective = mse(*fwd.heads[code(p)], tape.constant(*targets[code(p)]));
    rep.sample_selection_loss = raw_sse[code(p)];
    rep.selected_frac[code(p)] = 1.0;
  } else {
    // Selection-space errors per sample and head.
    rep.sample_head_loss.assign(B, {0.0, 0.0, 0.0});
    for (PredictionType p : kAllPredictionTypes) {
      if (cfg_.mixed_options.selection_space == ErrorSpace::Target) {
        for (std::size_t i = 0; i < B; ++i) rep.sample_head_loss[i][code(p)] = raw_sse[code(p)][i];
      } else {
        const Tensor est = recover_x0(p, schedule_, rep.ts, xt, fwd.heads[code(p)]->value(), &rep.amplified);
        for (std::size_t i = 0; i < B; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double e = est.at(i, j) - x0.at(i, j);
            s += e * e;
          }
          rep.sample_head_loss[i][code(p)] = s;
        }
      }
    }
    if (cfg_.mixed_options.granularity == MixedGranularity::PerSample) {
      for (std::size_t i = 0; i < B; ++i) rep.selected[i] = mixed_select(rep.sample_head_loss[i]);
    } else {
      std::array<double, 3> mean{0.0, 0.0, 0.0};
      for (const auto& row : rep.sample_head_loss) {
        for (std::size_t h = 0; h < 3; ++h) mean[h] += row[h] / static_cast<double>(B);
      }
      rep.selected.assign(B, mixed_select(mean));
    }
    rep.sample_selection_loss.resize(B);
    for (std::size_t i = 0; i < B; ++i) {
      rep.sample_selection_loss[i] = rep.sample_head_loss[i][code(rep.selected[i])];
      rep.selected_frac[code(rep.selected[i])] += 1.0 / static_cast<double>(B);
      sel_counts_[static_cast<std::size_t>(rep.ts[i] - 1)][code(rep.selected[i])] += 1.0;
    }

    std::vector<Var> terms;
    for (PredictionType p : kAllPredictionTypes) {
      const Var y = *fwd.heads[code(p)];
      const Var target = tape.constant(*targets[code(p)]);
      if (cfg_.mixed_options.objective == MixedObjective::Selected) {
        std::vector<double> w(B, 0.0);
        bool any = false;
        for (std::size_t i = 0; i < B; ++i) {
          if (rep.selected[i] == p) {
            w[i] = 1.0;
            any = true;
          }
        }
        // Heads nobody selected stay off the loss graph entirely.
        if (any) terms.push_back(weighted_row_sse(y, target, w, static_cast<double>(B * d)));
      } else {
        const double l = *rep.head_loss[code(p)];
        if (l > 0.0) terms.push_back(scale(mse(y, target), 1.0 / l));
      }
    }
    if (terms.empty()) {
      objective = scale(sum(*fwd.heads[code(PredictionType::A)]), 0.0);
    } else {
      objective = terms[0];
      for (std::size_t k = 1; k < terms.size(); ++k) objective = add(objective, terms[k]);
    }
  }

  rep.loss = objective.value()[0];
  if (!std::isfinite(rep.loss)) throw NumericError("non-finite loss");
  tape.backward(objective);

  std::vector<Tensor> grads;
  grads.reserve(fwd.params.size());
  double gn = 0.0;
  for (const Var& p : fwd.params) {
    grads.push_back(tape.grad(p));
    for (double g : grads.back().data()) gn += g * g;
  }
  rep.grad_norm = std::sqrt(gn);
  if (!std::isfinite(rep.grad_norm)) throw NumericError("non-finite gradient");

  if (cfg_.record_head_grads) {
    for (PredictionType p : kAllPredictionTypes) {
      if (!fwd.heads[code(p)]) continue;
      rep.head_output_grads[code(p)] = tape.grad(*fwd.heads[code(p)]);
      const auto [wi, bi] = model_.head_param_indices(p);
      rep.head_param_grads[code(p)] = std::array<Tensor, 2>{grads[wi], grads[bi]};
    }
  }

  adam_step(model_.params(), grads, cfg_.lr, adam_);
  ++step_;
  rep.step = step_;
  rep.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  auto& h = c.header;
  h["format"] = "difflab-checkpoint";
  h["config"] = cfg_.to_json();
  h["config_hash"] = cfg_.hash();
  h["model"] = model_.config().to_json();
  h["schedule"] = schedule_.to_json();
  h["dataset"] = cfg_.dataset.to_json();
  h["step"] = step_;
  h["adam_step"] = adam_.step;
  h["rng"] = {{"seed", cfg_.seed},
              {"data", stream_json(data_rng_)},
              {"noise", stream_json(noise_rng_)},
              {"timesteps", stream_json(ts_rng_)}};
  h["sampler"] = sampler_.state();
  for (const auto& p : model_.params()) c.blobs.push_back({"param/" + p.name, p.value});
  if (adam_.step > 0) {
    for (std::size_t i = 0; i < model_.params().size(); ++i) {
      c.blobs.push_back({"adam.m/" + model_.params()[i].name, adam_.m[i]});
      c.blobs.push_back({"adam.v/" + model_.params()[i].name, adam_.v[i]});
    }
  }
  Tensor counts = Tensor::matrix(sel_counts_.size(), 3);
  for (std::size_t t = 0; t < sel_counts_.size(); ++t) {
    for (std::size_t k = 0; k < 3; ++k) counts.at(t, k) = sel_counts_[t][k];
  }
  c.blobs.push_back({"selection_counts", std::move(counts)});
  return c;
}

std::vector<PredictionType> head_table_from_counts(const std::vector<std::array<double, 3>>& counts) {
  std::vector<PredictionType> table;
  table.reserve(counts.size());
  for (const auto& row : counts) {
    PredictionType best = kSelectionPriority[0];
    for (PredictionType p : kSelectionPriority) {
      if (row[code(p)] > row[code(best)]) best = p;
    }
    table.push_back(best);
  }
  return table;
}

std::vector<std::array<double, 3>> selection_counts_from_checkpoint(const Checkpoint& ckpt) {
  const Tensor& c = ckpt.blob("selection_counts");
  std::vector<std::array<double, 3>> out(c.rows());
  for (std::size_t t = 0; t < c.rows(); ++t) out[t] = {c.at(t, 0), c.at(t, 1), c.at(t, 2)};
  return out;
}

DenoiserModel model_from_checkpoint(const Checkpoint& ckpt) {
  const ModelConfig mc = ModelConfig::from_json(ckpt.header.at("model"));
  RngStream unused;
  DenoiserModel m(mc, unused, true);
  std::vector<NamedTensor> params;
  for (const auto& p : m.params()) params.push_back({p.name, ckpt.blob("param/" + p.name)});
  m.set_params(std::move(params));
  return m;
}

Schedule schedule_from_checkpoint(const Checkpoint& ckpt) { return Schedule::from_json(ckpt.header.at("schedule")); }

TrainConfig config_from_checkpoint(const Checkpoint& ckpt) { return TrainConfig::from_json(ckpt.header.at("config")); }

// ---------------------------------------------------------------------------
// Orchestration

TrainArtifacts run_training(Trainer& trainer, const std::filesystem::path& outdir, std::optional<long long> steps) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw IoError("cannot create " + outdir.string() + ": " + ec.message());
  const TrainConfig& cfg = trainer.config();
  const long long n = steps.value_or(cfg.steps);

  TrainArtifacts art;
  art.metrics_csv = outdir / "metrics.csv";
  std::ofstream metrics(art.metrics_csv, std::ios::binary | std::ios::trunc);
  if (!metrics) throw IoError("cannot write " + art.metrics_csv.string());
  metrics << kMetricsHeader << '\n';

  auto snapshot_profile = [&](long long step) {
    ProfileOptions po;
    po.pred_type = cfg.mixed ? PredictionType::A : cfg.pred_type;
    po.space = cfg.profile_space;
    po.n_per_t = cfg.profile_n_per_t;
    LossProfile p = profile(trainer.model(), trainer.data(), trainer.schedule(), po, Rng(cfg.seed).stream("profile"));
    p.dataset_id = cfg.dataset.id();
    const auto path = outdir / ("profile_step" + std::to_string(step) + ".csv");
    p.write_csv(path);
    art.profiles.push_back(path);
  };

  for (long long i = 0; i < n; ++i) {
    const StepReport rep = trainer.step();
    metrics << metrics_row(rep, cfg.record_wall_time) << '\n';
    if (cfg.checkpoint_every > 0 && rep.step % cfg.checkpoint_every == 0) {
      const auto path = outdir / ("checkpoint_step" + std::to_string(rep.step) + ".ckpt");
      write_checkpoint(path, trainer.checkpoint());
      trainer.set_last_checkpoint(path.string());
      art.checkpoints.push_back(path);
    }
    if (cfg.profile_every > 0 && rep.step % cfg.profile_every == 0) snapshot_profile(rep.step);
  }
  metrics.flush();
  if (!metrics) throw IoError("write failed on " + art.metrics_csv.string());

  art.final_checkpoint = outdir / "final.ckpt";
  write_checkpoint(art.final_checkpoint, trainer.checkpoint());

  if (cfg.mixed) {
    art.selection_csv = outdir / "selection_freq.csv";
    std::ofstream sel(*art.selection_csv, std::ios::binary | std::ios::trunc);
    sel << "t,frac_d,frac_v,frac_a,count\n";
    const auto& counts = trainer.selection_counts();
    for (std::size_t t = 0; t < counts.size(); ++t) {
      const double total = counts[t][0] + counts[t][1] + counts[t][2];
      sel << (t + 1);
      for (double c : counts[t]) sel << ',' << format_double(total > 0 ? c / total : 0.0);
      sel << ',' << static_cast<long long>(total) << '\n';
    }
  }
  return art;
}

}  // namespace difflab
