#include "difflab/tsampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "difflab/csv.hpp"
#include "difflab/errors.hpp"

namespace difflab {

std::string_view name(SamplerKind k) noexcept {
  switch (k) {
    case SamplerKind::Uniform: return "uniform";
    case SamplerKind::Weighted: return "weighted";
    case SamplerKind::LossAdaptive: return "loss_adaptive";
    case SamplerKind::SlotStratified: return "slot_stratified";
  }
  return "?";
}

SamplerKind parse_sampler_kind(std::string_view s) {
  for (auto k : {SamplerKind::Uniform, SamplerKind::Weighted, SamplerKind::LossAdaptive, SamplerKind::SlotStratified}) {
    if (s == name(k)) return k;
  }
  throw ConfigError("unknown sampler kind '" + std::string(s) + "'");
}

void SamplerSpec::validate_and_normalize() {
  if (T < 1) throw ConfigError("sampler: T must be >= 1");
  switch (kind) {
    case SamplerKind::Uniform:
      break;
    case SamplerKind::LossAdaptive:
      if (adapt_period < 1) throw ConfigError("sampler: loss_adaptive needs adapt_period >= 1");
      if (!(gamma >= 0.0)) throw ConfigError("sampler: gamma must be >= 0");
      if (weights.empty()) weights.assign(T, 1.0);
      [[fallthrough]];
    case SamplerKind::Weighted: {
      if (weights.size() != static_cast<std::size_t>(T)) {
        throw ConfigError("sampler: weight table has " + std::to_string(weights.size()) + " entries, expected T=" +
                          std::to_string(T));
      }
      double total = 0.0;
      for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("sampler: weights must be finite and nonnegative");
        total += w;
      }
      if (!(total > 0.0)) throw ConfigError("sampler: zero total weight");
      for (double& w : weights) w /= total;
      break;
    }
    case SamplerKind::SlotStratified:
      if (!partition) throw ConfigError("sampler: slot_stratified needs a partition");
      partition->validate();
      if (partition->T() != T) throw ConfigError("sampler: partition does not cover [1, T]");
      break;
  }
}

SamplerSpec refresh_adaptive(const SamplerSpec& spec, const LossProfile& profile) {
  if (profile.T() != spec.T) throw ContractError("refresh_adaptive: profile does not cover all timesteps");
  SamplerSpec out = spec;
  out.weights.assign(spec.T, 0.0);
  double total = 0.0;
  for (int t = 1; t <= spec.T; ++t) {
    const double m = profile.at(t);
    if (!(m >= 0.0)) throw ContractError("refresh_adaptive: negative or NaN profile mean");
    const double w = spec.gamma == 0.0 ? 1.0 : (m == 0.0 ? 0.0 : std::pow(m, spec.gamma));
    out.weights[t - 1] = w;
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::cerr << "[difflab] warning: adaptive sampler refresh on all-zero profile, using uniform weights\n";
    out.weights.assign(spec.T, 1.0);
    total = spec.T;
  }
  for (double& w : out.weights) w /= total;
  return out;
}

std::vector<double> late_heavy_weights(int T) {
  std::vector<double> w(T);
  for (int t = 1; t <= T; ++t) w[t - 1] = t;
  return w;
}

std::vector<double> read_weight_csv(const std::filesystem::path& p, int T) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot open " + p.string());
  const CsvTable table = read_csv_table(f);
  const auto ct = table.column("t"), cw = table.column("weight");
  std::vector<double> w(T, 0.0);
  std::vector<bool> seen(T, false);
  for (const auto& row : table.rows) {
    const auto t = parse_int(row[ct]);
    if (t < 1 || t > T) throw ConfigError("weight csv: t=" + std::to_string(t) + " outside [1, T]");
    if (seen[t - 1]) throw ConfigError("weight csv: duplicate t=" + std::to_string(t));
    seen[t - 1] = true;
    w[t - 1] = parse_double(row[cw]);
  }
  return w;
}

TimestepSampler::TimestepSampler(SamplerSpec spec) : spec_(std::move(spec)) {
  spec_.validate_and_normalize();
  rebuild();
}

void TimestepSampler::rebuild() {
  const int lo = range_ ? range_->first : 1;
  const int hi = range_ ? range_->second : spec_.T;
  cdf_.clear();
  support_.clear();
  if (spec_.kind == SamplerKind::Weighted || spec_.kind == SamplerKind::LossAdaptive) {
    double acc = 0.0;
    for (int t = lo; t <= hi; ++t) {
      const double w = spec_.weights[t - 1];
      if (w <= 0.0) continue;
      acc += w;
      cdf_.push_back(acc);
      support_.push_back(t);
    }
    if (cdf_.empty()) throw ConfigError("sampler: zero total weight in range");
  }
}

int TimestepSampler::draw_categorical(RngStream& rng) const {
  const double u = rng.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return support_[static_cast<std::size_t>(it - cdf_.begin())];
}

std::vector<int> TimestepSampler::sample(std::size_t batch, RngStream& rng) {
  if (batch < 1) throw ConfigError("sampler: batch must be >= 1");
  std::vector<int> ts;
  ts.reserve(batch);
  switch (spec_.kind) {
    case SamplerKind::Uniform: {
      const int lo = range_ ? range_->first : 1;
      const int hi = range_ ? range_->second : spec_.T;
      for (std::size_t i = 0; i < batch; ++i) ts.push_back(rng.uniform_int(lo, hi));
      break;
    }
    case SamplerKind::Weighted:
    case SamplerKind::LossAdaptive:
      for (std::size_t i = 0; i < batch; ++i) ts.push_back(draw_categorical(rng));
      break;
    case SamplerKind::SlotStratified: {
      const auto& slots = spec_.partition->bounds;
      const std::size_t n = slots.size();
      const std::size_t per = batch / n, extra = batch % n;
      std::vector<std::size_t> draws(n, per);
      for (std::size_t r = 0; r < extra; ++r) ++draws[(cursor_ + r) % n];
      cursor_ = (cursor_ + extra) % n;
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < draws[k]; ++i) ts.push_back(rng.uniform_int(slots[k].lo, slots[k].hi));
      }
      break;
    }
  }
  return ts;
}

TimestepSampler TimestepSampler::restricted(int lo, int hi) const {
  if (lo < 1 || hi > spec_.T || lo > hi) {
    throw ConfigError("restrict_range [" + std::to_string(lo) + ", " + std::to_string(hi) + "] not within [1, " +
                      std::to_string(spec_.T) + "]");
  }
  TimestepSampler out = *this;
  out.range_ = {lo, hi};
  if (spec_.kind == SamplerKind::SlotStratified) {
    SlotPartition clipped;
    for (const auto& s : spec_.partition->bounds) {
      const int a = std::max(s.lo, lo), b = std::min(s.hi, hi);
      if (a <= b) clipped.bounds.push_back({a, b});
    }
    out.spec_.partition = clipped;
    out.cursor_ = 0;
  }
  out.rebuild();
  return out;
}

std::vector<double> TimestepSampler::target_distribution() const {
  std::vector<double> p(spec_.T, 0.0);
  const int lo = range_ ? range_->first : 1;
  const int hi = range_ ? range_->second : spec_.T;
  switch (spec_.kind) {
    case SamplerKind::Uniform:
      for (int t = lo; t <= hi; ++t) p[t - 1] = 1.0 / (hi - lo + 1);
      break;
    case SamplerKind::Weighted:
    case SamplerKind::LossAdaptive: {
      double prev = 0.0;
      for (std::size_t i = 0; i < cdf_.size(); ++i) {
        p[support_[i] - 1] = (cdf_[i] - prev) / cdf_.back();
        prev = cdf_[i];
      }
      break;
    }
    case SamplerKind::SlotStratified: {
      const auto& slots = spec_.partition->bounds;
      for (const auto& s : slots) {
        for (int t = s.lo; t <= s.hi; ++t) p[t - 1] = 1.0 / static_cast<double>(slots.size() * s.width());
      }
      break;
    }
  }
  return p;
}

void TimestepSampler::refresh(const LossProfile& profile) {
  if (spec_.kind != SamplerKind::LossAdaptive) throw ContractError("refresh: sampler is not loss_adaptive");
  spec_ = refresh_adaptive(spec_, profile);
  rebuild();
}

nlohmann::json TimestepSampler::state() const {
  nlohmann::json j = {{"kind", name(spec_.kind)}, {"cursor", cursor_}};
  if (spec_.kind == SamplerKind::LossAdaptive) j["weights"] = spec_.weights;
  return j;
}

void TimestepSampler::set_state(const nlohmann::json& j) {
  if (j.at("kind").get<std::string>() != name(spec_.kind)) throw ConfigError("sampler state: kind mismatch");
  cursor_ = j.at("cursor").get<std::size_t>();
  if (spec_.kind == SamplerKind::LossAdaptive) {
    spec_.weights = j.at("weights").get<std::vector<double>>();
    rebuild();
  }
}

}  // namespace difflab
