#include "difflab/loss_profile.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "difflab/csv.hpp"
#include "difflab/errors.hpp"

namespace difflab {

std::string_view name(ErrorSpace s) noexcept { return s == ErrorSpace::Target ? "target" : "x0"; }

ErrorSpace parse_error_space(std::string_view s) {
  if (s == "target" || s == "eps" || s == "raw") return ErrorSpace::Target;
  if (s == "x0") return ErrorSpace::X0;
  throw ConfigError("unknown error space '" + std::string(s) + "' (expected target|x0)");
}

std::size_t LossProfile::min_count() const {
  return count.empty() ? 0 : *std::min_element(count.begin(), count.end());
}

void LossProfile::write_csv(std::ostream& os) const {
  os << "t,mean,stderr,count\n";
  for (std::size_t i = 0; i < mean.size(); ++i) {
    os << (i + 1) << ',' << format_double(mean[i]) << ',' << format_double(std_err[i]) << ',' << count[i] << '\n';
  }
}

void LossProfile::write_csv(const std::filesystem::path& p) const {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  write_csv(f);
}

LossProfile LossProfile::read_csv(std::istream& is) {
  const CsvTable table = read_csv_table(is);
  const auto ct = table.column("t"), cm = table.column("mean");
  const auto cs = table.column("stderr"), cc = table.column("count");
  LossProfile p;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (parse_int(row[ct]) != static_cast<long long>(r + 1)) {
      throw IoError("profile csv: timesteps must run 1..T in order (row " + std::to_string(r + 1) + ")");
    }
    p.mean.push_back(parse_double(row[cm]));
    p.std_err.push_back(parse_double(row[cs]));
    p.count.push_back(static_cast<std::size_t>(parse_int(row[cc])));
    if (p.mean.back() < 0.0) throw IoError("profile csv: negative mean at t=" + std::to_string(r + 1));
  }
  if (p.mean.empty()) throw IoError("profile csv: no rows");
  return p;
}

LossProfile LossProfile::read_csv(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot open " + p.string());
  return read_csv(f);
}

std::size_t SlotPartition::slot_of(int t) const {
  auto it = std::lower_bound(bounds.begin(), bounds.end(), t, [](const Slot& s, int v) { return s.hi < v; });
  if (it == bounds.end() || !it->contains(t)) throw IndexError("timestep " + std::to_string(t) + " not in partition");
  return static_cast<std::size_t>(it - bounds.begin());
}

void SlotPartition::validate() const {
  if (bounds.empty()) throw ConfigError("partition: no slots");
  int expect = 1;
  for (std::size_t k = 0; k < bounds.size(); ++k) {
    if (bounds[k].lo != expect) throw ConfigError("partition: slot " + std::to_string(k + 1) + " is not contiguous");
    if (bounds[k].hi < bounds[k].lo) throw ConfigError("partition: slot " + std::to_string(k + 1) + " is empty");
    expect = bounds[k].hi + 1;
  }
}

nlohmann::json SlotPartition::to_json() const {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& s : bounds) b.push_back({s.lo, s.hi});
  return {{"n_slots", bounds.size()}, {"bounds", b}};
}

SlotPartition SlotPartition::from_json(const nlohmann::json& j) {
  SlotPartition p;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key != "n_slots" && key != "bounds") throw ConfigError("partition: unknown key '" + key + "'");
    }
    for (const auto& b : j.at("bounds")) p.bounds.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
    if (j.at("n_slots").get<std::size_t>() != p.bounds.size()) throw ConfigError("partition: n_slots mismatch");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("partition: ") + e.what());
  }
  p.validate();
  return p;
}

SlotPartition SlotPartition::read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(f));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("partition json: " + std::string(e.what()));
  }
}

void SlotPartition::write_json(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_json().dump(2) << '\n';
}

SlotPartition compute_slots(const std::vector<double>& means, std::size_t n_slots) {
  const int T = static_cast<int>(means.size());
  if (n_slots < 1) throw ConfigError("compute_slots: n_slots must be >= 1");
  if (n_slots > means.size()) throw ConfigError("compute_slots: n_slots exceeds T");
  const auto nonzero = static_cast<std::size_t>(std::count_if(means.begin(), means.end(), [](double m) { return m > 0.0; }));
  if (n_slots > nonzero) {
    throw ConfigError("compute_slots: n_slots (" + std::to_string(n_slots) + ") exceeds number of nonzero-loss timesteps (" +
                      std::to_string(nonzero) + ")");
  }
  double total = 0.0;
  for (double m : means) {
    if (!(m >= 0.0)) throw ContractError("compute_slots: means must be finite and nonnegative");
    total += m;
  }
  const int n = static_cast<int>(n_slots);
  // Absorbs summation rounding so that e.g. ten equal means split evenly.
  const double slack = 1e-12 * total;

  SlotPartition part;
  int lo = 1;
  double cum = 0.0;
  for (int t = 1; t <= T && static_cast<int>(part.bounds.size()) < n - 1; ++t) {
    cum += means[t - 1];
    const int k = static_cast<int>(part.bounds.size()) + 1;
    const double threshold = k * total / n;
    const bool crossed = cum >= threshold - slack;
    const bool out_of_room = T - t == n - k;
    if (crossed || out_of_room) {
      part.bounds.push_back({lo, t});
      lo = t + 1;
    }
  }
  part.bounds.push_back({lo, T});
  part.validate();
  return part;
}

SlotPartition compute_slots(const LossProfile& p, std::size_t n_slots, std::size_t min_samples) {
  if (min_samples > 0 && p.min_count() < min_samples) {
    throw ConfigError("compute_slots: profile has timesteps with fewer than " + std::to_string(min_samples) + " samples");
  }
  return compute_slots(p.mean, n_slots);
}

ProfileDiff diff_profiles(const LossProfile& a, const LossProfile& b, const std::optional<SlotPartition>& partition) {
  if (a.T() != b.T()) throw ContractError("diff_profiles: T mismatch");
  if (a.pred_type != b.pred_type || a.space != b.space) {
    throw ContractError("diff_profiles: profiles measure different quantities");
  }
  ProfileDiff d;
  d.delta.resize(a.mean.size());
  for (std::size_t i = 0; i < a.mean.size(); ++i) d.delta[i] = b.mean[i] - a.mean[i];
  if (partition) {
    if (partition->T() != a.T()) throw ContractError("diff_profiles: partition does not cover [1, T]");
    for (const auto& s : partition->bounds) {
      double acc = 0.0;
      for (int t = s.lo; t <= s.hi; ++t) acc += d.delta[t - 1];
      d.slot_delta.push_back(acc / s.width());
    }
  }
  return d;
}

}  // namespace difflab
