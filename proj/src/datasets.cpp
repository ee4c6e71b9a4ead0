#include "difflab/datasets.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "difflab/errors.hpp"
#include "difflab/rng.hpp"

namespace difflab {

std::string_view name(DatasetKind k) noexcept {
  switch (k) {
    case DatasetKind::EightGaussians: return "eight_gaussians";
    case DatasetKind::SwissRoll: return "swiss_roll";
    case DatasetKind::Checkerboard: return "checkerboard";
    case DatasetKind::TwoMoons: return "two_moons";
  }
  return "?";
}

DatasetKind parse_dataset_kind(std::string_view s) {
  for (auto k : {DatasetKind::EightGaussians, DatasetKind::SwissRoll, DatasetKind::Checkerboard,
                 DatasetKind::TwoMoons}) {
    if (s == name(k)) return k;
  }
  throw ConfigError("unknown dataset kind '" + std::string(s) + "'");
}

nlohmann::json DatasetSpec::to_json() const {
  return {{"kind", name(kind)}, {"n", n}, {"noise_std", noise_std}, {"seed", seed}};
}

DatasetSpec DatasetSpec::from_json(const nlohmann::json& j) {
  DatasetSpec s;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") s.kind = parse_dataset_kind(value.get<std::string>());
    else if (key == "n") s.n = value.get<std::size_t>();
    else if (key == "noise_std") s.noise_std = value.get<double>();
    else if (key == "seed") s.seed = value.get<std::uint64_t>();
    else throw ConfigError("dataset: unknown key '" + key + "'");
  }
  return s;
}

std::string DatasetSpec::id() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s-n%zu-s%.17g-seed%llu", std::string(name(kind)).c_str(), n, noise_std,
                static_cast<unsigned long long>(seed));
  return buf;
}

Tensor generate(const DatasetSpec& spec) {
  if (spec.n < 1) throw ConfigError("dataset: n must be >= 1");
  if (!(spec.noise_std >= 0.0)) throw ConfigError("dataset: noise_std must be >= 0");
  RngStream rng = Rng(spec.seed).stream("dataset");
  Tensor x = Tensor::matrix(spec.n, 2);
  const double pi = std::numbers::pi;
  // Analytic center of each construction; subtracting it keeps exact
  // geometry (e.g. the eight unit-circle modes) intact.
  double cx = 0.0, cy = 0.0;

  for (std::size_t i = 0; i < spec.n; ++i) {
    double px = 0.0, py = 0.0;
    switch (spec.kind) {
      case DatasetKind::EightGaussians: {
        static constexpr double h = std::numbers::sqrt2 / 2.0;
        static constexpr double modes[8][2] = {{1, 0}, {h, h}, {0, 1}, {-h, h},
                                               {-1, 0}, {-h, -h}, {0, -1}, {h, -h}};
        const auto m = rng.below(8);
        px = modes[m][0];
        py = modes[m][1];
        break;
      }
      case DatasetKind::SwissRoll: {
        // θ ~ U(1.5π, 4.5π), point θ·(cos θ, sin θ).
        const double th = 1.5 * pi + 3.0 * pi * rng.uniform();
        px = th * std::cos(th);
        py = th * std::sin(th);
        break;
      }
      case DatasetKind::Checkerboard: {
        // Alternating unit cells of a 4×4 board on [-2, 2]².
        const double u = 4.0 * rng.uniform() - 2.0;
        const double v = rng.uniform() - 2.0 + 2.0 * static_cast<double>(rng.below(2));
        px = u;
        py = v + (static_cast<int>(std::floor(u)) % 2 == 0 ? 0.0 : 1.0);
        break;
      }
      case DatasetKind::TwoMoons: {
        const double th = pi * rng.uniform();
        if (rng.below(2) == 0) {
          px = std::cos(th);
          py = std::sin(th);
        } else {
          px = 1.0 - std::cos(th);
          py = 0.5 - std::sin(th);
        }
        break;
      }
    }
    x.at(i, 0) = px;
    x.at(i, 1) = py;
  }

  switch (spec.kind) {
    case DatasetKind::EightGaussians:
    case DatasetKind::Checkerboard:
      break;
    case DatasetKind::SwissRoll: {
      // E[θ cos θ], E[θ sin θ] for θ ~ U(a, b), via ∫θ cos θ = cos θ + θ sin θ.
      const double a = 1.5 * pi, b = 4.5 * pi, w = b - a;
      cx = ((std::cos(b) + b * std::sin(b)) - (std::cos(a) + a * std::sin(a))) / w;
      cy = ((std::sin(b) - b * std::cos(b)) - (std::sin(a) - a * std::cos(a))) / w;
      break;
    }
    case DatasetKind::TwoMoons:
      cx = 0.5;
      cy = 0.25;
      break;
  }

  double max_norm = 0.0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    double& px = x.at(i, 0);
    double& py = x.at(i, 1);
    px += spec.noise_std * rng.normal() - cx;
    py += spec.noise_std * rng.normal() - cy;
    max_norm = std::max(max_norm, std::hypot(px, py));
  }
  if (max_norm > 0.0) {
    for (double& v : x.data()) v /= max_norm;
  }
  return x;
}

}  // namespace difflab
