#include <cmath>
#include <map>

#include "doctest.h"
#include "difflab/errors.hpp"
#include "difflab/tsampler.hpp"

using namespace difflab;

namespace {

double tv_distance(const std::vector<double>& target, const std::vector<int>& draws) {
  std::vector<double> emp(target.size(), 0.0);
  for (int t : draws) emp[static_cast<std::size_t>(t - 1)] += 1.0;
  double tv = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) tv += std::abs(emp[i] / draws.size() - target[i]);
  return 0.5 * tv;
}

// A ten-slot partition of [1, 1000] with steeply widening slots.
SlotPartition table_slots() {
  return SlotPartition{{{1, 4}, {5, 12}, {13, 22}, {23, 36}, {37, 55},
                        {56, 81}, {82, 119}, {120, 176}, {177, 276}, {277, 1000}}};
}

}  // namespace

TEST_SUITE("tsampler") {

TEST_CASE("uniform frequencies, T=10, 1e6 draws") {
  TimestepSampler s(SamplerSpec{SamplerKind::Uniform, 10});
  RngStream rng = Rng(1).stream("timesteps");
  const auto draws = s.sample(1000000, rng);
  std::vector<int> counts(10, 0);
  for (int t : draws) ++counts[t - 1];
  for (int c : counts) CHECK(std::abs(c / 1e6 - 0.1) < 0.001);
}

TEST_CASE("uniform and weighted TV distance below 0.01 at 1e6 draws") {
  // Sampling noise alone gives E[TV] ≈ 0.4·sqrt(T/N): about 0.004 at T=100.
  RngStream rng = Rng(2).stream("timesteps");
  for (int T : {10, 100}) {
    TimestepSampler u(SamplerSpec{SamplerKind::Uniform, T});
    CHECK(tv_distance(u.target_distribution(), u.sample(1000000, rng)) < 0.01);
    SamplerSpec w{SamplerKind::Weighted, T};
    w.weights = late_heavy_weights(T);
    TimestepSampler ws(w);
    CHECK(tv_distance(ws.target_distribution(), ws.sample(1000000, rng)) < 0.01);
  }
  // At T=1000 compare against the sampling-noise expectation instead.
  TimestepSampler u(SamplerSpec{SamplerKind::Uniform, 1000});
  const double tv = tv_distance(u.target_distribution(), u.sample(1000000, rng));
  const double expected = 0.5 * 1000 * std::sqrt(2 / M_PI) * std::sqrt(0.001 * 0.999 / 1e6);
  CHECK(std::abs(tv - expected) < 0.1 * expected);
}

TEST_CASE("one-hot weights always draw the hot timestep") {
  SamplerSpec w{SamplerKind::Weighted, 20};
  w.weights.assign(20, 0.0);
  w.weights[6] = 3.0;
  TimestepSampler s(w);
  RngStream rng = Rng(3).stream("timesteps");
  for (int t : s.sample(5000, rng)) REQUIRE(t == 7);
}

TEST_CASE("slot-stratified with a ten-slot partition and batch 10 hits every range once") {
  SamplerSpec spec{SamplerKind::SlotStratified, 1000};
  spec.partition = table_slots();
  TimestepSampler s(spec);
  RngStream rng = Rng(4).stream("timesteps");
  for (int b = 0; b < 1000; ++b) {
    const auto draws = s.sample(10, rng);
    std::vector<int> per(10, 0);
    for (int t : draws) ++per[spec.partition->slot_of(t)];
    for (int c : per) REQUIRE(c == 1);
  }
}

TEST_CASE("slot-stratified coverage holds for every batch size >= n_slots") {
  SamplerSpec spec{SamplerKind::SlotStratified, 1000};
  spec.partition = table_slots();
  TimestepSampler s(spec);
  RngStream rng = Rng(5).stream("timesteps");
  for (std::size_t batch = 10; batch <= 64; ++batch) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<std::size_t> per(10, 0);
      for (int t : s.sample(batch, rng)) ++per[spec.partition->slot_of(t)];
      for (std::size_t c : per) REQUIRE(c >= batch / 10);
    }
  }
}

TEST_CASE("slot-stratified remainder cycles through slots") {
  SamplerSpec spec{SamplerKind::SlotStratified, 9};
  spec.partition = SlotPartition{{{1, 3}, {4, 6}, {7, 9}}};
  TimestepSampler s(spec);
  RngStream rng = Rng(6).stream("timesteps");
  std::vector<int> extra(3, 0);
  for (int b = 0; b < 30; ++b) {
    std::vector<int> per(3, 0);
    for (int t : s.sample(4, rng)) ++per[(t - 1) / 3];
    for (int k = 0; k < 3; ++k) extra[k] += per[k] - 1;
  }
  CHECK(extra == std::vector<int>{10, 10, 10});
}

TEST_CASE("adaptive weights") {
  SamplerSpec spec{SamplerKind::LossAdaptive, 3};
  spec.adapt_period = 10;
  LossProfile p;
  p.mean = {4, 2, 2};
  p.std_err = {0, 0, 0};
  p.count = {1, 1, 1};
  const SamplerSpec r = refresh_adaptive(spec, p);
  CHECK(r.weights[0] == doctest::Approx(0.5));
  CHECK(r.weights[1] == doctest::Approx(0.25));
  CHECK(r.weights[2] == doctest::Approx(0.25));

  spec.gamma = 0.0;
  const SamplerSpec flat = refresh_adaptive(spec, p);
  for (double w : flat.weights) CHECK(w == doctest::Approx(1.0 / 3));

  spec.gamma = 1.0;
  p.mean = {0, 0, 0};
  const SamplerSpec zero = refresh_adaptive(spec, p);
  for (double w : zero.weights) CHECK(w == doctest::Approx(1.0 / 3));
}

TEST_CASE("restricted sampler matches rejection sampling") {
  SamplerSpec w{SamplerKind::Weighted, 50};
  w.weights = late_heavy_weights(50);
  TimestepSampler s(w);
  const TimestepSampler r = s.restricted(41, 50);
  RngStream rng = Rng(7).stream("timesteps");
  std::vector<int> rejected;
  while (rejected.size() < 200000) {
    for (int t : s.sample(1000, rng)) {
      if (t >= 41) rejected.push_back(t);
    }
  }
  const auto target = r.target_distribution();
  for (int t = 1; t <= 40; ++t) CHECK(target[t - 1] == 0.0);
  CHECK(tv_distance(target, rejected) < 0.01);
  for (int t : TimestepSampler(r).sample(10000, rng)) REQUIRE((t >= 41 && t <= 50));
  CHECK_THROWS_AS(s.restricted(0, 5), ConfigError);
}

TEST_CASE("sampler only consumes the stream it is given") {
  const Rng rng(9);
  RngStream noise_a = rng.stream("noise");
  RngStream noise_b = rng.stream("noise");
  RngStream ts = rng.stream("timesteps");
  TimestepSampler s(SamplerSpec{SamplerKind::Uniform, 1000});
  (void)noise_a.next_u64();
  s.sample(4096, ts);
  (void)noise_b.next_u64();
  CHECK(noise_a.next_u64() == noise_b.next_u64());
}

TEST_CASE("invalid specs are config errors") {
  SamplerSpec w{SamplerKind::Weighted, 3};
  w.weights = {0, 0, 0};
  CHECK_THROWS_AS(TimestepSampler{w}, ConfigError);
  w.weights = {1, 2};
  CHECK_THROWS_AS(TimestepSampler{w}, ConfigError);
  SamplerSpec st{SamplerKind::SlotStratified, 10};
  CHECK_THROWS_AS(TimestepSampler{st}, ConfigError);
  st.partition = SlotPartition{{{1, 4}, {6, 10}}};
  CHECK_THROWS_AS(TimestepSampler{st}, ConfigError);
  TimestepSampler ok(SamplerSpec{SamplerKind::SlotStratified, 10, {}, SlotPartition{{{1, 5}, {6, 10}}}});
  RngStream rng = Rng(0).stream("timesteps");
  // Below n_slots the remainder rule alone applies: slots alternate.
  CHECK(ok.sample(1, rng)[0] <= 5);
  CHECK(ok.sample(1, rng)[0] > 5);
  CHECK(ok.sample(1, rng)[0] <= 5);
}

TEST_CASE("state round trip resumes the exact sequence") {
  SamplerSpec spec{SamplerKind::SlotStratified, 30};
  spec.partition = SlotPartition{{{1, 10}, {11, 20}, {21, 30}}};
  TimestepSampler a(spec);
  RngStream ra = Rng(3).stream("timesteps");
  a.sample(5, ra);
  TimestepSampler b(spec);
  b.set_state(a.state());
  RngStream rb(ra.state());
  CHECK(a.sample(7, ra) == b.sample(7, rb));
}

}  // TEST_SUITE
