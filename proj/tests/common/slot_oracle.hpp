#pragma once

#include <vector>

#include "difflab/profiler.hpp"

namespace difflab::testing {

// Declarative form of the boundary rule, checked on every boundary tuple.
// Slot k may close at t only when the running sum has reached k·total/n
// (with 1e-12·total slack) or when closing later would leave a later slot
// empty; it must close at the first such t.
inline std::vector<SlotPartition> brute_force_slots(const std::vector<double>& m, int n) {
  const int T = static_cast<int>(m.size());
  std::vector<double> cum(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) cum[t] = cum[t - 1] + m[t - 1];
  const double total = cum[T];
  const double slack = 1e-12 * total;
  const auto may_close = [&](int t, int k) { return cum[t] >= k * total / n - slack || T - t == n - k; };

  std::vector<SlotPartition> valid;
  std::vector<int> b(n - 1);
  // Enumerate every strictly increasing tuple 1 ≤ b_1 < … < b_{n−1} < T.
  const auto rec = [&](auto&& self, int k, int prev) -> void {
    if (k == n) {
      int lo = 0;
      for (int j = 1; j < n; ++j) {
        const int bk = b[j - 1];
        if (!may_close(bk, j)) return;
        for (int t = lo + 1; t < bk; ++t) {
          if (may_close(t, j)) return;
        }
        lo = bk;
      }
      SlotPartition p;
      int start = 1;
      for (int bk : b) {
        p.bounds.push_back({start, bk});
        start = bk + 1;
      }
      p.bounds.push_back({start, T});
      valid.push_back(p);
      return;
    }
    for (int t = prev + 1; t <= T - (n - k); ++t) {
      b[k - 1] = t;
      self(self, k + 1, t);
    }
  };
  rec(rec, 1, 0);
  return valid;
}

}  // namespace difflab::testing
