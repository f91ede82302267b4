#include "channel.hpp"

#include <algorithm>

namespace rotgas {

ChannelResult channel_minimize_v(const RadialGrid& g, const Field2& V, int n,
                                 double coupling, const ChannelOpts& o,
                                 const Field2* warm, ChannelPrecond* pre) {
  require(n >= 0, 2, "channel index must be nonnegative");
  require(coupling >= 0.0, 2, "coupling must be nonnegative");
  require(o.tol > 0.0, 2, "channel tolerance must be positive");
  require(o.max_iter >= 1, 2, "channel iteration cap must be at least 1");
  ChannelResult res;
  res.n = n;

  if (coupling == 0.0) {
    Field2 f;
    if (warm && warm->size() == (size_t)g.size()) f = *warm;
    EigOut e = channel_ground(g, V, n, nullptr, 1e-8,
                              std::min<int64_t>(o.max_iter, 2000), f, pre);
    // mu identity is trivial at g=0 but keep the reporting uniform
    res.orbital = std::move(f);
    res.quartic = quartic_w(g, res.orbital);
    res.energy = e.value;
    res.mu_tilde = e.value;
    res.residual = e.residual;
    res.iterations = e.iterations;
    res.converged = e.converged &&
                    e.residual <= std::max(o.tol, 1e-8) *
                                      std::max(1.0, std::abs(e.value));
    return res;
  }

  Field2 f;
  if (warm && warm->size() == (size_t)g.size()) {
    f = *warm;
  } else {
    f = channel_initial_guess(g, V, n, coupling);
  }
  FlowOut fo = channel_flow(g, V, n, coupling, nullptr, o.tol, o.max_iter, f,
                            pre);
  res.orbital = std::move(f);
  res.energy = fo.energy;
  res.mu_tilde = fo.mu_tilde;
  res.residual = fo.residual;
  res.quartic = fo.quartic;
  res.iterations = fo.iterations;
  res.converged = fo.converged;
  return res;
}

ChannelResult channel_minimize(const RadialGrid& g, const TrapSpec& trap,
                               int n, double coupling, const ChannelOpts& o,
                               const Field2* warm, ChannelPrecond* pre) {
  trap.validate();
  Field2 V = potential_table(g, trap);
  return channel_minimize_v(g, V, n, coupling, o, warm, pre);
}

ChannelScan channel_scan(const RadialGrid& g, const TrapSpec& trap,
                         double coupling, int n_max, double omega,
                         const ChannelOpts& o) {
  trap.validate();
  require(n_max <= 2048, 2, "channel scan: n_max too large");
  Field2 V = potential_table(g, trap);
  ChannelScan scan;
  const int hard_cap = 600;
  const bool adaptive = n_max < 0;
  const double omega_c = trap.critical_omega();

  int rising = 0;
  double prev = 0.0;
  Field2 warm;  // previous channel's orbital seeds the next one
  for (int n = 0; adaptive ? n <= hard_cap : n <= n_max; ++n) {
    ChannelPrecond pre;
    // Warm starts help for low n; at high n the centrifugal hole moves so
    // far that the fresh Thomas-Fermi guess (which includes it) is better.
    const Field2* w = (n > 0 && n <= 12 && !warm.empty()) ? &warm : nullptr;
    ChannelResult r = channel_minimize_v(g, V, n, coupling, o, w, &pre);
    warm = r.orbital;
    double val = r.energy - n * omega;
    if (n > 0) {
      rising = (val > prev) ? rising + 1 : 0;
    }
    prev = val;
    scan.rows.push_back(std::move(r));
    if (adaptive && rising >= 3) {
      const ChannelResult& last = scan.rows.back();
      bool mu_ok = !std::isfinite(omega_c) ||
                   last.mu_tilde >= 0.9 * last.n * omega_c;
      if (mu_ok) break;
    }
    if (adaptive && n == hard_cap) scan.truncated = true;
  }
  return scan;
}

BestSymmetric best_symmetric(const ChannelScan& s, double omega) {
  require(!s.rows.empty(), 2, "best_symmetric on an empty scan");
  BestSymmetric b;
  b.value = std::numeric_limits<double>::infinity();
  for (const auto& r : s.rows) {
    double v = r.energy - r.n * omega;
    if (v < b.value) {
      b.value = v;
      b.n = r.n;
    }
  }
  int last = s.rows.back().n;
  // Bracketed means the minimum sits strictly inside the scanned range, so
  // the ascent on the right has been observed.  A single-row scan cannot
  // certify anything.
  b.bracketed = (b.n < last);
  return b;
}

}  // namespace rotgas
