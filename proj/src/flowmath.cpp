#include "sketchloop/flowmath.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sketchloop/rng.hpp"

namespace sketchloop {

namespace {

void check_dims(const Vec& a, const Vec& b, const char* where) {
  if (a.size() != b.size()) {
    std::ostringstream out;
    out << where << ": dimension mismatch (" << a.size() << " vs " << b.size()
        << ")";
    throw MathError(out.str());
  }
}

}  // namespace

Vec interpolate(const Vec& z0, const Vec& z1, double t) {
  check_dims(z0, z1, "interpolate");
  if (!(t >= 0.0 && t <= 1.0)) {
    throw MathError("interpolate: t must lie in [0, 1]");
  }
  Vec out(z0.size());
  for (size_t i = 0; i < z0.size(); ++i) {
    out[i] = t * z0[i] + (1.0 - t) * z1[i];
  }
  return out;
}

Vec velocity_target(const Vec& z0, const Vec& z1) {
  check_dims(z0, z1, "velocity_target");
  Vec out(z0.size());
  for (size_t i = 0; i < z0.size(); ++i) out[i] = z0[i] - z1[i];
  return out;
}

double mse_flow_loss(const Vec& pred, const Vec& z0, const Vec& z1) {
  check_dims(z0, z1, "mse_flow_loss");
  check_dims(pred, z0, "mse_flow_loss");
  if (pred.empty()) throw MathError("mse_flow_loss: empty vectors");
  double acc = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - (z0[i] - z1[i]);
    acc += d * d;
  }
  return acc / double(pred.size());
}

Vec mse_flow_gradient(const Vec& pred, const Vec& z0, const Vec& z1) {
  check_dims(z0, z1, "mse_flow_gradient");
  check_dims(pred, z0, "mse_flow_gradient");
  if (pred.empty()) throw MathError("mse_flow_gradient: empty vectors");
  Vec out(pred.size());
  const double n = double(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    out[i] = 2.0 * (pred[i] - (z0[i] - z1[i])) / n;
  }
  return out;
}

namespace {

// log(sum exp(row)) with the max factored out.
double log_sum_exp(const Vec& row) {
  const double m = *std::max_element(row.begin(), row.end());
  double acc = 0;
  for (double v : row) acc += std::exp(v - m);
  return m + std::log(acc);
}

void check_ce_args(const std::vector<Vec>& logits,
                   const std::vector<int>& targets,
                   const std::vector<bool>& mask, const char* where) {
  if (logits.size() != targets.size() || logits.size() != mask.size()) {
    throw MathError(std::string(where) + ": positions disagree across args");
  }
  for (size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    if (logits[i].empty()) {
      throw MathError(std::string(where) + ": empty logit row");
    }
    if (targets[i] < 0 || size_t(targets[i]) >= logits[i].size()) {
      throw MathError(std::string(where) + ": target class out of range");
    }
  }
}

}  // namespace

double masked_ce_loss(const std::vector<Vec>& logits,
                      const std::vector<int>& targets,
                      const std::vector<bool>& mask) {
  check_ce_args(logits, targets, mask, "masked_ce_loss");
  double acc = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    acc += log_sum_exp(logits[i]) - logits[i][size_t(targets[i])];
  }
  return acc;
}

std::vector<Vec> masked_ce_gradient(const std::vector<Vec>& logits,
                                    const std::vector<int>& targets,
                                    const std::vector<bool>& mask) {
  check_ce_args(logits, targets, mask, "masked_ce_gradient");
  std::vector<Vec> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i].assign(logits[i].size(), 0.0);
    if (!mask[i]) continue;
    const double lse = log_sum_exp(logits[i]);
    for (size_t c = 0; c < logits[i].size(); ++c) {
      out[i][c] = std::exp(logits[i][c] - lse);
    }
    out[i][size_t(targets[i])] -= 1.0;
  }
  return out;
}

LossBundle total_loss(double ce, double mse, double lambda_ce) {
  if (!std::isfinite(ce) || !std::isfinite(mse) || !std::isfinite(lambda_ce)) {
    throw MathError("total_loss: non-finite input");
  }
  LossBundle b;
  b.ce = ce;
  b.mse = mse;
  b.lambda_ce = lambda_ce;
  b.total = lambda_ce * ce + mse;
  return b;
}

namespace {

Vec random_vec(Rng& rng, size_t n) {
  Vec v(n);
  for (auto& x : v) x = rng.next_double() * 6.0 - 3.0;
  return v;
}

struct Checker {
  std::vector<PropertyResult> results;

  void add(const std::string& name, bool pass, const std::string& detail) {
    results.push_back({name, pass, detail});
  }
};

std::string num(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::vector<PropertyResult> verify_math_properties(uint64_t seed) {
  Rng rng(seed);
  Checker ck;

  {
    Vec got = interpolate({1, 0}, {0, 1}, 0.5);
    bool pass = got == Vec{0.5, 0.5};
    ck.add("interpolate-midpoint-example", pass,
           "t=0.5 over unit basis vectors");
  }
  {
    bool pass = true;
    for (int it = 0; it < 50 && pass; ++it) {
      Rng sub = rng.derive(0x1000 + uint64_t(it));
      size_t n = 1 + sub.below(16);
      Vec z0 = random_vec(sub, n);
      Vec z1 = random_vec(sub, n);
      pass = interpolate(z0, z1, 1.0) == z0 && interpolate(z0, z1, 0.0) == z1;
    }
    ck.add("interpolate-endpoints-bitwise", pass,
           "t=1 returns z0 and t=0 returns z1 exactly");
  }
  {
    bool pass = false;
    try {
      interpolate({1}, {1}, 1.5);
    } catch (const MathError&) {
      pass = true;
    }
    try {
      interpolate({1}, {1, 2}, 0.5);
      pass = false;
    } catch (const MathError&) {
    }
    ck.add("interpolate-domain-checks", pass,
           "rejects t outside [0,1] and mismatched dimensions");
  }
  {
    Vec got = velocity_target({1, 0}, {0, 1});
    ck.add("velocity-example", got == Vec{1, -1}, "z0-z1 over unit basis");
  }
  {
    // Central finite difference of the path at interior t against the
    // constant velocity.
    const double h = 1e-5;
    double worst = 0;
    for (int it = 0; it < 50; ++it) {
      Rng sub = rng.derive(0x2000 + uint64_t(it));
      size_t n = 1 + sub.below(16);
      Vec z0 = random_vec(sub, n);
      Vec z1 = random_vec(sub, n);
      double t = 0.1 + sub.next_double() * 0.8;
      Vec hi = interpolate(z0, z1, t + h);
      Vec lo = interpolate(z0, z1, t - h);
      Vec v = velocity_target(z0, z1);
      for (size_t i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs((hi[i] - lo[i]) / (2 * h) - v[i]));
      }
    }
    ck.add("velocity-matches-path-derivative", worst <= 1e-9,
           "max finite-difference error " + num(worst));
  }
  {
    Rng sub = rng.derive(0x3000);
    Vec z0 = random_vec(sub, 8);
    Vec z1 = random_vec(sub, 8);
    Vec v = velocity_target(z0, z1);
    bool zero = mse_flow_loss(v, z0, z1) == 0.0;
    Vec off = v;
    off[3] += 0.25;
    double got = mse_flow_loss(off, z0, z1);
    bool shifted = std::abs(got - 0.25 * 0.25 / 8.0) < 1e-15;
    ck.add("mse-zero-at-target-and-offset", zero && shifted,
           "perfect prediction gives 0; one component off by eps gives "
           "eps^2/n");
  }
  {
    // Gradient against central differences, 100 random instances.
    const double h = 1e-6;
    double worst_rel = 0;
    for (int it = 0; it < 100; ++it) {
      Rng sub = rng.derive(0x4000 + uint64_t(it));
      size_t n = 1 + sub.below(12);
      Vec z0 = random_vec(sub, n);
      Vec z1 = random_vec(sub, n);
      Vec pred = random_vec(sub, n);
      Vec grad = mse_flow_gradient(pred, z0, z1);
      for (size_t i = 0; i < n; ++i) {
        Vec hi = pred, lo = pred;
        hi[i] += h;
        lo[i] -= h;
        double fd =
            (mse_flow_loss(hi, z0, z1) - mse_flow_loss(lo, z0, z1)) / (2 * h);
        double rel = std::abs(fd - grad[i]) /
                     std::max(1e-8, std::abs(fd) + std::abs(grad[i]));
        worst_rel = std::max(worst_rel, rel);
      }
    }
    ck.add("mse-gradient-finite-difference", worst_rel < 1e-5,
           "worst relative error " + num(worst_rel));
  }
  {
    std::vector<Vec> logits = {{0, 0, 0, 0}};
    std::vector<int> targets = {2};
    double got = masked_ce_loss(logits, targets, {true});
    bool uniform = std::abs(got - std::log(4.0)) <= 1e-12;
    logits[0][2] = 60.0;
    double confident = masked_ce_loss(logits, targets, {true});
    bool sure = std::abs(confident) <= 1e-12;
    double none = masked_ce_loss(logits, targets, {false});
    ck.add("masked-ce-closed-forms", uniform && sure && none == 0.0,
           "uniform 4-way = ln 4, confident = 0, empty mask = 0");
  }
  {
    const double h = 1e-6;
    double worst_rel = 0;
    for (int it = 0; it < 50; ++it) {
      Rng sub = rng.derive(0x5000 + uint64_t(it));
      size_t rows = 1 + sub.below(4);
      std::vector<Vec> logits;
      std::vector<int> targets;
      std::vector<bool> mask;
      for (size_t r = 0; r < rows; ++r) {
        size_t classes = 2 + sub.below(5);
        logits.push_back(random_vec(sub, classes));
        targets.push_back(int(sub.below(uint64_t(classes))));
        mask.push_back(sub.below(4) != 0);
      }
      auto grad = masked_ce_gradient(logits, targets, mask);
      for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < logits[r].size(); ++c) {
          auto hi = logits, lo = logits;
          hi[r][c] += h;
          lo[r][c] -= h;
          double fd = (masked_ce_loss(hi, targets, mask) -
                       masked_ce_loss(lo, targets, mask)) /
                      (2 * h);
          double rel = std::abs(fd - grad[r][c]) /
                       std::max(1e-6, std::abs(fd) + std::abs(grad[r][c]));
          worst_rel = std::max(worst_rel, rel);
        }
      }
    }
    ck.add("masked-ce-gradient-finite-difference", worst_rel < 1e-5,
           "worst relative error " + num(worst_rel));
  }
  {
    // Affine structure checked on dyadic values, where the arithmetic is
    // exact in binary floating point.
    bool pass = total_loss(2.0, 3.0, 1.0).total == 5.0 &&
                total_loss(0.5, 0.25, 2.0).total == 1.25 &&
                total_loss(1.5, 0.5, 0.0).total == 0.5;
    double a = total_loss(1.25, 0.75, 4.0).total;
    double b = total_loss(1.25 + 0.5, 0.75, 4.0).total;
    pass = pass && (b - a == 4.0 * 0.5);
    double c = total_loss(1.25, 0.75 + 0.125, 4.0).total;
    pass = pass && (c - a == 0.125);
    ck.add("total-loss-affine", pass,
           "lambda*ce + mse with exact dyadic spot checks");
  }
  {
    bool pass = false;
    try {
      total_loss(std::nan(""), 0.0, 1.0);
    } catch (const MathError&) {
      pass = true;
    }
    ck.add("total-loss-rejects-non-finite", pass, "NaN input throws");
  }
  return ck.results;
}

}  // namespace sketchloop
