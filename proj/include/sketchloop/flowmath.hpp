#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sketchloop {

class MathError : public std::runtime_error {
 public:
  explicit MathError(const std::string& what) : std::runtime_error(what) {}
};

using Vec = std::vector<double>;

// t * z0 + (1 - t) * z1 for t in [0, 1]. z0 is the data endpoint (t = 1),
// z1 the noise endpoint (t = 0). Throws MathError on a dimension mismatch
// or t outside the interval.
Vec interpolate(const Vec& z0, const Vec& z1, double t);

// Constant velocity z0 - z1 of the straight path, equal to d/dt interpolate.
Vec velocity_target(const Vec& z0, const Vec& z1);

// Mean squared error between pred and velocity_target(z0, z1).
double mse_flow_loss(const Vec& pred, const Vec& z0, const Vec& z1);

// d(mse_flow_loss)/d(pred): 2 * (pred - target) / n.
Vec mse_flow_gradient(const Vec& pred, const Vec& z0, const Vec& z1);

// Cross entropy summed over positions where mask is true, each position a
// row of logits and an integer target class. Stable log-sum-exp; an
// all-false mask gives exactly 0. Throws MathError on size mismatches or a
// target out of range.
double masked_ce_loss(const std::vector<Vec>& logits,
                      const std::vector<int>& targets,
                      const std::vector<bool>& mask);

// d(masked_ce_loss)/d(logits): softmax(row) minus the target one-hot on
// masked rows, zero rows elsewhere.
std::vector<Vec> masked_ce_gradient(const std::vector<Vec>& logits,
                                    const std::vector<int>& targets,
                                    const std::vector<bool>& mask);

struct LossBundle {
  double ce = 0;
  double mse = 0;
  double lambda_ce = 1.0;
  double total = 0;  // lambda_ce * ce + mse
};

LossBundle total_loss(double ce, double mse, double lambda_ce = 1.0);

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Self-checks over the functions above: frozen examples, endpoint
// identities, finite-difference gradients, and closed-form cross entropy
// values. Deterministic in the seed.
std::vector<PropertyResult> verify_math_properties(uint64_t seed = 12345);

}  // namespace sketchloop
