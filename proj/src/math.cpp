#include "absld/math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace absld {

void temp_softmax_into(std::span<const double> logits, double tau, std::span<double> out) {
  if (logits.empty()) throw std::invalid_argument("temp_softmax: empty logits");
  if (!(tau > 0.0)) throw std::invalid_argument("temp_softmax: tau must be positive");
  double m = logits[0];
  for (double z : logits) m = std::max(m, z);
  double sum = 0.0;
  for (size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp((logits[c] - m) / tau);
    sum += out[c];
  }
  for (size_t c = 0; c < logits.size(); ++c) out[c] /= sum;
}

std::vector<double> temp_softmax(std::span<const double> logits, double tau) {
  std::vector<double> out(logits.size());
  temp_softmax_into(logits, tau, out);
  return out;
}

double kl_div(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size()) throw std::invalid_argument("kl_div: size mismatch");
  double kl = 0.0;
  for (size_t c = 0; c < target.size(); ++c) {
    if (target[c] <= 0.0) continue;
    kl += target[c] * (std::log(target[c]) - std::log(std::max(prediction[c], kLogEps)));
  }
  return std::max(kl, 0.0);
}

void kl_grad_wrt_logits(std::span<const double> probs, std::span<const double> target, double tau,
                        std::span<double> grad_out) {
  for (size_t c = 0; c < probs.size(); ++c) grad_out[c] = (probs[c] - target[c]) / tau;
}

double cross_entropy(std::span<const double> probs, int y) {
  if (y < 0 || static_cast<size_t>(y) >= probs.size())
    throw std::invalid_argument("cross_entropy: class index out of range");
  return -std::log(std::max(probs[static_cast<size_t>(y)], kLogEps));
}

double soft_cross_entropy(std::span<const double> probs, std::span<const double> target) {
  if (probs.size() != target.size()) throw std::invalid_argument("soft_cross_entropy: size mismatch");
  double ce = 0.0;
  for (size_t c = 0; c < target.size(); ++c) {
    if (target[c] <= 0.0) continue;
    ce -= target[c] * std::log(std::max(probs[c], kLogEps));
  }
  return ce;
}

std::vector<double> smooth_label(int y, double gamma, int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("smooth_label: need at least 2 classes");
  if (y < 0 || y >= num_classes) throw std::invalid_argument("smooth_label: class index out of range");
  if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("smooth_label: gamma must be in [0,1)");
  std::vector<double> t(static_cast<size_t>(num_classes), gamma / (num_classes - 1));
  t[static_cast<size_t>(y)] = 1.0 - gamma;
  return t;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

int argmax(std::span<const double> v) {
  int best = 0;
  for (size_t c = 1; c < v.size(); ++c)
    if (v[c] > v[static_cast<size_t>(best)]) best = static_cast<int>(c);
  return best;
}

bool is_prob_vector(std::span<const double> probs, double sum_tol) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= sum_tol;
}

}  // namespace absld
