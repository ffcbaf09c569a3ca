#pragma once

#include <span>
#include <vector>

namespace absld {

/// Epsilon clamp applied inside every log in loss and metric paths.
inline constexpr double kLogEps = 1e-12;

/// Temperature-scaled softmax: softmax(z / tau). Entropy of the result is
/// non-decreasing in tau; the argmax never changes with tau.
/// Throws std::invalid_argument for tau <= 0 or empty logits.
std::vector<double> temp_softmax(std::span<const double> logits, double tau);

/// In-place row variant writing into `out` (same length as logits).
void temp_softmax_into(std::span<const double> logits, double tau, std::span<double> out);

/// KL divergence with the project-wide argument convention
/// kl_div(prediction, target) = sum_c target_c * log(target_c / prediction_c).
/// Zero target entries contribute 0 (0*log 0 = 0); zero prediction entries
/// with nonzero target are clamped by kLogEps.
double kl_div(std::span<const double> prediction, std::span<const double> target);

/// Gradient of kl_div(softmax(z / tau), target) with respect to z:
/// (softmax(z/tau) - target) / tau. `probs` must already be softmax(z/tau).
void kl_grad_wrt_logits(std::span<const double> probs, std::span<const double> target, double tau,
                        std::span<double> grad_out);

/// Cross-entropy -log(p_y) with epsilon clamp.
double cross_entropy(std::span<const double> probs, int y);

/// Cross-entropy against a soft target: -sum_c t_c log(p_c).
double soft_cross_entropy(std::span<const double> probs, std::span<const double> target);

/// Label smoothing: entry y gets 1-gamma, every other entry gamma/(C-1).
/// Requires 0 <= gamma < 1, C >= 2, 0 <= y < C.
std::vector<double> smooth_label(int y, double gamma, int num_classes);

/// Shannon entropy in nats; zero entries contribute 0.
double entropy(std::span<const double> probs);

int argmax(std::span<const double> v);

/// Checks probs is a valid probability vector (entries >= 0, sum within
/// 1e-6 of 1). Used by tests and debug assertions.
bool is_prob_vector(std::span<const double> probs, double sum_tol = 1e-6);

}  // namespace absld
