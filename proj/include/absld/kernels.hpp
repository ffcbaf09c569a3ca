#pragma once

#include <span>

#include "absld/matrix.hpp"

namespace absld::kernels {

/// Compute backend selecting between the serial reference kernels and the
/// OpenMP ones. Both are written so that every output element accumulates
/// its terms in the same order (parallelism only across independent
/// outputs), so results are bit-identical and parity tests compare with
/// operator==; trained runs do not depend on the backend or thread count.
enum class Backend { Serial, OpenMP };

void set_backend(Backend b);
Backend backend();

/// 0 keeps the OpenMP runtime default.
void set_threads(int n);

/// 2D convolution geometry: stride 1, square kernel, zero padding.
/// Sample rows are flattened [channel][height][width].
struct ConvShape {
  int in_c, in_h, in_w;
  int out_c;
  int k;
  int pad;
  int out_h() const { return in_h + 2 * pad - k + 1; }
  int out_w() const { return in_w + 2 * pad - k + 1; }
  int weight_count() const { return out_c * in_c * k * k; }
};

// Dispatching entry points used by the models.
// y[N x O] = x[N x I] * W^T + b with W[O x I]; dx = dy * W; dW = dy^T * x.
void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);
void dense_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db);
void relu_forward(const Matrix& in, Matrix& out);
void relu_backward(const Matrix& pre, const Matrix& dy, Matrix& dx);
void softmax_rows(const Matrix& logits, std::span<const double> taus, Matrix& probs);
void softmax_rows(const Matrix& logits, double tau, Matrix& probs);
void conv2d_forward(const Matrix& x, const ConvShape& s, std::span<const double> w,
                    std::span<const double> b, Matrix& y);
void conv2d_backward_input(const Matrix& dy, const ConvShape& s, std::span<const double> w, Matrix& dx);
void conv2d_backward_params(const Matrix& x, const Matrix& dy, const ConvShape& s, std::span<double> dw,
                            std::span<double> db);
/// 2x2 max pooling, stride 2; ties resolve to the first element in scan order.
void maxpool2_forward(const Matrix& x, int c, int h, int w, Matrix& y);
void maxpool2_backward(const Matrix& x, const Matrix& dy, int c, int h, int w, Matrix& dx);

/// Serial reference implementations, kept independent of the OpenMP path
/// for parity tests and the kernel benchmark.
namespace ref {
void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);
void dense_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db);
void relu_forward(const Matrix& in, Matrix& out);
void relu_backward(const Matrix& pre, const Matrix& dy, Matrix& dx);
void softmax_rows(const Matrix& logits, std::span<const double> taus, Matrix& probs);
void conv2d_forward(const Matrix& x, const ConvShape& s, std::span<const double> w,
                    std::span<const double> b, Matrix& y);
void conv2d_backward_input(const Matrix& dy, const ConvShape& s, std::span<const double> w, Matrix& dx);
void conv2d_backward_params(const Matrix& x, const Matrix& dy, const ConvShape& s, std::span<double> dw,
                            std::span<double> db);
void maxpool2_forward(const Matrix& x, int c, int h, int w, Matrix& y);
void maxpool2_backward(const Matrix& x, const Matrix& dy, int c, int h, int w, Matrix& dx);
}  // namespace ref

/// OpenMP implementations (run on one thread when built without OpenMP).
namespace par {
void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);
void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx);
void dense_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db);
void relu_forward(const Matrix& in, Matrix& out);
void relu_backward(const Matrix& pre, const Matrix& dy, Matrix& dx);
void softmax_rows(const Matrix& logits, std::span<const double> taus, Matrix& probs);
void conv2d_forward(const Matrix& x, const ConvShape& s, std::span<const double> w,
                    std::span<const double> b, Matrix& y);
void conv2d_backward_input(const Matrix& dy, const ConvShape& s, std::span<const double> w, Matrix& dx);
void conv2d_backward_params(const Matrix& x, const Matrix& dy, const ConvShape& s, std::span<double> dw,
                            std::span<double> db);
void maxpool2_forward(const Matrix& x, int c, int h, int w, Matrix& y);
void maxpool2_backward(const Matrix& x, const Matrix& dy, int c, int h, int w, Matrix& dx);
}  // namespace par

}  // namespace absld::kernels
