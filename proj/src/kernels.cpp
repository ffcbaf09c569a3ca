#include "absld/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "absld/math.hpp"

namespace absld::kernels {

namespace {

std::atomic<Backend> g_backend{Backend::OpenMP};

inline size_t idx3(int a, int b, int c, int nb, int nc) {
  return (static_cast<size_t>(a) * nb + b) * nc + c;
}

void check_conv(const Matrix& x, const ConvShape& s) {
  if (x.cols != s.in_c * s.in_h * s.in_w) throw std::invalid_argument("conv2d: shape mismatch");
  if (s.k < 1 || s.pad < 0 || s.out_h() < 1 || s.out_w() < 1)
    throw std::invalid_argument("conv2d: degenerate geometry");
}

}  // namespace

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// ---------------------------------------------------------------------------
// Serial reference kernels: textbook loops, no scheduling concerns.
// ---------------------------------------------------------------------------

namespace ref {

void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  const int n = x.rows, in = x.cols, out = w.rows;
  y.rows = n;
  y.cols = out;
  y.data.assign(static_cast<size_t>(n) * out, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int o = 0; o < out; ++o) {
      double acc = b.empty() ? 0.0 : b[static_cast<size_t>(o)];
      for (int i = 0; i < in; ++i) acc += x.at(r, i) * w.at(o, i);
      y.at(r, o) = acc;
    }
  }
}

void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  const int n = dy.rows, out = dy.cols, in = w.cols;
  dx.rows = n;
  dx.cols = in;
  dx.data.assign(static_cast<size_t>(n) * in, 0.0);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < in; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out; ++o) acc += dy.at(r, o) * w.at(o, i);
      dx.at(r, i) = acc;
    }
}

void dense_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db) {
  const int n = x.rows, in = x.cols, out = dy.cols;
  dw.rows = out;
  dw.cols = in;
  dw.data.assign(static_cast<size_t>(out) * in, 0.0);
  for (int o = 0; o < out; ++o) {
    double acc_b = 0.0;
    for (int r = 0; r < n; ++r) {
      const double g = dy.at(r, o);
      acc_b += g;
      for (int i = 0; i < in; ++i) dw.at(o, i) += g * x.at(r, i);
    }
    if (!db.empty()) db[static_cast<size_t>(o)] = acc_b;
  }
}

void relu_forward(const Matrix& in, Matrix& out) {
  out.rows = in.rows;
  out.cols = in.cols;
  out.data.resize(in.data.size());
  for (size_t i = 0; i < in.data.size(); ++i) out.data[i] = std::max(in.data[i], 0.0);
}

void relu_backward(const Matrix& pre, const Matrix& dy, Matrix& dx) {
  dx.rows = dy.rows;
  dx.cols = dy.cols;
  dx.data.resize(dy.data.size());
  for (size_t i = 0; i < dy.data.size(); ++i) dx.data[i] = pre.data[i] > 0.0 ? dy.data[i] : 0.0;
}

void softmax_rows(const Matrix& logits, std::span<const double> taus, Matrix& probs) {
  probs.rows = logits.rows;
  probs.cols = logits.cols;
  probs.data.resize(logits.data.size());
  for (int r = 0; r < logits.rows; ++r)
    temp_softmax_into(logits.row(r), taus[static_cast<size_t>(r)], probs.row(r));
}

void conv2d_forward(const Matrix& x, const ConvShape& s, std::span<const double> w,
                    std::span<const double> b, Matrix& y) {
  check_conv(x, s);
  const int n = x.rows, oh = s.out_h(), ow = s.out_w();
  y.rows = n;
  y.cols = s.out_c * oh * ow;
  y.data.assign(static_cast<size_t>(n) * y.cols, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int f = 0; f < s.out_c; ++f)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          double acc = b.empty() ? 0.0 : b[static_cast<size_t>(f)];
          for (int c = 0; c < s.in_c; ++c)
            for (int ki = 0; ki < s.k; ++ki)
              for (int kj = 0; kj < s.k; ++kj) {
                const int ii = oi + ki - s.pad, jj = oj + kj - s.pad;
                if (ii < 0 || ii >= s.in_h || jj < 0 || jj >= s.in_w) continue;
                acc += x.data[static_cast<size_t>(r) * x.cols + idx3(c, ii, jj, s.in_h, s.in_w)] *
                       w[idx3(f * s.in_c + c, ki, kj, s.k, s.k)];
              }
          y.data[static_cast<size_t>(r) * y.cols + idx3(f, oi, oj, oh, ow)] = acc;
        }
  }
}

void conv2d_backward_input(const Matrix& dy, const ConvShape& s, std::span<const double> w, Matrix& dx) {
  const int n = dy.rows, oh = s.out_h(), ow = s.out_w();
  dx.rows = n;
  dx.cols = s.in_c * s.in_h * s.in_w;
  dx.data.assign(static_cast<size_t>(n) * dx.cols, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int f = 0; f < s.out_c; ++f)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          const double g = dy.data[static_cast<size_t>(r) * dy.cols + idx3(f, oi, oj, oh, ow)];
          for (int c = 0; c < s.in_c; ++c)
            for (int ki = 0; ki < s.k; ++ki)
              for (int kj = 0; kj < s.k; ++kj) {
                const int ii = oi + ki - s.pad, jj = oj + kj - s.pad;
                if (ii < 0 || ii >= s.in_h || jj < 0 || jj >= s.in_w) continue;
                dx.data[static_cast<size_t>(r) * dx.cols + idx3(c, ii, jj, s.in_h, s.in_w)] +=
                    g * w[idx3(f * s.in_c + c, ki, kj, s.k, s.k)];
              }
        }
  }
}

void conv2d_backward_params(const Matrix& x, const Matrix& dy, const ConvShape& s, std::span<double> dw,
                            std::span<double> db) {
  const int n = x.rows, oh = s.out_h(), ow = s.out_w();
  std::fill(dw.begin(), dw.end(), 0.0);
  std::fill(db.begin(), db.end(), 0.0);
  for (int f = 0; f < s.out_c; ++f) {
    for (int r = 0; r < n; ++r)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          const double g = dy.data[static_cast<size_t>(r) * dy.cols + idx3(f, oi, oj, oh, ow)];
          db[static_cast<size_t>(f)] += g;
          for (int c = 0; c < s.in_c; ++c)
            for (int ki = 0; ki < s.k; ++ki)
              for (int kj = 0; kj < s.k; ++kj) {
                const int ii = oi + ki - s.pad, jj = oj + kj - s.pad;
                if (ii < 0 || ii >= s.in_h || jj < 0 || jj >= s.in_w) continue;
                dw[idx3(f * s.in_c + c, ki, kj, s.k, s.k)] +=
                    g * x.data[static_cast<size_t>(r) * x.cols + idx3(c, ii, jj, s.in_h, s.in_w)];
              }
        }
  }
}

void maxpool2_forward(const Matrix& x, int c, int h, int w, Matrix& y) {
  const int n = x.rows, oh = h / 2, ow = w / 2;
  y.rows = n;
  y.cols = c * oh * ow;
  y.data.assign(static_cast<size_t>(n) * y.cols, 0.0);
  for (int r = 0; r < n; ++r)
    for (int ch = 0; ch < c; ++ch)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          double best = x.data[static_cast<size_t>(r) * x.cols + idx3(ch, 2 * oi, 2 * oj, h, w)];
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj)
              best = std::max(best, x.data[static_cast<size_t>(r) * x.cols +
                                           idx3(ch, 2 * oi + di, 2 * oj + dj, h, w)]);
          y.data[static_cast<size_t>(r) * y.cols + idx3(ch, oi, oj, oh, ow)] = best;
        }
}

void maxpool2_backward(const Matrix& x, const Matrix& dy, int c, int h, int w, Matrix& dx) {
  const int n = x.rows, oh = h / 2, ow = w / 2;
  dx.rows = n;
  dx.cols = x.cols;
  dx.data.assign(x.data.size(), 0.0);
  for (int r = 0; r < n; ++r)
    for (int ch = 0; ch < c; ++ch)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          int bi = 2 * oi, bj = 2 * oj;
          double best = x.data[static_cast<size_t>(r) * x.cols + idx3(ch, bi, bj, h, w)];
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj) {
              const double v =
                  x.data[static_cast<size_t>(r) * x.cols + idx3(ch, 2 * oi + di, 2 * oj + dj, h, w)];
              if (v > best) {
                best = v;
                bi = 2 * oi + di;
                bj = 2 * oj + dj;
              }
            }
          dx.data[static_cast<size_t>(r) * dx.cols + idx3(ch, bi, bj, h, w)] +=
              dy.data[static_cast<size_t>(r) * dy.cols + idx3(ch, oi, oj, oh, ow)];
        }
}

}  // namespace ref

// ---------------------------------------------------------------------------
// OpenMP kernels. Parallelism is only across independent outputs (samples,
// or output units for parameter gradients); every output element sums its
// terms in the same order as the reference, so results match bit-for-bit.
// ---------------------------------------------------------------------------

namespace par {

void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  const int n = x.rows, in = x.cols, out = w.rows;
  y.rows = n;
  y.cols = out;
  y.data.assign(static_cast<size_t>(n) * out, 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const double* xr = x.data.data() + static_cast<size_t>(r) * in;
    double* yr = y.data.data() + static_cast<size_t>(r) * out;
    for (int o = 0; o < out; ++o) {
      const double* wo = w.data.data() + static_cast<size_t>(o) * in;
      double acc = b.empty() ? 0.0 : b[static_cast<size_t>(o)];
      for (int i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = acc;
    }
  }
}

void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  const int n = dy.rows, out = dy.cols, in = w.cols;
  dx.rows = n;
  dx.cols = in;
  dx.data.assign(static_cast<size_t>(n) * in, 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const double* dyr = dy.data.data() + static_cast<size_t>(r) * out;
    double* dxr = dx.data.data() + static_cast<size_t>(r) * in;
    for (int i = 0; i < in; ++i) {
      double acc = 0.0;
      for (int o = 0; o < out; ++o) acc += dyr[o] * w.data[static_cast<size_t>(o) * in + i];
      dxr[i] = acc;
    }
  }
}

void dense_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db) {
  const int n = x.rows, in = x.cols, out = dy.cols;
  dw.rows = out;
  dw.cols = in;
  dw.data.assign(static_cast<size_t>(out) * in, 0.0);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out; ++o) {
    double* dwo = dw.data.data() + static_cast<size_t>(o) * in;
    double acc_b = 0.0;
    for (int r = 0; r < n; ++r) {
      const double g = dy.data[static_cast<size_t>(r) * out + o];
      acc_b += g;
      const double* xr = x.data.data() + static_cast<size_t>(r) * in;
      for (int i = 0; i < in; ++i) dwo[i] += g * xr[i];
    }
    if (!db.empty()) db[static_cast<size_t>(o)] = acc_b;
  }
}

void relu_forward(const Matrix& in, Matrix& out) {
  out.rows = in.rows;
  out.cols = in.cols;
  out.data.resize(in.data.size());
  const long long total = static_cast<long long>(in.data.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < total; ++i)
    out.data[static_cast<size_t>(i)] = std::max(in.data[static_cast<size_t>(i)], 0.0);
}

void relu_backward(const Matrix& pre, const Matrix& dy, Matrix& dx) {
  dx.rows = dy.rows;
  dx.cols = dy.cols;
  dx.data.resize(dy.data.size());
  const long long total = static_cast<long long>(dy.data.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < total; ++i)
    dx.data[static_cast<size_t>(i)] =
        pre.data[static_cast<size_t>(i)] > 0.0 ? dy.data[static_cast<size_t>(i)] : 0.0;
}

void softmax_rows(const Matrix& logits, std::span<const double> taus, Matrix& probs) {
  probs.rows = logits.rows;
  probs.cols = logits.cols;
  probs.data.resize(logits.data.size());
#pragma omp parallel for schedule(static)
  for (int r = 0; r < logits.rows; ++r)
    temp_softmax_into(logits.row(r), taus[static_cast<size_t>(r)], probs.row(r));
}

void conv2d_forward(const Matrix& x, const ConvShape& s, std::span<const double> w,
                    std::span<const double> b, Matrix& y) {
  check_conv(x, s);
  const int n = x.rows, oh = s.out_h(), ow = s.out_w();
  y.rows = n;
  y.cols = s.out_c * oh * ow;
  y.data.assign(static_cast<size_t>(n) * y.cols, 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const double* xr = x.data.data() + static_cast<size_t>(r) * x.cols;
    double* yr = y.data.data() + static_cast<size_t>(r) * y.cols;
    for (int f = 0; f < s.out_c; ++f)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          double acc = b.empty() ? 0.0 : b[static_cast<size_t>(f)];
          for (int c = 0; c < s.in_c; ++c)
            for (int ki = 0; ki < s.k; ++ki)
              for (int kj = 0; kj < s.k; ++kj) {
                const int ii = oi + ki - s.pad, jj = oj + kj - s.pad;
                if (ii < 0 || ii >= s.in_h || jj < 0 || jj >= s.in_w) continue;
                acc += xr[idx3(c, ii, jj, s.in_h, s.in_w)] * w[idx3(f * s.in_c + c, ki, kj, s.k, s.k)];
              }
          yr[idx3(f, oi, oj, oh, ow)] = acc;
        }
  }
}

void conv2d_backward_input(const Matrix& dy, const ConvShape& s, std::span<const double> w, Matrix& dx) {
  const int n = dy.rows, oh = s.out_h(), ow = s.out_w();
  dx.rows = n;
  dx.cols = s.in_c * s.in_h * s.in_w;
  dx.data.assign(static_cast<size_t>(n) * dx.cols, 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const double* dyr = dy.data.data() + static_cast<size_t>(r) * dy.cols;
    double* dxr = dx.data.data() + static_cast<size_t>(r) * dx.cols;
    for (int f = 0; f < s.out_c; ++f)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          const double g = dyr[idx3(f, oi, oj, oh, ow)];
          for (int c = 0; c < s.in_c; ++c)
            for (int ki = 0; ki < s.k; ++ki)
              for (int kj = 0; kj < s.k; ++kj) {
                const int ii = oi + ki - s.pad, jj = oj + kj - s.pad;
                if (ii < 0 || ii >= s.in_h || jj < 0 || jj >= s.in_w) continue;
                dxr[idx3(c, ii, jj, s.in_h, s.in_w)] += g * w[idx3(f * s.in_c + c, ki, kj, s.k, s.k)];
              }
        }
  }
}

void conv2d_backward_params(const Matrix& x, const Matrix& dy, const ConvShape& s, std::span<double> dw,
                            std::span<double> db) {
  const int n = x.rows, oh = s.out_h(), ow = s.out_w();
  std::fill(dw.begin(), dw.end(), 0.0);
  std::fill(db.begin(), db.end(), 0.0);
#pragma omp parallel for schedule(static)
  for (int f = 0; f < s.out_c; ++f) {
    for (int r = 0; r < n; ++r) {
      const double* xr = x.data.data() + static_cast<size_t>(r) * x.cols;
      const double* dyr = dy.data.data() + static_cast<size_t>(r) * dy.cols;
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          const double g = dyr[idx3(f, oi, oj, oh, ow)];
          db[static_cast<size_t>(f)] += g;
          for (int c = 0; c < s.in_c; ++c)
            for (int ki = 0; ki < s.k; ++ki)
              for (int kj = 0; kj < s.k; ++kj) {
                const int ii = oi + ki - s.pad, jj = oj + kj - s.pad;
                if (ii < 0 || ii >= s.in_h || jj < 0 || jj >= s.in_w) continue;
                dw[idx3(f * s.in_c + c, ki, kj, s.k, s.k)] += g * xr[idx3(c, ii, jj, s.in_h, s.in_w)];
              }
        }
    }
  }
}

void maxpool2_forward(const Matrix& x, int c, int h, int w, Matrix& y) {
  const int n = x.rows, oh = h / 2, ow = w / 2;
  y.rows = n;
  y.cols = c * oh * ow;
  y.data.assign(static_cast<size_t>(n) * y.cols, 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const double* xr = x.data.data() + static_cast<size_t>(r) * x.cols;
    double* yr = y.data.data() + static_cast<size_t>(r) * y.cols;
    for (int ch = 0; ch < c; ++ch)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          double best = xr[idx3(ch, 2 * oi, 2 * oj, h, w)];
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj)
              best = std::max(best, xr[idx3(ch, 2 * oi + di, 2 * oj + dj, h, w)]);
          yr[idx3(ch, oi, oj, oh, ow)] = best;
        }
  }
}

void maxpool2_backward(const Matrix& x, const Matrix& dy, int c, int h, int w, Matrix& dx) {
  const int n = x.rows, oh = h / 2, ow = w / 2;
  dx.rows = n;
  dx.cols = x.cols;
  dx.data.assign(x.data.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < n; ++r) {
    const double* xr = x.data.data() + static_cast<size_t>(r) * x.cols;
    const double* dyr = dy.data.data() + static_cast<size_t>(r) * dy.cols;
    double* dxr = dx.data.data() + static_cast<size_t>(r) * dx.cols;
    for (int ch = 0; ch < c; ++ch)
      for (int oi = 0; oi < oh; ++oi)
        for (int oj = 0; oj < ow; ++oj) {
          int bi = 2 * oi, bj = 2 * oj;
          double best = xr[idx3(ch, bi, bj, h, w)];
          for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj) {
              const double v = xr[idx3(ch, 2 * oi + di, 2 * oj + dj, h, w)];
              if (v > best) {
                best = v;
                bi = 2 * oi + di;
                bj = 2 * oj + dj;
              }
            }
          dxr[idx3(ch, bi, bj, h, w)] += dyr[idx3(ch, oi, oj, oh, ow)];
        }
  }
}

}  // namespace par

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

#define ABSLD_DISPATCH(fn, ...)                  \
  do {                                           \
    if (backend() == Backend::OpenMP)            \
      par::fn(__VA_ARGS__);                      \
    else                                         \
      ref::fn(__VA_ARGS__);                      \
  } while (0)

void dense_forward(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  ABSLD_DISPATCH(dense_forward, x, w, b, y);
}
void dense_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  ABSLD_DISPATCH(dense_backward_input, dy, w, dx);
}
void dense_backward_params(const Matrix& x, const Matrix& dy, Matrix& dw, std::span<double> db) {
  ABSLD_DISPATCH(dense_backward_params, x, dy, dw, db);
}
void relu_forward(const Matrix& in, Matrix& out) { ABSLD_DISPATCH(relu_forward, in, out); }
void relu_backward(const Matrix& pre, const Matrix& dy, Matrix& dx) {
  ABSLD_DISPATCH(relu_backward, pre, dy, dx);
}
void softmax_rows(const Matrix& logits, std::span<const double> taus, Matrix& probs) {
  ABSLD_DISPATCH(softmax_rows, logits, taus, probs);
}
void softmax_rows(const Matrix& logits, double tau, Matrix& probs) {
  std::vector<double> taus(static_cast<size_t>(logits.rows), tau);
  ABSLD_DISPATCH(softmax_rows, logits, taus, probs);
}
void conv2d_forward(const Matrix& x, const ConvShape& s, std::span<const double> w,
                    std::span<const double> b, Matrix& y) {
  ABSLD_DISPATCH(conv2d_forward, x, s, w, b, y);
}
void conv2d_backward_input(const Matrix& dy, const ConvShape& s, std::span<const double> w, Matrix& dx) {
  ABSLD_DISPATCH(conv2d_backward_input, dy, s, w, dx);
}
void conv2d_backward_params(const Matrix& x, const Matrix& dy, const ConvShape& s, std::span<double> dw,
                            std::span<double> db) {
  ABSLD_DISPATCH(conv2d_backward_params, x, dy, s, dw, db);
}
void maxpool2_forward(const Matrix& x, int c, int h, int w, Matrix& y) {
  ABSLD_DISPATCH(maxpool2_forward, x, c, h, w, y);
}
void maxpool2_backward(const Matrix& x, const Matrix& dy, int c, int h, int w, Matrix& dx) {
  ABSLD_DISPATCH(maxpool2_backward, x, dy, c, h, w, dx);
}

#undef ABSLD_DISPATCH

}  // namespace absld::kernels
