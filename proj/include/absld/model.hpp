#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "absld/kernels.hpp"
#include "absld/matrix.hpp"

namespace absld {

/// Architecture description, sufficient to rebuild a model before loading
/// its weights from a checkpoint.
struct ModelSpec {
  std::string arch;             // "mlp" | "small-cnn" | "linear"
  int input_c = 1;              // channels (images) or 1
  int input_h = 1;              // height, or 1 for flat features
  int input_w = 1;              // width, or the feature count for flat inputs
  int num_classes = 2;
  std::vector<int> hidden;      // mlp: hidden layer widths; cnn: conv channel counts

  int input_size() const { return input_c * input_h * input_w; }
};

/// Batched differentiable classifier over flattened inputs. Implementations
/// are stateless across calls (no cached activations), so const methods are
/// safe to call concurrently.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual const ModelSpec& spec() const = 0;
  int num_classes() const { return spec().num_classes; }
  int input_size() const { return spec().input_size(); }

  /// Logits, one row per sample.
  virtual Matrix forward(const Matrix& x) const = 0;

  /// Backpropagates dL/dlogits. Either output may be null. `dparams` is
  /// resized to num_params and holds the batch-summed parameter gradient.
  virtual void backward(const Matrix& x, const Matrix& dlogits, Matrix* dx,
                        std::vector<double>* dparams) const = 0;

  virtual std::span<const double> params() const = 0;
  virtual void set_params(std::span<const double> p) = 0;
  int num_params() const { return static_cast<int>(params().size()); }

  virtual std::unique_ptr<Classifier> clone() const = 0;
};

/// Fully connected ReLU network: input -> hidden... -> classes.
class Mlp final : public Classifier {
 public:
  Mlp(ModelSpec spec, uint64_t init_seed);

  const ModelSpec& spec() const override { return spec_; }
  Matrix forward(const Matrix& x) const override;
  void backward(const Matrix& x, const Matrix& dlogits, Matrix* dx,
                std::vector<double>* dparams) const override;
  std::span<const double> params() const override { return params_; }
  void set_params(std::span<const double> p) override;
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<Mlp>(*this); }

 private:
  struct LayerView {
    int in, out;
    size_t w_off, b_off;
  };
  void run_forward(const Matrix& x, std::vector<Matrix>& pre, std::vector<Matrix>& act) const;

  ModelSpec spec_;
  std::vector<LayerView> layers_;
  std::vector<double> params_;
};

/// Two conv blocks (3x3, pad 1, ReLU, 2x2 maxpool) followed by a dense
/// classifier head. `hidden` holds the two conv channel counts.
class SmallCnn final : public Classifier {
 public:
  SmallCnn(ModelSpec spec, uint64_t init_seed);

  const ModelSpec& spec() const override { return spec_; }
  Matrix forward(const Matrix& x) const override;
  void backward(const Matrix& x, const Matrix& dlogits, Matrix* dx,
                std::vector<double>* dparams) const override;
  std::span<const double> params() const override { return params_; }
  void set_params(std::span<const double> p) override;
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<SmallCnn>(*this); }

 private:
  struct Trace;
  void run_forward(const Matrix& x, Trace& t) const;

  ModelSpec spec_;
  kernels::ConvShape conv1_, conv2_;
  int head_in_ = 0;
  size_t w1_off_ = 0, b1_off_ = 0, w2_off_ = 0, b2_off_ = 0, wh_off_ = 0, bh_off_ = 0;
  std::vector<double> params_;
};

/// Affine model logits = W x + b. Used as the closed-form oracle model in
/// tests and for linear probes.
class LinearModel final : public Classifier {
 public:
  LinearModel(ModelSpec spec, uint64_t init_seed);

  const ModelSpec& spec() const override { return spec_; }
  Matrix forward(const Matrix& x) const override;
  void backward(const Matrix& x, const Matrix& dlogits, Matrix* dx,
                std::vector<double>* dparams) const override;
  std::span<const double> params() const override { return params_; }
  void set_params(std::span<const double> p) override;
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<LinearModel>(*this); }

 private:
  ModelSpec spec_;
  std::vector<double> params_;  // W row-major [C x D], then b[C]
};

/// Builds a model from its spec with seeded He-normal initialization.
std::unique_ptr<Classifier> make_model(const ModelSpec& spec, uint64_t init_seed);

}  // namespace absld
