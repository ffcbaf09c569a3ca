#include "absld/model.hpp"

#include <cmath>
#include <stdexcept>

#include "absld/rng.hpp"

namespace absld {

namespace {

void he_init(std::span<double> w, int fan_in, Rng& rng) {
  const double sd = std::sqrt(2.0 / fan_in);
  for (double& v : w) v = rng.normal(0.0, sd);
}

void check_params_size(size_t got, size_t want) {
  if (got != want) throw std::invalid_argument("set_params: wrong parameter count");
}

}  // namespace

// ---------------------------------------------------------------------------
// Mlp
// ---------------------------------------------------------------------------

Mlp::Mlp(ModelSpec spec, uint64_t init_seed) : spec_(std::move(spec)) {
  std::vector<int> widths;
  widths.push_back(spec_.input_size());
  for (int h : spec_.hidden) widths.push_back(h);
  widths.push_back(spec_.num_classes);

  size_t off = 0;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    LayerView v;
    v.in = widths[l];
    v.out = widths[l + 1];
    v.w_off = off;
    off += static_cast<size_t>(v.in) * v.out;
    v.b_off = off;
    off += static_cast<size_t>(v.out);
    layers_.push_back(v);
  }
  params_.assign(off, 0.0);
  Rng rng(init_seed);
  for (const auto& v : layers_)
    he_init({params_.data() + v.w_off, static_cast<size_t>(v.in) * v.out}, v.in, rng);
}

void Mlp::set_params(std::span<const double> p) {
  check_params_size(p.size(), params_.size());
  params_.assign(p.begin(), p.end());
}

void Mlp::run_forward(const Matrix& x, std::vector<Matrix>& pre, std::vector<Matrix>& act) const {
  pre.resize(layers_.size());
  act.resize(layers_.size());
  const Matrix* cur = &x;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const auto& v = layers_[l];
    Matrix w;
    w.rows = v.out;
    w.cols = v.in;
    w.data.assign(params_.begin() + v.w_off, params_.begin() + v.w_off + static_cast<size_t>(v.in) * v.out);
    kernels::dense_forward(*cur, w, {params_.data() + v.b_off, static_cast<size_t>(v.out)}, pre[l]);
    if (l + 1 < layers_.size()) {
      kernels::relu_forward(pre[l], act[l]);
      cur = &act[l];
    }
  }
}

Matrix Mlp::forward(const Matrix& x) const {
  if (x.cols != spec_.input_size()) throw std::invalid_argument("Mlp::forward: input width mismatch");
  std::vector<Matrix> pre, act;
  run_forward(x, pre, act);
  return pre.back();
}

void Mlp::backward(const Matrix& x, const Matrix& dlogits, Matrix* dx,
                   std::vector<double>* dparams) const {
  std::vector<Matrix> pre, act;
  run_forward(x, pre, act);
  if (dparams) dparams->assign(params_.size(), 0.0);

  Matrix grad = dlogits;
  for (size_t li = layers_.size(); li-- > 0;) {
    const auto& v = layers_[li];
    Matrix w;
    w.rows = v.out;
    w.cols = v.in;
    w.data.assign(params_.begin() + v.w_off, params_.begin() + v.w_off + static_cast<size_t>(v.in) * v.out);

    if (dparams) {
      const Matrix& input = (li == 0) ? x : act[li - 1];
      Matrix dw;
      std::vector<double> db(static_cast<size_t>(v.out));
      kernels::dense_backward_params(input, grad, dw, db);
      std::copy(dw.data.begin(), dw.data.end(), dparams->begin() + v.w_off);
      std::copy(db.begin(), db.end(), dparams->begin() + v.b_off);
    }
    if (li == 0 && !dx) break;

    Matrix dinput;
    kernels::dense_backward_input(grad, w, dinput);
    if (li == 0) {
      *dx = std::move(dinput);
    } else {
      kernels::relu_backward(pre[li - 1], dinput, grad);
    }
  }
}

// ---------------------------------------------------------------------------
// SmallCnn
// ---------------------------------------------------------------------------

struct SmallCnn::Trace {
  Matrix c1_pre, c1_act, p1, c2_pre, c2_act, p2, logits;
};

SmallCnn::SmallCnn(ModelSpec spec, uint64_t init_seed) : spec_(std::move(spec)) {
  if (spec_.hidden.size() != 2) throw std::invalid_argument("SmallCnn: hidden must hold two channel counts");
  if (spec_.input_h % 4 != 0 || spec_.input_w % 4 != 0)
    throw std::invalid_argument("SmallCnn: input sides must be divisible by 4");
  const int f1 = spec_.hidden[0], f2 = spec_.hidden[1];
  conv1_ = {spec_.input_c, spec_.input_h, spec_.input_w, f1, 3, 1};
  conv2_ = {f1, spec_.input_h / 2, spec_.input_w / 2, f2, 3, 1};
  head_in_ = f2 * (spec_.input_h / 4) * (spec_.input_w / 4);

  size_t off = 0;
  w1_off_ = off;
  off += static_cast<size_t>(conv1_.weight_count());
  b1_off_ = off;
  off += static_cast<size_t>(f1);
  w2_off_ = off;
  off += static_cast<size_t>(conv2_.weight_count());
  b2_off_ = off;
  off += static_cast<size_t>(f2);
  wh_off_ = off;
  off += static_cast<size_t>(head_in_) * spec_.num_classes;
  bh_off_ = off;
  off += static_cast<size_t>(spec_.num_classes);
  params_.assign(off, 0.0);

  Rng rng(init_seed);
  he_init({params_.data() + w1_off_, static_cast<size_t>(conv1_.weight_count())},
          conv1_.in_c * conv1_.k * conv1_.k, rng);
  he_init({params_.data() + w2_off_, static_cast<size_t>(conv2_.weight_count())},
          conv2_.in_c * conv2_.k * conv2_.k, rng);
  he_init({params_.data() + wh_off_, static_cast<size_t>(head_in_) * spec_.num_classes}, head_in_, rng);
}

void SmallCnn::set_params(std::span<const double> p) {
  check_params_size(p.size(), params_.size());
  params_.assign(p.begin(), p.end());
}

void SmallCnn::run_forward(const Matrix& x, Trace& t) const {
  const int f1 = conv1_.out_c, f2 = conv2_.out_c;
  kernels::conv2d_forward(x, conv1_, {params_.data() + w1_off_, static_cast<size_t>(conv1_.weight_count())},
                          {params_.data() + b1_off_, static_cast<size_t>(f1)}, t.c1_pre);
  kernels::relu_forward(t.c1_pre, t.c1_act);
  kernels::maxpool2_forward(t.c1_act, f1, conv1_.in_h, conv1_.in_w, t.p1);
  kernels::conv2d_forward(t.p1, conv2_, {params_.data() + w2_off_, static_cast<size_t>(conv2_.weight_count())},
                          {params_.data() + b2_off_, static_cast<size_t>(f2)}, t.c2_pre);
  kernels::relu_forward(t.c2_pre, t.c2_act);
  kernels::maxpool2_forward(t.c2_act, f2, conv2_.in_h, conv2_.in_w, t.p2);

  Matrix wh;
  wh.rows = spec_.num_classes;
  wh.cols = head_in_;
  wh.data.assign(params_.begin() + wh_off_,
                 params_.begin() + wh_off_ + static_cast<size_t>(head_in_) * spec_.num_classes);
  kernels::dense_forward(t.p2, wh, {params_.data() + bh_off_, static_cast<size_t>(spec_.num_classes)},
                         t.logits);
}

Matrix SmallCnn::forward(const Matrix& x) const {
  if (x.cols != spec_.input_size()) throw std::invalid_argument("SmallCnn::forward: input width mismatch");
  Trace t;
  run_forward(x, t);
  return t.logits;
}

void SmallCnn::backward(const Matrix& x, const Matrix& dlogits, Matrix* dx,
                        std::vector<double>* dparams) const {
  Trace t;
  run_forward(x, t);
  if (dparams) dparams->assign(params_.size(), 0.0);

  Matrix wh;
  wh.rows = spec_.num_classes;
  wh.cols = head_in_;
  wh.data.assign(params_.begin() + wh_off_,
                 params_.begin() + wh_off_ + static_cast<size_t>(head_in_) * spec_.num_classes);

  if (dparams) {
    Matrix dwh;
    std::vector<double> dbh(static_cast<size_t>(spec_.num_classes));
    kernels::dense_backward_params(t.p2, dlogits, dwh, dbh);
    std::copy(dwh.data.begin(), dwh.data.end(), dparams->begin() + wh_off_);
    std::copy(dbh.begin(), dbh.end(), dparams->begin() + bh_off_);
  }

  Matrix dp2;
  kernels::dense_backward_input(dlogits, wh, dp2);
  Matrix dc2_act;
  kernels::maxpool2_backward(t.c2_act, dp2, conv2_.out_c, conv2_.in_h, conv2_.in_w, dc2_act);
  Matrix dc2_pre;
  kernels::relu_backward(t.c2_pre, dc2_act, dc2_pre);

  if (dparams) {
    kernels::conv2d_backward_params(t.p1, dc2_pre, conv2_,
                                    {dparams->data() + w2_off_, static_cast<size_t>(conv2_.weight_count())},
                                    {dparams->data() + b2_off_, static_cast<size_t>(conv2_.out_c)});
  }

  Matrix dp1;
  kernels::conv2d_backward_input(dc2_pre, conv2_,
                                 {params_.data() + w2_off_, static_cast<size_t>(conv2_.weight_count())}, dp1);
  Matrix dc1_act;
  kernels::maxpool2_backward(t.c1_act, dp1, conv1_.out_c, conv1_.in_h, conv1_.in_w, dc1_act);
  Matrix dc1_pre;
  kernels::relu_backward(t.c1_pre, dc1_act, dc1_pre);

  if (dparams) {
    kernels::conv2d_backward_params(x, dc1_pre, conv1_,
                                    {dparams->data() + w1_off_, static_cast<size_t>(conv1_.weight_count())},
                                    {dparams->data() + b1_off_, static_cast<size_t>(conv1_.out_c)});
  }
  if (dx) {
    kernels::conv2d_backward_input(dc1_pre, conv1_,
                                   {params_.data() + w1_off_, static_cast<size_t>(conv1_.weight_count())}, *dx);
  }
}

// ---------------------------------------------------------------------------
// LinearModel
// ---------------------------------------------------------------------------

LinearModel::LinearModel(ModelSpec spec, uint64_t init_seed) : spec_(std::move(spec)) {
  params_.assign(static_cast<size_t>(spec_.num_classes) * spec_.input_size() + spec_.num_classes, 0.0);
  Rng rng(init_seed);
  he_init({params_.data(), static_cast<size_t>(spec_.num_classes) * spec_.input_size()},
          spec_.input_size(), rng);
}

void LinearModel::set_params(std::span<const double> p) {
  check_params_size(p.size(), params_.size());
  params_.assign(p.begin(), p.end());
}

Matrix LinearModel::forward(const Matrix& x) const {
  Matrix w;
  w.rows = spec_.num_classes;
  w.cols = spec_.input_size();
  w.data.assign(params_.begin(), params_.begin() + static_cast<size_t>(w.rows) * w.cols);
  Matrix y;
  kernels::dense_forward(x, w, {params_.data() + static_cast<size_t>(w.rows) * w.cols,
                                static_cast<size_t>(spec_.num_classes)},
                         y);
  return y;
}

void LinearModel::backward(const Matrix& x, const Matrix& dlogits, Matrix* dx,
                           std::vector<double>* dparams) const {
  Matrix w;
  w.rows = spec_.num_classes;
  w.cols = spec_.input_size();
  w.data.assign(params_.begin(), params_.begin() + static_cast<size_t>(w.rows) * w.cols);
  if (dparams) {
    dparams->assign(params_.size(), 0.0);
    Matrix dw;
    std::vector<double> db(static_cast<size_t>(spec_.num_classes));
    kernels::dense_backward_params(x, dlogits, dw, db);
    std::copy(dw.data.begin(), dw.data.end(), dparams->begin());
    std::copy(db.begin(), db.end(), dparams->begin() + dw.data.size());
  }
  if (dx) kernels::dense_backward_input(dlogits, w, *dx);
}

std::unique_ptr<Classifier> make_model(const ModelSpec& spec, uint64_t init_seed) {
  if (spec.arch == "mlp") return std::make_unique<Mlp>(spec, init_seed);
  if (spec.arch == "small-cnn") return std::make_unique<SmallCnn>(spec, init_seed);
  if (spec.arch == "linear") return std::make_unique<LinearModel>(spec, init_seed);
  throw std::invalid_argument("make_model: unknown architecture '" + spec.arch + "'");
}

}  // namespace absld
