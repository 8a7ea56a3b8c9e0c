#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "s2l/error.hpp"
#include "s2l/seqnet.hpp"

namespace s2l::seqnet {

SeqNetParams SeqNetParams::zeros(const NetShape& shape) {
  if (shape.input_dim <= 0 || shape.pieces <= 0 || shape.features <= 0 || shape.hidden <= 0 ||
      shape.classes < 2)
    throw Error("invalid network shape");
  SeqNetParams p;
  p.shape = shape;
  const int h4 = 4 * shape.hidden;
  for (int j = 0; j < shape.pieces; ++j) {
    p.maxout_w.push_back(Matrix::Zero(shape.features, shape.input_dim));
    p.maxout_b.push_back(Matrix::Zero(shape.features, 1));
  }
  p.fwd_wx = p.bwd_wx = Matrix::Zero(h4, shape.features);
  p.fwd_wh = p.bwd_wh = Matrix::Zero(h4, shape.hidden);
  p.fwd_b = p.bwd_b = Matrix::Zero(h4, 1);
  p.out_w = Matrix::Zero(shape.classes, 2 * shape.hidden);
  p.out_b = Matrix::Zero(shape.classes, 1);
  return p;
}

SeqNetParams SeqNetParams::random(const NetShape& shape, std::uint64_t seed) {
  SeqNetParams p = zeros(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&](Matrix& m, int fan_in) {
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  };
  for (auto& w : p.maxout_w) fill(w, shape.input_dim);
  fill(p.fwd_wx, shape.features);
  fill(p.fwd_wh, shape.hidden);
  fill(p.bwd_wx, shape.features);
  fill(p.bwd_wh, shape.hidden);
  fill(p.out_w, 2 * shape.hidden);
  p.fwd_b.block(shape.hidden, 0, shape.hidden, 1).setOnes();
  p.bwd_b.block(shape.hidden, 0, shape.hidden, 1).setOnes();
  return p;
}

void SeqNetParams::for_each(const std::function<void(Matrix&)>& fn) {
  for (std::size_t j = 0; j < maxout_w.size(); ++j) {
    fn(maxout_w[j]);
    fn(maxout_b[j]);
  }
  for (Matrix* m : {&fwd_wx, &fwd_wh, &fwd_b, &bwd_wx, &bwd_wh, &bwd_b, &out_w, &out_b}) fn(*m);
}

void SeqNetParams::for_each(const std::function<void(const Matrix&)>& fn) const {
  const_cast<SeqNetParams*>(this)->for_each([&](Matrix& m) { fn(m); });
}

void zip_tensors(SeqNetParams& a, const SeqNetParams& b,
                 const std::function<void(Matrix&, const Matrix&)>& fn) {
  std::vector<const Matrix*> rhs;
  b.for_each([&](const Matrix& m) { rhs.push_back(&m); });
  std::size_t i = 0;
  a.for_each([&](Matrix& m) {
    if (i >= rhs.size() || rhs[i]->rows() != m.rows() || rhs[i]->cols() != m.cols())
      throw Error("parameter shape mismatch");
    fn(m, *rhs[i++]);
  });
  if (i != rhs.size()) throw Error("parameter shape mismatch");
}

void SeqNetParams::validate() const {
  const SeqNetParams expected = zeros(shape);
  SeqNetParams copy = *this;
  zip_tensors(copy, expected, [](Matrix&, const Matrix&) {});
  for_each([](const Matrix& m) {
    if (!m.allFinite()) throw Error("non-finite parameter");
  });
}

std::size_t SeqNetParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

MaxoutOutput maxout_forward(const Matrix& strips, const SeqNetParams& params) {
  if (strips.rows() != params.shape.input_dim) throw Error("strip size does not match the network");
  if (params.maxout_w.empty()) throw Error("maxout layer has no pieces");
  MaxoutOutput out;
  out.features = (params.maxout_w[0] * strips).colwise() + params.maxout_b[0].col(0);
  out.winner = Eigen::MatrixXi::Zero(out.features.rows(), out.features.cols());
  for (std::size_t j = 1; j < params.maxout_w.size(); ++j) {
    const Matrix piece = (params.maxout_w[j] * strips).colwise() + params.maxout_b[j].col(0);
    for (Eigen::Index i = 0; i < piece.size(); ++i) {
      if (piece.data()[i] > out.features.data()[i]) {
        out.features.data()[i] = piece.data()[i];
        out.winner.data()[i] = static_cast<int>(j);
      }
    }
  }
  return out;
}

namespace {

Vector sigmoid(const Vector& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

// Cached activations of one LSTM direction, indexed by time step.
struct LstmTrace {
  Matrix i, f, o, g;  // H x T
  Matrix c, h;        // H x T
  Matrix h_prev, c_prev;
};

LstmTrace lstm_run(const Matrix& x, const Matrix& wx, const Matrix& wh, const Matrix& b,
                   bool reverse) {
  const Eigen::Index H = wh.cols();
  const Eigen::Index T = x.cols();
  LstmTrace tr;
  for (Matrix* m : {&tr.i, &tr.f, &tr.o, &tr.g, &tr.c, &tr.h, &tr.h_prev, &tr.c_prev})
    m->resize(H, T);
  const Matrix pre = (wx * x).colwise() + b.col(0);
  Vector h = Vector::Zero(H);
  Vector c = Vector::Zero(H);
  for (Eigen::Index k = 0; k < T; ++k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;
    const Vector z = pre.col(t) + wh * h;
    const Vector ig = sigmoid(z.segment(0, H));
    const Vector fg = sigmoid(z.segment(H, H));
    const Vector og = sigmoid(z.segment(2 * H, H));
    const Vector gg = z.segment(3 * H, H).array().tanh().matrix();
    tr.h_prev.col(t) = h;
    tr.c_prev.col(t) = c;
    c = fg.cwiseProduct(c) + ig.cwiseProduct(gg);
    h = og.cwiseProduct(c.array().tanh().matrix());
    tr.i.col(t) = ig;
    tr.f.col(t) = fg;
    tr.o.col(t) = og;
    tr.g.col(t) = gg;
    tr.c.col(t) = c;
    tr.h.col(t) = h;
  }
  return tr;
}

struct LstmGrad {
  Matrix wx, wh, b, dx;
};

LstmGrad lstm_backward(const LstmTrace& tr, const Matrix& x, const Matrix& wx, const Matrix& wh,
                       const Matrix& dh_out, bool reverse) {
  const Eigen::Index H = wh.cols();
  const Eigen::Index T = x.cols();
  Matrix dz(4 * H, T);
  Vector dh_next = Vector::Zero(H);
  Vector dc_next = Vector::Zero(H);
  for (Eigen::Index k = T - 1; k >= 0; --k) {
    const Eigen::Index t = reverse ? T - 1 - k : k;
    const Vector dh = dh_out.col(t) + dh_next;
    const Vector tc = tr.c.col(t).array().tanh().matrix();
    const Vector dout = dh.cwiseProduct(tc);
    const Vector dc = dh.cwiseProduct(tr.o.col(t)).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;
    const auto i = tr.i.col(t).array();
    const auto f = tr.f.col(t).array();
    const auto o = tr.o.col(t).array();
    const auto g = tr.g.col(t).array();
    dz.block(0, t, H, 1) = (dc.array() * g * i * (1 - i)).matrix();
    dz.block(H, t, H, 1) = (dc.array() * tr.c_prev.col(t).array() * f * (1 - f)).matrix();
    dz.block(2 * H, t, H, 1) = (dout.array() * o * (1 - o)).matrix();
    dz.block(3 * H, t, H, 1) = (dc.array() * i * (1 - g.square())).matrix();
    dc_next = dc.cwiseProduct(tr.f.col(t));
    dh_next = wh.transpose() * dz.col(t);
  }
  LstmGrad grad;
  grad.wx = dz * x.transpose();
  grad.wh = dz * tr.h_prev.transpose();
  grad.b = dz.rowwise().sum();
  grad.dx = wx.transpose() * dz;
  return grad;
}

void check_finite(const SeqNetParams& params) {
  params.for_each([](const Matrix& m) {
    if (!m.allFinite()) throw Error("non-finite parameter");
  });
}

}  // namespace

Matrix bilstm_states(const FeatureSequence& x, const SeqNetParams& params) {
  if (x.rows() != params.shape.features) throw Error("feature size does not match the network");
  if (x.cols() < 1) throw Error("empty feature sequence");
  check_finite(params);
  const Eigen::Index H = params.shape.hidden;
  const auto fwd = lstm_run(x, params.fwd_wx, params.fwd_wh, params.fwd_b, false);
  const auto bwd = lstm_run(x, params.bwd_wx, params.bwd_wh, params.bwd_b, true);
  Matrix states(2 * H, x.cols());
  states.topRows(H) = fwd.h;
  states.bottomRows(H) = bwd.h;
  return states;
}

ProbSequence bilstm_forward(const FeatureSequence& x, const SeqNetParams& params) {
  const Matrix states = bilstm_states(x, params);
  return softmax_columns((params.out_w * states).colwise() + params.out_b.col(0));
}

ProbSequence predict(const Matrix& strips, const SeqNetParams& params) {
  return bilstm_forward(maxout_forward(strips, params).features, params);
}

LossAndGrad loss_and_gradient(const Matrix& strips, const LabelSequence& target,
                              const SeqNetParams& params) {
  const Eigen::Index H = params.shape.hidden;
  const MaxoutOutput mo = maxout_forward(strips, params);
  const Matrix& x = mo.features;
  const auto fwd = lstm_run(x, params.fwd_wx, params.fwd_wh, params.fwd_b, false);
  const auto bwd = lstm_run(x, params.bwd_wx, params.bwd_wh, params.bwd_b, true);
  Matrix states(2 * H, x.cols());
  states.topRows(H) = fwd.h;
  states.bottomRows(H) = bwd.h;
  const ProbSequence p = softmax_columns((params.out_w * states).colwise() + params.out_b.col(0));

  const CtcResult ctc = ctc_loss(p, target);
  LossAndGrad out{ctc.loss, SeqNetParams::zeros(params.shape)};
  if (!std::isfinite(ctc.loss)) return out;
  const Matrix& g = ctc.grad_logits;
  out.grad.out_w = g * states.transpose();
  out.grad.out_b = g.rowwise().sum();
  const Matrix dstates = params.out_w.transpose() * g;

  const auto gf = lstm_backward(fwd, x, params.fwd_wx, params.fwd_wh, dstates.topRows(H), false);
  const auto gb = lstm_backward(bwd, x, params.bwd_wx, params.bwd_wh, dstates.bottomRows(H), true);
  out.grad.fwd_wx = gf.wx;
  out.grad.fwd_wh = gf.wh;
  out.grad.fwd_b = gf.b;
  out.grad.bwd_wx = gb.wx;
  out.grad.bwd_wh = gb.wh;
  out.grad.bwd_b = gb.b;

  const Matrix dx = gf.dx + gb.dx;
  for (std::size_t j = 0; j < params.maxout_w.size(); ++j) {
    const Matrix masked = (mo.winner.array() == static_cast<int>(j)).cast<double>() * dx.array();
    out.grad.maxout_w[j] = masked * strips.transpose();
    out.grad.maxout_b[j] = masked.rowwise().sum();
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw Error("learning_rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw Error("momentum must lie in [0, 1)");
  if (iterations < 0) throw Error("iterations must be non-negative");
}

SgdMomentum::SgdMomentum(TrainConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SgdMomentum::step(SeqNetParams& params, const SeqNetParams& grads) {
  if (!velocity_) velocity_ = SeqNetParams::zeros(params.shape);
  zip_tensors(*velocity_, grads, [&](Matrix& v, const Matrix& g) { v = cfg_.momentum * v + g; });
  zip_tensors(params, *velocity_, [&](Matrix& w, const Matrix& v) { w -= cfg_.learning_rate * v; });
}

TrainReport train(SeqNetParams& params, const std::vector<TrainingExample>& data,
                  const TrainConfig& cfg,
                  const std::function<bool(int iteration, double mean_loss)>& stop) {
  cfg.validate();
  if (data.empty()) throw Error("no training data");
  SgdMomentum opt(cfg);
  TrainReport report;
  for (int it = 1; it <= cfg.iterations; ++it) {
    SeqNetParams total = SeqNetParams::zeros(params.shape);
    double loss = 0;
    for (const auto& ex : data) {
      const LossAndGrad lg = loss_and_gradient(ex.strips, ex.target, params);
      loss += lg.loss;
      zip_tensors(total, lg.grad, [](Matrix& a, const Matrix& b) { a += b; });
    }
    report.iterations = it;
    report.mean_loss = loss / static_cast<double>(data.size());
    report.history.push_back(report.mean_loss);
    if (stop && stop(it, report.mean_loss)) break;
    opt.step(params, total);
  }
  return report;
}

namespace {

constexpr std::uint32_t kParamsMagic = 0x504C3253;  // bytes "S2LP"
constexpr std::uint32_t kParamsVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("parameter file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_params(const std::filesystem::path& path, const SeqNetParams& params) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::vector<const Matrix*> tensors;
  params.for_each([&](const Matrix& m) { tensors.push_back(&m); });
  put_u32(out, kParamsMagic);
  put_u32(out, kParamsVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Matrix* m : tensors) {
    put_u32(out, static_cast<std::uint32_t>(m->rows()));
    put_u32(out, static_cast<std::uint32_t>(m->cols()));
  }
  for (const Matrix* m : tensors)
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c)
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>((*m)(r, c))));
  if (!out) throw Error("write failed: " + path.string());
}

SeqNetParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  if (get_u32(in) != kParamsMagic) throw Error("bad parameter file magic: " + path.string());
  if (get_u32(in) != kParamsVersion) throw Error("unsupported parameter file version");
  const std::uint32_t count = get_u32(in);
  // 2 tensors per maxout piece plus 8 for the recurrent and output layers.
  if (count < 10 || count % 2 != 0) throw Error("unexpected tensor count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(count);
  for (auto& s : shapes) {
    s.first = get_u32(in);
    s.second = get_u32(in);
  }
  NetShape shape;
  shape.pieces = static_cast<int>((count - 8) / 2);
  shape.features = static_cast<int>(shapes[0].first);
  shape.input_dim = static_cast<int>(shapes[0].second);
  shape.hidden = static_cast<int>(shapes[count - 8 + 1].second);
  shape.classes = static_cast<int>(shapes[count - 2].first);
  SeqNetParams params = SeqNetParams::zeros(shape);
  std::size_t i = 0;
  params.for_each([&](Matrix& m) {
    if (shapes[i].first != m.rows() || shapes[i].second != m.cols())
      throw Error("parameter shape table is inconsistent");
    ++i;
  });
  params.for_each([&](Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<float>(get_u32(in));
  });
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes in parameter file");
  params.validate();
  return params;
}

}  // namespace s2l::seqnet
