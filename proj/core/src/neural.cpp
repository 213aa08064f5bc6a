#include "uvaa/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "uvaa/error.hpp"

namespace uvaa::nn {

namespace {

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) { return 1.0 / (1.0 + (-x).exp()); }

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeMismatch(what);
}

/// Gaussian matrix orthonormalized with Householder QR; columns (or rows when
/// wide) are orthonormal.
Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const bool tall = rows >= cols;
  const Eigen::Index r = tall ? rows : cols;
  const Eigen::Index c = tall ? cols : rows;
  Matrix g(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(r, c);
  // Sign fix so the distribution is uniform over the orthogonal group.
  const Matrix R = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < c; ++j)
    if (R(j, j) < 0.0) q.col(j) *= -1.0;
  return tall ? q : Matrix(q.transpose());
}

void uniform_fill(Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), stable for large |u|
double log_tanh_jacobian(double u) {
  return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u));
}

}  // namespace

// ------------------------------------------------------------ ParameterSet

std::size_t ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  params_.push_back({std::move(name), Matrix::Zero(rows, cols), Matrix::Zero(rows, cols)});
  return params_.size() - 1;
}

std::size_t ParameterSet::count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) s += p.grad.squaredNorm();
  return std::sqrt(s);
}

void ParameterSet::scale_grad(double factor) {
  for (auto& p : params_) p.grad *= factor;
}

bool ParameterSet::grad_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](const Parameter& p) { return p.grad.allFinite(); });
}

bool ParameterSet::value_finite() const {
  return std::all_of(params_.begin(), params_.end(),
                     [](const Parameter& p) { return p.value.allFinite(); });
}

// ------------------------------------------------------------ LSTM

Matrix lstm_forward(const Matrix& w_x, const Matrix& w_h, const Matrix& b, const Matrix& inputs,
                    int batch, RecurrentState& state, LstmCache* cache) {
  const Eigen::Index H = w_h.cols();
  require(w_h.rows() == 4 * H, "lstm: w_h must be 4H x H");
  require(w_x.rows() == 4 * H, "lstm: w_x must have 4H rows");
  require(inputs.rows() == w_x.cols(), "lstm: input size does not match w_x");
  require(b.rows() == 4 * H && b.cols() == 1, "lstm: bias must be 4H x 1");
  require(batch >= 1 && inputs.cols() % batch == 0, "lstm: columns not a multiple of batch");
  const Eigen::Index B = batch;
  const Eigen::Index T = inputs.cols() / B;
  if (state.h.size() == 0) state.h = Matrix::Zero(H, B);
  if (state.c.size() == 0) state.c = Matrix::Zero(H, B);
  require(state.h.rows() == H && state.h.cols() == B && state.c.rows() == H && state.c.cols() == B,
          "lstm: recurrent state shape mismatch");

  Matrix pre = w_x * inputs;
  pre.colwise() += b.col(0);
  Matrix hidden(H, T * B);
  if (cache) {
    cache->batch = batch;
    cache->gates.resize(4 * H, T * B);
    cache->cell.resize(H, T * B);
    cache->h0 = state.h;
    cache->c0 = state.c;
  }
  Matrix h = state.h;
  Matrix c = state.c;
  Matrix z(4 * H, B);
  for (Eigen::Index t = 0; t < T; ++t) {
    z.noalias() = w_h * h;
    z += pre.middleCols(t * B, B);
    const Eigen::ArrayXXd i = sigmoid(z.topRows(H).array());
    const Eigen::ArrayXXd f = sigmoid(z.middleRows(H, H).array());
    const Eigen::ArrayXXd g = z.middleRows(2 * H, H).array().tanh();
    const Eigen::ArrayXXd o = sigmoid(z.bottomRows(H).array());
    c = (f * c.array() + i * g).matrix();
    h = (o * c.array().tanh()).matrix();
    hidden.middleCols(t * B, B) = h;
    if (cache) {
      auto gb = cache->gates.middleCols(t * B, B);
      gb.topRows(H) = i.matrix();
      gb.middleRows(H, H) = f.matrix();
      gb.middleRows(2 * H, H) = g.matrix();
      gb.bottomRows(H) = o.matrix();
      cache->cell.middleCols(t * B, B) = c;
    }
  }
  state.h = h;
  state.c = c;
  if (cache) cache->hidden = hidden;
  return hidden;
}

Matrix lstm_forward(const LstmCellParams& p, const Matrix& inputs, int batch,
                    RecurrentState& state, LstmCache* cache) {
  return lstm_forward(p.w_x, p.w_h, Matrix(p.b), inputs, batch, state, cache);
}

void lstm_backward(const Matrix& w_x, const Matrix& w_h, const Matrix& inputs,
                   const LstmCache& cache, const Matrix& d_hidden, int truncation,
                   LstmGrads& grads, bool want_input_grad) {
  const Eigen::Index H = w_h.cols();
  const Eigen::Index B = cache.batch;
  const Eigen::Index TB = inputs.cols();
  const Eigen::Index T = TB / B;
  require(d_hidden.rows() == H && d_hidden.cols() == TB, "lstm_backward: d_hidden shape");

  Matrix d_pre(4 * H, TB);
  Matrix h_prev_all(H, TB);
  h_prev_all.leftCols(B) = cache.h0;
  if (T > 1) h_prev_all.rightCols((T - 1) * B) = cache.hidden.leftCols((T - 1) * B);

  Eigen::ArrayXXd dh_next = Eigen::ArrayXXd::Zero(H, B);
  Eigen::ArrayXXd dc_next = Eigen::ArrayXXd::Zero(H, B);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto gb = cache.gates.middleCols(t * B, B);
    const Eigen::ArrayXXd i = gb.topRows(H).array();
    const Eigen::ArrayXXd f = gb.middleRows(H, H).array();
    const Eigen::ArrayXXd g = gb.middleRows(2 * H, H).array();
    const Eigen::ArrayXXd o = gb.bottomRows(H).array();
    const Eigen::ArrayXXd tc = cache.cell.middleCols(t * B, B).array().tanh();
    const Eigen::ArrayXXd c_prev =
        t == 0 ? Eigen::ArrayXXd(cache.c0.array())
               : Eigen::ArrayXXd(cache.cell.middleCols((t - 1) * B, B).array());

    const Eigen::ArrayXXd dh = d_hidden.middleCols(t * B, B).array() + dh_next;
    const Eigen::ArrayXXd dc = dc_next + dh * o * (1.0 - tc.square());
    auto db = d_pre.middleCols(t * B, B);
    db.topRows(H) = (dc * g * i * (1.0 - i)).matrix();
    db.middleRows(H, H) = (dc * c_prev * f * (1.0 - f)).matrix();
    db.middleRows(2 * H, H) = (dc * i * (1.0 - g.square())).matrix();
    db.bottomRows(H) = (dh * tc * o * (1.0 - o)).matrix();

    if (truncation > 0 && t % truncation == 0) {
      dh_next.setZero();
      dc_next.setZero();
    } else {
      dh_next = (w_h.transpose() * db).array();
      dc_next = dc * f;
    }
  }
  grads.w_x.noalias() += d_pre * inputs.transpose();
  grads.w_h.noalias() += d_pre * h_prev_all.transpose();
  grads.b += d_pre.rowwise().sum();
  if (want_input_grad) grads.inputs = w_x.transpose() * d_pre;
}

// ------------------------------------------------------------ Trunk

Trunk::Trunk(ParameterSet& params, const NetworkShape& shape, const std::string& prefix, Rng& rng)
    : use_lstm_(shape.use_lstm), lstm_hidden_(shape.lstm_hidden) {
  require(shape.input_size > 0 && shape.lstm_hidden > 0, "Trunk: sizes must be positive");
  const int D = shape.input_size;
  const int H = shape.lstm_hidden;
  if (use_lstm_) {
    lstm_wx_ = params.add(prefix + "lstm.w_x", 4 * H, D);
    lstm_wh_ = params.add(prefix + "lstm.w_h", 4 * H, H);
    lstm_b_ = params.add(prefix + "lstm.b", 4 * H, 1);
    for (int gate = 0; gate < 4; ++gate) {
      params[lstm_wx_].value.middleRows(gate * H, H) = orthogonal(H, D, rng);
      params[lstm_wh_].value.middleRows(gate * H, H) = orthogonal(H, H, rng);
    }
    params[lstm_b_].value.middleRows(H, H).setOnes();  // forget gate
  } else {
    first_.w = params.add(prefix + "in.w", H, D);
    first_.b = params.add(prefix + "in.b", H, 1);
    const double bound = 1.0 / std::sqrt(static_cast<double>(D));
    uniform_fill(params[first_.w].value, bound, rng);
    uniform_fill(params[first_.b].value, bound, rng);
  }
  int in = H;
  for (std::size_t l = 0; l < shape.fc_hidden.size(); ++l) {
    const int out = shape.fc_hidden[l];
    DenseIdx d;
    d.w = params.add(prefix + "fc" + std::to_string(l) + ".w", out, in);
    d.b = params.add(prefix + "fc" + std::to_string(l) + ".b", out, 1);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    uniform_fill(params[d.w].value, bound, rng);
    uniform_fill(params[d.b].value, bound, rng);
    fc_.push_back(d);
    in = out;
  }
  output_size_ = in;
}

Matrix Trunk::forward(const ParameterSet& params, const Matrix& x, int batch,
                      RecurrentState& state, Cache* cache) const {
  Matrix a;
  if (use_lstm_) {
    a = lstm_forward(params[lstm_wx_].value, params[lstm_wh_].value, params[lstm_b_].value, x,
                     batch, state, cache ? &cache->lstm : nullptr);
  } else {
    require(x.rows() == params[first_.w].value.cols(), "Trunk: input size mismatch");
    a = params[first_.w].value * x;
    a.colwise() += params[first_.b].value.col(0);
    a = a.array().tanh().matrix();
  }
  if (cache) {
    cache->batch = batch;
    cache->activations.clear();
    cache->activations.push_back(a);
  }
  for (const auto& d : fc_) {
    Matrix z = params[d.w].value * a;
    z.colwise() += params[d.b].value.col(0);
    a = z.array().tanh().matrix();
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

void Trunk::backward(ParameterSet& params, const Matrix& x, const Cache& cache,
                     const Matrix& d_out, int truncation) const {
  Matrix d = d_out;
  for (std::size_t l = fc_.size(); l-- > 0;) {
    const Matrix& out = cache.activations[l + 1];
    const Matrix& in = cache.activations[l];
    const Matrix dz = (d.array() * (1.0 - out.array().square())).matrix();
    params[fc_[l].w].grad.noalias() += dz * in.transpose();
    params[fc_[l].b].grad += dz.rowwise().sum();
    d = params[fc_[l].w].value.transpose() * dz;
  }
  if (use_lstm_) {
    LstmGrads g{Matrix::Zero(params[lstm_wx_].value.rows(), params[lstm_wx_].value.cols()),
                Matrix::Zero(params[lstm_wh_].value.rows(), params[lstm_wh_].value.cols()),
                Matrix::Zero(params[lstm_b_].value.rows(), 1), Matrix()};
    lstm_backward(params[lstm_wx_].value, params[lstm_wh_].value, x, cache.lstm, d, truncation, g,
                  false);
    params[lstm_wx_].grad += g.w_x;
    params[lstm_wh_].grad += g.w_h;
    params[lstm_b_].grad += g.b;
  } else {
    const Matrix& out = cache.activations.front();
    const Matrix dz = (d.array() * (1.0 - out.array().square())).matrix();
    params[first_.w].grad.noalias() += dz * x.transpose();
    params[first_.b].grad += dz.rowwise().sum();
  }
}

// ------------------------------------------------------------ Policy / Value

PolicyNetwork::PolicyNetwork(const NetworkShape& shape, Rng& rng, double initial_log_std)
    : shape_(shape) {
  require(shape.output_size > 0, "PolicyNetwork: output size must be positive");
  trunk_ = Trunk(params_, shape, "", rng);
  const int F = trunk_.output_size();
  head_w_ = params_.add("mean.w", shape.output_size, F);
  head_b_ = params_.add("mean.b", shape.output_size, 1);
  log_std_ = params_.add("log_std", shape.output_size, 1);
  const double bound = 1.0 / std::sqrt(static_cast<double>(F));
  uniform_fill(params_[head_w_].value, bound, rng);
  uniform_fill(params_[head_b_].value, bound, rng);
  params_[head_w_].value *= 0.01;
  params_[head_b_].value *= 0.01;
  params_[log_std_].value.setConstant(initial_log_std);
}

GaussianParams PolicyNetwork::forward(const Matrix& obs, int batch, Cache* cache) const {
  RecurrentState state = initial_state(batch);
  Matrix features = trunk_.forward(params_, obs, batch, state, cache ? &cache->trunk : nullptr);
  GaussianParams out;
  out.mean = params_[head_w_].value * features;
  out.mean.colwise() += params_[head_b_].value.col(0);
  out.log_std = params_[log_std_].value.col(0).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  if (cache) cache->features = std::move(features);
  return out;
}

GaussianParams PolicyNetwork::step(const Matrix& obs_t, RecurrentState& state) const {
  Matrix features = trunk_.forward(params_, obs_t, static_cast<int>(obs_t.cols()), state, nullptr);
  GaussianParams out;
  out.mean = params_[head_w_].value * features;
  out.mean.colwise() += params_[head_b_].value.col(0);
  out.log_std = params_[log_std_].value.col(0).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  return out;
}

void PolicyNetwork::backward(const Matrix& obs, const Cache& cache, const Matrix& d_mean,
                             const Vector& d_log_std, int truncation) {
  params_[head_w_].grad.noalias() += d_mean * cache.features.transpose();
  params_[head_b_].grad += d_mean.rowwise().sum();
  const Matrix d_features = params_[head_w_].value.transpose() * d_mean;
  const auto& raw = params_[log_std_].value;
  for (Eigen::Index k = 0; k < raw.rows(); ++k)
    if (raw(k, 0) >= kLogStdMin && raw(k, 0) <= kLogStdMax)
      params_[log_std_].grad(k, 0) += d_log_std(k);
  trunk_.backward(params_, obs, cache.trunk, d_features, truncation);
}

RecurrentState PolicyNetwork::initial_state(int batch) const {
  const int H = trunk_.recurrent_size();
  return {Matrix::Zero(H, batch), Matrix::Zero(H, batch)};
}

ValueNetwork::ValueNetwork(const NetworkShape& shape, Rng& rng) : shape_(shape) {
  require(shape.output_size > 0, "ValueNetwork: output size must be positive");
  trunk_ = Trunk(params_, shape, "", rng);
  const int F = trunk_.output_size();
  head_w_ = params_.add("value.w", shape.output_size, F);
  head_b_ = params_.add("value.b", shape.output_size, 1);
  const double bound = 1.0 / std::sqrt(static_cast<double>(F));
  uniform_fill(params_[head_w_].value, bound, rng);
  uniform_fill(params_[head_b_].value, bound, rng);
}

Matrix ValueNetwork::forward(const Matrix& obs, int batch, Cache* cache) const {
  RecurrentState state = initial_state(batch);
  Matrix features = trunk_.forward(params_, obs, batch, state, cache ? &cache->trunk : nullptr);
  Matrix v = params_[head_w_].value * features;
  v.colwise() += params_[head_b_].value.col(0);
  if (cache) cache->features = std::move(features);
  return v;
}

Matrix ValueNetwork::step(const Matrix& obs_t, RecurrentState& state) const {
  Matrix features = trunk_.forward(params_, obs_t, static_cast<int>(obs_t.cols()), state, nullptr);
  Matrix v = params_[head_w_].value * features;
  v.colwise() += params_[head_b_].value.col(0);
  return v;
}

void ValueNetwork::backward(const Matrix& obs, const Cache& cache, const Matrix& d_values,
                            int truncation) {
  params_[head_w_].grad.noalias() += d_values * cache.features.transpose();
  params_[head_b_].grad += d_values.rowwise().sum();
  const Matrix d_features = params_[head_w_].value.transpose() * d_values;
  trunk_.backward(params_, obs, cache.trunk, d_features, truncation);
}

RecurrentState ValueNetwork::initial_state(int batch) const {
  const int H = trunk_.recurrent_size();
  return {Matrix::Zero(H, batch), Matrix::Zero(H, batch)};
}

std::size_t parameter_count(const NetworkShape& s, bool with_log_std) {
  const std::size_t D = static_cast<std::size_t>(s.input_size);
  const std::size_t H = static_cast<std::size_t>(s.lstm_hidden);
  std::size_t n = s.use_lstm ? 4 * H * (D + H + 1) : H * (D + 1);
  std::size_t in = H;
  for (int w : s.fc_hidden) {
    n += static_cast<std::size_t>(w) * (in + 1);
    in = static_cast<std::size_t>(w);
  }
  const std::size_t A = static_cast<std::size_t>(s.output_size);
  n += A * (in + 1);
  if (with_log_std) n += A;
  return n;
}

// ------------------------------------------------------------ distribution

double squashed_log_prob(const Vector& mean, const Vector& log_std, const Vector& u) {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double lp = 0.0;
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double z = (u(k) - mean(k)) * std::exp(-log_std(k));
    lp += -0.5 * z * z - log_std(k) - kHalfLog2Pi - log_tanh_jacobian(u(k));
  }
  return lp;
}

void squashed_log_prob_grad(const Vector& mean, const Vector& log_std, const Vector& u,
                            Vector& d_mean, Vector& d_log_std) {
  d_mean.resize(mean.size());
  d_log_std.resize(mean.size());
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double inv = std::exp(-log_std(k));
    const double z = (u(k) - mean(k)) * inv;
    d_mean(k) = z * inv;
    d_log_std(k) = z * z - 1.0;
  }
}

ActionSample sample_action(const Vector& mean, const Vector& log_std, Rng& rng) {
  ActionSample s;
  s.pre_squash.resize(mean.size());
  for (Eigen::Index k = 0; k < mean.size(); ++k)
    s.pre_squash(k) = mean(k) + std::exp(log_std(k)) * rng.normal();
  s.squashed = s.pre_squash.array().tanh().matrix();
  s.log_prob = squashed_log_prob(mean, log_std, s.pre_squash);
  return s;
}

std::vector<double> scale_action(const Vector& squashed, std::span<const double> low,
                                 std::span<const double> high) {
  require(static_cast<std::size_t>(squashed.size()) == low.size() && low.size() == high.size(),
          "scale_action: bound size mismatch");
  std::vector<double> a(low.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double v = low[k] + 0.5 * (squashed(static_cast<Eigen::Index>(k)) + 1.0) * (high[k] - low[k]);
    a[k] = std::clamp(v, low[k], high[k]);
  }
  return a;
}

// ------------------------------------------------------------ Adam

AdamState::AdamState(const ParameterSet& params, AdamConfig config) : config_(config) {
  for (const auto& p : params.all()) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void adam_update(ParameterSet& params, AdamState& st) {
  if (st.m_.size() != params.size()) throw ShapeMismatch("adam_update: state/parameter mismatch");
  if (!params.grad_finite()) throw NonFiniteGradient("adam_update: non-finite gradient");
  ++st.step_;
  const auto& c = st.config_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    st.m_[i] = c.beta1 * st.m_[i] + (1.0 - c.beta1) * p.grad;
    st.v_[i] = c.beta2 * st.v_[i] + (1.0 - c.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= c.learning_rate * (st.m_[i].array() / bc1) /
                       ((st.v_[i].array() / bc2).sqrt() + c.epsilon);
  }
}

double max_relative_gradient_error(ParameterSet& params, const std::function<double()>& loss,
                                   double h, std::size_t max_per_param, double floor, Rng* rng) {
  double worst = 0.0;
  for (auto& p : params.all()) {
    const auto n = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (max_per_param > 0 && n > max_per_param) {
      if (rng) std::shuffle(idx.begin(), idx.end(), rng->engine());
      idx.resize(max_per_param);
    }
    for (std::size_t k : idx) {
      double& w = p.value.data()[k];
      const double saved = w;
      w = saved + h;
      const double lp = loss();
      w = saved - h;
      const double lm = loss();
      w = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double analytic = p.grad.data()[k];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

// ------------------------------------------------------------ checkpoints

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : b_(bytes) {}
  std::uint64_t u(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string str() {
    const auto n = static_cast<std::size_t>(u(4));
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw CheckpointError("checkpoint: truncated file");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

const Matrix& Checkpoint::array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return m;
  throw CheckpointError("checkpoint: missing array '" + name + "'");
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, m] : arrays) {
    put_str(out, name);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
  }
  for (const auto& entry : arrays) {
    const Matrix& m = entry.second;
    for (Eigen::Index k = 0; k < m.size(); ++k) put_u64(out, std::bit_cast<std::uint64_t>(m.data()[k]));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw CheckpointError("checkpoint: bad magic");
  const auto version = r.u(4);
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  const auto n_meta = r.u(4);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    c.meta[k] = r.str();
  }
  const auto n_arrays = r.u(4);
  for (std::uint64_t i = 0; i < n_arrays; ++i) {
    std::string name = r.str();
    const auto rows = static_cast<Eigen::Index>(r.u(8));
    const auto cols = static_cast<Eigen::Index>(r.u(8));
    c.arrays.emplace_back(std::move(name), Matrix(rows, cols));
  }
  for (auto& entry : c.arrays) {
    Matrix& m = entry.second;
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = std::bit_cast<double>(r.u(8));
  }
  if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes");
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("checkpoint: cannot write " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

void append_parameters(Checkpoint& ckpt, const std::string& prefix, const ParameterSet& params) {
  for (const auto& p : params.all()) ckpt.arrays.emplace_back(prefix + p.name, p.value);
}

void restore_parameters(const Checkpoint& ckpt, const std::string& prefix, ParameterSet& params) {
  for (auto& p : params.all()) {
    const Matrix& m = ckpt.array(prefix + p.name);
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols())
      throw CheckpointError("checkpoint: shape mismatch for '" + prefix + p.name + "'");
    p.value = m;
  }
}

std::string encode_shape(const NetworkShape& s) {
  std::ostringstream o;
  o << "in=" << s.input_size << ";lstm=" << s.lstm_hidden << ";fc=";
  for (std::size_t i = 0; i < s.fc_hidden.size(); ++i) o << (i ? "," : "") << s.fc_hidden[i];
  o << ";out=" << s.output_size << ";use_lstm=" << (s.use_lstm ? 1 : 0);
  return o.str();
}

NetworkShape decode_shape(const std::string& text) {
  NetworkShape s;
  s.fc_hidden.clear();
  std::istringstream in(text);
  std::string field;
  bool seen[5] = {};
  while (std::getline(in, field, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw CheckpointError("checkpoint: bad shape field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    try {
      if (key == "in") { s.input_size = std::stoi(val); seen[0] = true; }
      else if (key == "lstm") { s.lstm_hidden = std::stoi(val); seen[1] = true; }
      else if (key == "out") { s.output_size = std::stoi(val); seen[3] = true; }
      else if (key == "use_lstm") { s.use_lstm = val == "1"; seen[4] = true; }
      else if (key == "fc") {
        std::istringstream fl(val);
        std::string w;
        while (std::getline(fl, w, ',')) s.fc_hidden.push_back(std::stoi(w));
        seen[2] = true;
      } else {
        throw CheckpointError("checkpoint: unknown shape key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw CheckpointError("checkpoint: bad shape value '" + field + "'");
    }
  }
  for (bool b : seen)
    if (!b) throw CheckpointError("checkpoint: incomplete shape '" + text + "'");
  return s;
}

}  // namespace uvaa::nn
