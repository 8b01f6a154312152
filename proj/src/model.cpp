#include "hrtfnp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hrtfnp/errors.hpp"
#include "hrtfnp/parallel.hpp"
#include "hrtfnp/random.hpp"
#include "json.hpp"

namespace hrtfnp::model {

using ag::Shape;
using ag::Tensor;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedC = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using StridedM = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

// Channel permutation exchanging the ears of the 8-channel input field.
constexpr std::size_t kInputSwap[8] = {2, 3, 0, 1, 6, 7, 4, 5};

double initial_log_beta(std::size_t grid) {
  const double half_width = 2.0 * (2.0 * std::numbers::pi / static_cast<double>(grid));
  return std::log(std::log(2.0) / (2.0 * (1.0 - std::cos(half_width))));
}

std::shared_ptr<const Eigen::MatrixXd> to_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  auto m = std::make_shared<Eigen::MatrixXd>(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      (*m)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r * cols + c];
  return m;
}

std::shared_ptr<const Eigen::MatrixXd> permutation_matrix(const std::vector<std::size_t>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  auto m = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(n, n));
  for (std::size_t i = 0; i < perm.size(); ++i) (*m)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i])) = 1.0;
  return m;
}

std::vector<std::size_t> half_swap(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = (i + n / 2) % n;
  return p;
}

// Exchanges the two halves of axis `axis`.
Tensor swap_halves(const Tensor& t, std::size_t axis) {
  const std::size_t h = t.dim(axis) / 2;
  return ag::concat({ag::slice(t, axis, h, h), ag::slice(t, axis, 0, h)}, axis);
}

const char* activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "softplus"; }

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ArgumentError("model config: " + m); };
  if (grid < 2 || grid % 2 != 0) fail("grid must be even and >= 2");
  if (bandwidth < 0 || bandwidth > static_cast<int>(grid / 2) - 1)
    fail("bandwidth must lie in [0, grid/2 - 1]");
  if (channels < 2 || channels % 2 != 0) fail("channels must be even and >= 2");
  if (freq_kernel % 2 == 0) fail("freq_kernel must be odd");
  if (anchors < 2 || anchors > static_cast<std::size_t>(bandwidth) + 1) fail("anchors must lie in [2, bandwidth + 1]");
  if (!(sigma_floor > 0.0) || !(sigma_floor < 1.0)) fail("sigma_floor must lie in (0, 1)");
  if (bins == 0) fail("bins must be positive");
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["grid"] = grid;
  j["bandwidth"] = bandwidth;
  j["channels"] = channels;
  j["cnn_blocks"] = cnn_blocks;
  j["mlp_blocks"] = mlp_blocks;
  j["freq_kernel"] = freq_kernel;
  j["anchors"] = anchors;
  j["sigma_floor"] = sigma_floor;
  j["bins"] = bins;
  j["activation"] = activation_name(activation);
  j["ear_symmetric"] = ear_symmetric;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw DataError("model config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      auto count = [&] {
        if (!v.is_number_unsigned()) throw DataError("model config: " + key + " must be a non-negative integer");
        return v.get<std::size_t>();
      };
      if (key == "grid") c.grid = count();
      else if (key == "bandwidth") c.bandwidth = static_cast<int>(count());
      else if (key == "channels") c.channels = count();
      else if (key == "cnn_blocks") c.cnn_blocks = count();
      else if (key == "mlp_blocks") c.mlp_blocks = count();
      else if (key == "freq_kernel") c.freq_kernel = count();
      else if (key == "anchors") c.anchors = count();
      else if (key == "bins") c.bins = count();
      else if (key == "sigma_floor") {
        if (!v.is_number()) throw DataError("model config: sigma_floor must be a number");
        c.sigma_floor = v.get<double>();
      } else if (key == "activation") {
        const auto s = v.get<std::string>();
        if (s == "relu") c.activation = Activation::kRelu;
        else if (s == "softplus") c.activation = Activation::kSoftplus;
        else throw DataError("model config: unknown activation '" + s + "'");
      } else if (key == "ear_symmetric") {
        if (!v.is_boolean()) throw DataError("model config: ear_symmetric must be a boolean");
        c.ear_symmetric = v.get<bool>();
      } else {
        throw DataError("model config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model config JSON: ") + e.what());
  }
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw DataError(e.what());
  }
  return c;
}

ModelConfig ModelConfig::micro(std::size_t bins) {
  ModelConfig c;
  c.grid = 8;
  c.bandwidth = 3;
  c.channels = 4;
  c.cnn_blocks = 1;
  c.mlp_blocks = 1;
  c.freq_kernel = 3;
  c.anchors = 4;
  c.bins = bins;
  return c;
}

double risen_softplus(double nu, double sigma_floor) {
  const double sp = nu > 0.0 ? nu + std::log1p(std::exp(-nu)) : std::log1p(std::exp(nu));
  return sigma_floor + (1.0 - sigma_floor) * sp;
}

double predictive_log_density(const std::vector<Complex>& y, const Prediction& pred) {
  if (y.size() != pred.mean.size() || y.size() != pred.stddev.size())
    throw ShapeError("predictive density: feature and prediction sizes differ");
  double total = 0.0;
  auto term = [](double v, double mu, double s) {
    if (!(s > 0.0)) throw NumericError("predictive density: non-positive scale");
    const double z = (v - mu) / s;
    return -0.5 * z * z - std::log(s) - 0.5 * kLog2Pi;
  };
  for (std::size_t i = 0; i < y.size(); ++i) {
    total += term(y[i].real(), pred.mean[i].real(), pred.stddev[i].real());
    total += term(y[i].imag(), pred.mean[i].imag(), pred.stddev[i].imag());
  }
  return total;
}

Prediction swap_ears(const Prediction& p, std::size_t bins) {
  return {hrtfnp::swap_ears(p.mean, bins), p.stddev.empty() ? p.stddev : hrtfnp::swap_ears(p.stddev, bins)};
}

SConvCnp::SConvCnp(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), grid_((cfg.validate(), cfg.grid)) {
  const int L = cfg_.bandwidth;
  const sh::RealShBasis basis(grid_, L);
  analysis_ = to_matrix(basis.analysis(), basis.coeff_count(), basis.node_count());
  synthesis_ = to_matrix(basis.synthesis(), basis.node_count(), basis.coeff_count());
  degree_of_ = std::make_shared<const std::vector<std::size_t>>(basis.degree_of());

  const std::size_t A = cfg_.anchors, D = static_cast<std::size_t>(L) + 1;
  const auto interp = sh::zonal_interpolation_matrix(A, L);  // (L+1) x A
  std::vector<double> interp_t(A * D), gain(D);
  for (std::size_t l = 0; l < D; ++l) {
    for (std::size_t a = 0; a < A; ++a) interp_t[a * D + l] = interp[l * A + a];
    gain[l] = std::sqrt(4.0 * std::numbers::pi / static_cast<double>(2 * l + 1));
  }
  interp_t_ = Tensor::from({A, D}, interp_t);
  degree_gain_ = Tensor::from({D}, gain);

  const std::size_t M = cfg_.channels, F = cfg_.bins, K = cfg_.freq_kernel;
  const std::size_t out_cols = cfg_.ear_symmetric ? 2 : 1;  // divisor for tied maps
  RandomStream rng(seed);
  auto init_uniform = [&](Tensor& t, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.mutable_values()) v = rng.uniform(-bound, bound);
  };

  const double lb = initial_log_beta(cfg_.grid);
  add_param("log_beta1", {F}).mutable_values().assign(F, lb);
  add_param("log_beta2", {1}).mutable_values().assign(1, lb);
  init_uniform(add_param("resize.w", {8, M / out_cols}), 8);
  add_param("resize.b", {M / out_cols});
  for (std::size_t b = 0; b < cfg_.cnn_blocks; ++b) {
    init_uniform(add_param("cnn" + std::to_string(b) + ".anchors", {M / out_cols, M, K, A}), M * K);
    add_param("cnn" + std::to_string(b) + ".b", {M / out_cols});
  }
  for (std::size_t b = 0; b < cfg_.mlp_blocks; ++b) {
    init_uniform(add_param("mlp" + std::to_string(b) + ".w", {M, M / out_cols}), M);
    add_param("mlp" + std::to_string(b) + ".b", {M / out_cols});
  }
  init_uniform(add_param("head.w", {M, 8 / out_cols}), M);
  add_param("head.b", {8 / out_cols});
}

Tensor& SConvCnp::add_param(const std::string& name, const Shape& shape) {
  params_.emplace_back(name, Tensor::zeros(shape, true));
  return params_.back().second;
}

Tensor& SConvCnp::param(const std::string& name) {
  for (auto& [n, t] : params_)
    if (n == name) return t;
  throw ArgumentError("no model parameter named '" + name + "'");
}

const Tensor& SConvCnp::param(const std::string& name) const {
  return const_cast<SConvCnp*>(this)->param(name);
}

std::size_t SConvCnp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void SConvCnp::load_params(const ag::NamedTensors& values) {
  if (values.size() != params_.size()) throw DataError("parameter archive holds a different number of tensors");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].first != params_[i].first)
      throw DataError("parameter archive entry '" + values[i].first + "' where '" + params_[i].first + "' expected");
    if (values[i].second.shape() != params_[i].second.shape())
      throw ShapeError("parameter '" + values[i].first + "' has shape " + ag::shape_str(values[i].second.shape()) +
                       ", model expects " + ag::shape_str(params_[i].second.shape()));
    params_[i].second.mutable_values() = values[i].second.values();
  }
}

Tensor SConvCnp::dense_weight(const std::string& name, std::size_t in) const {
  const Tensor& w = param(name);
  if (!cfg_.ear_symmetric) return w;
  // Right-ear outputs read the ear-swapped inputs through the same weights.
  const auto perm = in == 8 ? std::vector<std::size_t>(std::begin(kInputSwap), std::end(kInputSwap)) : half_swap(in);
  return ag::concat({w, ag::linear_map(permutation_matrix(perm), w)}, 1);
}

Tensor SConvCnp::dense_bias(const std::string& name) const {
  const Tensor& b = param(name);
  return cfg_.ear_symmetric ? ag::concat({b, b}, 0) : b;
}

Tensor SConvCnp::act(const Tensor& x) const {
  return cfg_.activation == Activation::kRelu ? ag::relu(x) : ag::softplus(x);
}

Tensor SConvCnp::first_setconv(const std::vector<DataPoint>& context) const {
  const Tensor& log_beta = param("log_beta1");
  const std::size_t F = cfg_.bins, G2 = grid_.node_count(), C = context.size();
  for (const auto& c : context)
    if (c.features.size() != 2 * F) throw ShapeError("context features do not match the model's bin count");
  std::vector<double> beta(F);
  for (std::size_t f = 0; f < F; ++f) beta[f] = std::exp(log_beta.values()[f]);

  // Value and derivative with respect to log beta[f] of every output entry.
  std::vector<double> out(G2 * F * 8, 0.0), deriv(G2 * F * 8, 0.0);
  const auto& nodes = grid_.nodes();
  parallel_for(G2, [&](std::size_t g) {
    std::vector<double> acc(F * 8);
    for (std::size_t e = 0; e < 2; ++e) {
      std::fill(acc.begin(), acc.end(), 0.0);  // d, sr, si, d', sr', si'
      for (std::size_t c = 0; c < C; ++c) {
        const UnitVec3 x = e == 0 ? context[c].location : mirror_median(context[c].location);
        const double t = 1.0 - x.dot(nodes[g]);
        for (std::size_t f = 0; f < F; ++f) {
          const double a = -2.0 * beta[f] * t;
          const double k = std::exp(a);
          const Complex y = context[c].features[e * F + f];
          double* p = &acc[f * 8];
          p[0] += k;
          p[1] += y.real() * k;
          p[2] += y.imag() * k;
          p[3] += a * k;
          p[4] += y.real() * a * k;
          p[5] += y.imag() * a * k;
        }
      }
      for (std::size_t f = 0; f < F; ++f) {
        const double* p = &acc[f * 8];
        const double d = p[0];
        double sr = 0, si = 0, dsr = 0, dsi = 0;
        if (d > 0.0) {
          sr = p[1] / d;
          si = p[2] / d;
          dsr = (p[4] - sr * p[3]) / d;
          dsi = (p[5] - si * p[3]) / d;
        }
        const std::size_t o = (g * F + f) * 8;
        out[o + 2 * e] = d;
        deriv[o + 2 * e] = p[3];
        out[o + 2 * e + 1] = sr;
        deriv[o + 2 * e + 1] = dsr;
        out[o + 5 + 2 * e] = si;
        deriv[o + 5 + 2 * e] = dsi;
      }
    }
  });
  auto dv = std::make_shared<const std::vector<double>>(std::move(deriv));
  return ag::make_op({log_beta}, {G2, F, 8}, std::move(out), [dv, F](ag::Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < dv->size(); ++i) g[(i / 8) % F] += self.grad[i] * (*dv)[i];
  });
}

Tensor SConvCnp::resize_in(const Tensor& field) const {
  return ag::add(ag::matmul(field, dense_weight("resize.w", 8)), dense_bias("resize.b"));
}

Tensor SConvCnp::conv_weights(std::size_t block) const {
  const std::string pre = "cnn" + std::to_string(block);
  Tensor anchors = param(pre + ".anchors");
  if (cfg_.ear_symmetric) anchors = ag::concat({anchors, swap_halves(anchors, 1)}, 0);
  const std::size_t M = cfg_.channels, K = cfg_.freq_kernel, A = cfg_.anchors;
  const std::size_t D = static_cast<std::size_t>(cfg_.bandwidth) + 1;
  Tensor k = ag::matmul(ag::reshape(anchors, {M * M * K, A}), interp_t_);  // (M M K, L+1)
  k = ag::mul(k, degree_gain_);
  return ag::permute(ag::reshape(k, {M, M, K, D}), {3, 2, 1, 0});  // (L+1, K, in, out)
}

Tensor SConvCnp::hybrid_conv(const Tensor& x, std::size_t block) const {
  const Tensor coeffs = ag::linear_map(analysis_, x);
  const Tensor filtered = ag::conv1d(coeffs, conv_weights(block), degree_of_);
  return ag::add(ag::linear_map(synthesis_, filtered), dense_bias("cnn" + std::to_string(block) + ".b"));
}

Tensor SConvCnp::cnn_block(const Tensor& x, std::size_t block) const {
  return ag::add(x, hybrid_conv(act(x), block));
}

Tensor SConvCnp::cnn_forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t b = 0; b < cfg_.cnn_blocks; ++b) h = cnn_block(h, b);
  return h;
}

Tensor SConvCnp::second_setconv(const Tensor& z, const std::vector<UnitVec3>& targets) const {
  const Tensor& log_beta = param("log_beta2");
  const std::size_t G2 = grid_.node_count(), F = cfg_.bins, M = cfg_.channels, H = M / 2, T = targets.size();
  if (z.shape() != Shape{G2, F, M}) throw ShapeError("second set convolution: field shape " + ag::shape_str(z.shape()));
  const double beta = std::exp(log_beta.item());
  const auto& nodes = grid_.nodes();

  // Normalized weights W and their log-beta derivatives W (A - mean_W A)
  // for the left (targets as given) and right (mirrored targets) halves.
  struct Side {
    RowMat w, dw;
  };
  auto sides = std::make_shared<std::array<Side, 2>>();
  for (std::size_t s = 0; s < 2; ++s) {
    RowMat a(T, G2);
    for (std::size_t t = 0; t < T; ++t) {
      const UnitVec3 x = s == 0 ? targets[t] : mirror_median(targets[t]);
      for (std::size_t g = 0; g < G2; ++g) a(t, g) = -2.0 * beta * (1.0 - x.dot(nodes[g]));
    }
    RowMat w = (a.colwise() - a.rowwise().maxCoeff()).array().exp().matrix();
    w.array().colwise() /= w.rowwise().sum().array();
    const Eigen::VectorXd abar = (w.array() * a.array()).rowwise().sum();
    (*sides)[s].dw = (w.array() * (a.colwise() - abar).array()).matrix();
    (*sides)[s].w = std::move(w);
  }

  std::vector<double> out(T * F * M);
  const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(F * M));
  const auto Ti = static_cast<Eigen::Index>(T), Gi = static_cast<Eigen::Index>(G2), Hi = static_cast<Eigen::Index>(H);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t off = f * M + s * H;
      StridedM(out.data() + off, Ti, Hi, stride).noalias() =
          (*sides)[s].w * StridedC(z.values().data() + off, Gi, Hi, stride);
    }
  return ag::make_op({log_beta, z}, {T, F, M}, std::move(out), [sides, F, M, H, Ti, Gi, Hi, stride](ag::Node& self) {
    ag::Node& pb = *self.parents[0];
    ag::Node& pz = *self.parents[1];
    double gb = 0.0;
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t off = f * M + s * H;
        const StridedC g(self.grad.data() + off, Ti, Hi, stride);
        const StridedC zv(pz.value.data() + off, Gi, Hi, stride);
        if (pz.requires_grad)
          StridedM(pz.ensure_grad().data() + off, Gi, Hi, stride).noalias() += (*sides)[s].w.transpose() * g;
        if (pb.requires_grad) gb += (g.array() * ((*sides)[s].dw * zv).array()).sum();
      }
    if (pb.requires_grad) pb.ensure_grad()[0] += gb;
  });
}

Tensor SConvCnp::mlp_head(const Tensor& q) const {
  Tensor h = q;
  const std::size_t M = cfg_.channels;
  for (std::size_t b = 0; b < cfg_.mlp_blocks; ++b) {
    const std::string pre = "mlp" + std::to_string(b);
    h = ag::add(ag::add(h, ag::matmul(act(h), dense_weight(pre + ".w", M))), dense_bias(pre + ".b"));
  }
  return ag::add(ag::matmul(h, dense_weight("head.w", M)), dense_bias("head.b"));
}

SConvCnp::Output SConvCnp::forward(const std::vector<DataPoint>& context, const std::vector<UnitVec3>& targets) const {
  const Tensor z = cnn_forward(resize_in(first_setconv(context)));
  const Tensor h = mlp_head(second_setconv(z, targets));
  Output o;
  o.mean = ag::concat({ag::slice(h, 2, 0, 2), ag::slice(h, 2, 4, 2)}, 2);
  const Tensor raw = ag::concat({ag::slice(h, 2, 2, 2), ag::slice(h, 2, 6, 2)}, 2);
  o.scale = ag::add_scalar(ag::scale(ag::softplus(raw), 1.0 - cfg_.sigma_floor), cfg_.sigma_floor);
  return o;
}

std::vector<UnitVec3> target_locations(const Task& task) {
  std::vector<UnitVec3> x;
  x.reserve(task.target.size());
  for (const auto& t : task.target) x.push_back(t.location);
  return x;
}

Tensor target_tensor(const Task& task) {
  const std::size_t F = task.bins, T = task.target.size();
  std::vector<double> y(T * F * 4);
  for (std::size_t t = 0; t < T; ++t) {
    if (task.target[t].features.size() != 2 * F) throw ShapeError("target features do not match the task's bin count");
    for (std::size_t e = 0; e < 2; ++e)
      for (std::size_t f = 0; f < F; ++f) {
        const Complex v = task.target[t].features[e * F + f];
        y[(t * F + f) * 4 + 2 * e] = v.real();
        y[(t * F + f) * 4 + 2 * e + 1] = v.imag();
      }
  }
  return Tensor::from({T, F, 4}, std::move(y));
}

Tensor gaussian_nll(const SConvCnp::Output& out, const Tensor& y) {
  const std::size_t T = y.dim(0);
  if (T == 0) return Tensor::scalar(0.0);
  const Tensor z = ag::div(ag::sub(y, out.mean), out.scale);
  const Tensor per = ag::add(ag::scale(ag::square(z), 0.5), ag::log(out.scale));
  return ag::add_scalar(ag::scale(ag::sum(per), 1.0 / static_cast<double>(T)),
                        0.5 * kLog2Pi * static_cast<double>(y.numel() / T));
}

Tensor SConvCnp::loss(const Task& task) const {
  if (task.bins != cfg_.bins) throw ShapeError("task bin count differs from the model's");
  return gaussian_nll(forward(task.context, target_locations(task)), target_tensor(task));
}

std::vector<Prediction> SConvCnp::predict(const std::vector<DataPoint>& context,
                                          const std::vector<UnitVec3>& targets) const {
  ag::NoGradGuard guard;
  const Output o = forward(context, targets);
  const std::size_t F = cfg_.bins;
  std::vector<Prediction> preds(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto& p = preds[t];
    p.mean.resize(2 * F);
    p.stddev.resize(2 * F);
    for (std::size_t e = 0; e < 2; ++e)
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t i = (t * F + f) * 4 + 2 * e;
        p.mean[e * F + f] = {o.mean.values()[i], o.mean.values()[i + 1]};
        p.stddev[e * F + f] = {o.scale.values()[i], o.scale.values()[i + 1]};
      }
  }
  return preds;
}

}  // namespace hrtfnp::model
