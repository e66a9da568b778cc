#include "bathy/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bathy/parallel.hpp"
#include "text_io.hpp"

namespace bathy {

void MLPArchitecture::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ValidationError("network input and output dimensions must be >= 1");
  for (Index w : hidden) {
    if (w < 1) throw ValidationError("hidden layer widths must be >= 1");
  }
}

Normalization Normalization::identity(Index input_dim, Index output_dim) {
  return {Eigen::VectorXd::Zero(input_dim), Eigen::VectorXd::Ones(input_dim), Eigen::VectorXd::Zero(output_dim),
          1.0};
}

Eigen::VectorXd Normalization::normalize_input(const Eigen::VectorXd& y) const {
  return ((y - input_mean).array() / input_scale.array()).matrix();
}

Eigen::VectorXd Normalization::normalize_target(const Eigen::VectorXd& x) const {
  return (x - output_shift) / output_scale;
}

Eigen::VectorXd Normalization::denormalize_output(const Eigen::VectorXd& z) const {
  return output_shift + output_scale * z;
}

void MLPParameters::validate() const {
  if (layers.empty()) throw ValidationError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weight.rows()) throw ValidationError("layer " + std::to_string(l) + " bias shape");
    if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows()) {
      throw ValidationError("layer " + std::to_string(l) + " input width does not match previous layer");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw ValidationError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
  const auto& n = normalization;
  if (n.input_mean.size() != input_dim() || n.input_scale.size() != input_dim() ||
      n.output_shift.size() != output_dim()) {
    throw ValidationError("normalization statistics do not match network dimensions");
  }
  if (!(n.input_scale.array() > 0.0).all() || !(n.output_scale > 0.0)) {
    throw ValidationError("normalization scales must be positive");
  }
}

MLPParameters initialize_parameters(const MLPArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  std::vector<Index> widths{arch.input_dim};
  widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
  widths.push_back(arch.output_dim);
  Rng rng(derive_seed(seed, "init"));
  MLPParameters params;
  params.activation = arch.activation;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index fan_in = widths[l], fan_out = widths[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> uniform(-a, a);
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    for (Index c = 0; c < fan_in; ++c) {
      for (Index r = 0; r < fan_out; ++r) layer.weight(r, c) = uniform(rng);
    }
    params.layers.push_back(std::move(layer));
  }
  params.normalization = Normalization::identity(arch.input_dim, arch.output_dim);
  return params;
}

namespace {

template <typename Derived>
void activate_in_place(Eigen::MatrixBase<Derived>& z, Activation act) {
  if (act == Activation::relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

}  // namespace

Eigen::VectorXd network_output(const MLPParameters& params, const Eigen::VectorXd& z) {
  if (z.size() != params.input_dim()) {
    throw ValidationError("network input has length " + std::to_string(z.size()) + ", expected " +
                          std::to_string(params.input_dim()));
  }
  Eigen::VectorXd a = z;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Eigen::VectorXd next = layer.bias;
    next.noalias() += layer.weight * a;
    if (l + 1 < params.layers.size()) activate_in_place(next, params.activation);
    a = std::move(next);
  }
  return a;
}

Eigen::VectorXd forward(const MLPParameters& params, const Eigen::VectorXd& y) {
  const auto& norm = params.normalization;
  if (y.size() != norm.input_mean.size() || y.size() != params.input_dim()) {
    throw ValidationError("measurement vector has length " + std::to_string(y.size()) + ", network expects " +
                          std::to_string(params.input_dim()));
  }
  Eigen::VectorXd out = norm.denormalize_output(network_output(params, norm.normalize_input(y)));
  if (!out.allFinite()) throw NumericError("network produced non-finite output");
  return out;
}

Eigen::MatrixXd forward_batch(const MLPParameters& params, const Eigen::MatrixXd& ys) {
  Eigen::MatrixXd out(params.output_dim(), ys.cols());
  for (Index k = 0; k < ys.cols(); ++k) out.col(k) = forward(params, ys.col(k));
  return out;
}

Field predict(const MLPParameters& params, const GridSpec& grid, const Eigen::VectorXd& y) {
  return Field(grid, forward(params, y));
}

LossGradient loss_and_gradient(const MLPParameters& params, const Eigen::MatrixXd& inputs,
                               const Eigen::MatrixXd& targets) {
  const Index batch = inputs.cols();
  if (batch == 0) throw ValidationError("loss_and_gradient needs a non-empty batch");
  if (targets.cols() != batch || inputs.rows() != params.input_dim() || targets.rows() != params.output_dim()) {
    throw ValidationError("batch shapes do not match network");
  }
  const std::size_t depth = params.layers.size();
  // activations[l] feeds layer l; activations[depth] is the output.
  std::vector<Eigen::MatrixXd> activations(depth + 1);
  activations[0] = inputs;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z = layer.weight * activations[l];
    z.colwise() += layer.bias;
    if (l + 1 < depth) activate_in_place(z, params.activation);
    activations[l + 1] = std::move(z);
  }
  const Eigen::MatrixXd error = activations[depth] - targets;
  LossGradient result;
  result.loss = error.squaredNorm() / static_cast<double>(batch);
  if (!std::isfinite(result.loss)) throw NumericError("non-finite training loss");

  result.gradient.resize(depth);
  Eigen::MatrixXd delta = (2.0 / static_cast<double>(batch)) * error;
  for (std::size_t l = depth; l-- > 0;) {
    auto& grad = result.gradient[l];
    grad.weight.noalias() = delta * activations[l].transpose();
    grad.bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd back = params.layers[l].weight.transpose() * delta;
    const auto& a = activations[l];
    if (params.activation == Activation::relu) {
      back = (a.array() > 0.0).select(back, 0.0);
    } else {
      back.array() *= 1.0 - a.array().square();
    }
    delta = std::move(back);
  }
  return result;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ValidationError("invalid Adam parameters");
  }
}

NetworkProfile network_profile(std::string_view name) {
  if (name == "desk") return {{256, 256}, 30, 1e-3, 64};
  if (name == "paper") return {{2000, 2000}, 50, 1e-4, 64};
  throw ConfigError("unknown network profile '" + std::string(name) + "' (desk, paper)");
}

Normalization fit_normalization(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                const std::optional<Eigen::VectorXd>& prior_mean) {
  const auto count = static_cast<double>(inputs.cols());
  Normalization norm;
  norm.input_mean = inputs.rowwise().mean();
  norm.input_scale =
      ((inputs.colwise() - norm.input_mean).array().square().rowwise().sum() / count).sqrt().matrix();
  for (Index r = 0; r < norm.input_scale.size(); ++r) {
    if (!(norm.input_scale[r] > 1e-12)) norm.input_scale[r] = 1.0;
  }
  if (prior_mean) {
    if (prior_mean->size() != targets.rows()) throw ValidationError("prior mean length does not match targets");
    norm.output_shift = *prior_mean;
  } else {
    norm.output_shift = targets.rowwise().mean();
  }
  const Eigen::ArrayXXd centred = (targets.colwise() - norm.output_shift).array();
  const double mean = centred.mean();
  const double var = (centred - mean).square().mean();
  norm.output_scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  return norm;
}

TrainResult train(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const MLPArchitecture& arch,
                  const TrainConfig& config) {
  arch.validate();
  config.validate();
  if (inputs.cols() != targets.cols() || inputs.cols() == 0) {
    throw ValidationError("training needs matching, non-empty inputs and targets");
  }
  if (inputs.rows() != arch.input_dim || targets.rows() != arch.output_dim) {
    throw ValidationError("dataset dimensions do not match the architecture");
  }
  TrainResult result{initialize_parameters(arch, config.seed), {}};
  if (config.normalize) result.params.normalization = fit_normalization(inputs, targets, config.prior_mean);
  const Normalization& norm = result.params.normalization;

  const Index count = inputs.cols();
  const std::size_t depth = result.params.layers.size();
  std::vector<DenseLayer> first(depth), second(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = result.params.layers[l];
    first[l] = {Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()), Eigen::VectorXd::Zero(layer.bias.size())};
    second[l] = first[l];
  }
  std::vector<Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Index{0});
  MLPParameters last_finite = result.params;
  long step = 0;

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (Index start = 0; start < count; start += config.batch_size) {
      const Index size = std::min(config.batch_size, count - start);
      Eigen::MatrixXd batch_in(inputs.rows(), size), batch_out(targets.rows(), size);
      for (Index b = 0; b < size; ++b) {
        const Index k = order[static_cast<std::size_t>(start + b)];
        batch_in.col(b) = ((inputs.col(k) - norm.input_mean).array() / norm.input_scale.array()).matrix();
        batch_out.col(b) = (targets.col(k) - norm.output_shift) / norm.output_scale;
      }
      LossGradient lg;
      try {
        lg = loss_and_gradient(result.params, batch_in, batch_out);
      } catch (const NumericError& e) {
        result.loss_history.push_back(std::numeric_limits<double>::quiet_NaN());
        throw TrainingError("training diverged in epoch " + std::to_string(epoch) + ": " + e.what(), last_finite,
                            result.loss_history);
      }
      epoch_loss += lg.loss * static_cast<double>(size);
      ++step;
      const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      const double rate = config.learning_rate * std::sqrt(correction2) / correction1;
      const double eps = config.epsilon * std::sqrt(correction2);
      for (std::size_t l = 0; l < depth; ++l) {
        auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
          m = config.beta1 * m + (1.0 - config.beta1) * g;
          v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
          param.array() -= rate * m.array() / (v.array().sqrt() + eps);
        };
        update(result.params.layers[l].weight, first[l].weight, second[l].weight, lg.gradient[l].weight);
        update(result.params.layers[l].bias, first[l].bias, second[l].bias, lg.gradient[l].bias);
      }
    }
    epoch_loss /= static_cast<double>(count);
    result.loss_history.push_back(epoch_loss);
    bool finite = std::isfinite(epoch_loss);
    for (const auto& layer : result.params.layers) finite = finite && layer.weight.allFinite() && layer.bias.allFinite();
    if (!finite) {
      throw TrainingError("training diverged after epoch " + std::to_string(epoch), last_finite, result.loss_history);
    }
    last_finite = result.params;
  }
  return result;
}

TrainResult train(const TrainingDataset& dataset, const MLPArchitecture& arch, const TrainConfig& config) {
  return train(dataset.inputs, dataset.targets, arch, config);
}

namespace {
constexpr char kCheckpointMagic[8] = {'B', 'A', 'T', 'H', 'Y', 'N', 'N', '1'};

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Index k = 0; k < v.size(); ++k) detail::write_f64(out, v[k]);
}

Eigen::VectorXd read_vector(std::istream& in, Index size) {
  Eigen::VectorXd v(size);
  for (Index k = 0; k < size; ++k) v[k] = detail::read_f64(in);
  return v;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MLPParameters& params) {
  params.validate();
  auto out = detail::open_output(path, true);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_u64(out, params.layers.size());
  detail::write_u64(out, params.activation == Activation::relu ? 0 : 1);
  for (const auto& layer : params.layers) {
    detail::write_u64(out, static_cast<std::uint64_t>(layer.weight.rows()));
    detail::write_u64(out, static_cast<std::uint64_t>(layer.weight.cols()));
  }
  for (const auto& layer : params.layers) {
    for (Index r = 0; r < layer.weight.rows(); ++r) {
      for (Index c = 0; c < layer.weight.cols(); ++c) detail::write_f64(out, layer.weight(r, c));
    }
    write_vector(out, layer.bias);
  }
  const auto& n = params.normalization;
  write_vector(out, n.input_mean);
  write_vector(out, n.input_scale);
  write_vector(out, n.output_shift);
  detail::write_f64(out, n.output_scale);
  detail::finish_output(out, path);
}

MLPParameters load_checkpoint(const std::filesystem::path& path) {
  auto in = detail::open_input(path, true);
  char magic[8];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + 8, kCheckpointMagic)) {
    throw IoError(path.string() + ": not a network checkpoint");
  }
  try {
    const auto depth = detail::read_u64(in);
    if (depth == 0 || depth > 64) throw IoError("implausible layer count");
    MLPParameters params;
    params.activation = detail::read_u64(in) == 0 ? Activation::relu : Activation::tanh;
    std::vector<std::pair<Index, Index>> shapes;
    for (std::uint64_t l = 0; l < depth; ++l) {
      const auto rows = static_cast<Index>(detail::read_u64(in));
      const auto cols = static_cast<Index>(detail::read_u64(in));
      shapes.emplace_back(rows, cols);
    }
    for (const auto& [rows, cols] : shapes) {
      DenseLayer layer{Eigen::MatrixXd(rows, cols), {}};
      for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) layer.weight(r, c) = detail::read_f64(in);
      }
      layer.bias = read_vector(in, rows);
      params.layers.push_back(std::move(layer));
    }
    params.normalization.input_mean = read_vector(in, params.input_dim());
    params.normalization.input_scale = read_vector(in, params.input_dim());
    params.normalization.output_shift = read_vector(in, params.output_dim());
    params.normalization.output_scale = detail::read_f64(in);
    params.validate();
    return params;
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_loss_history(const std::filesystem::path& path, const std::vector<double>& history) {
  auto out = detail::open_output(path);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) out << e << ',' << detail::format_double(history[e]) << '\n';
  detail::finish_output(out, path);
}

Eigen::VectorXd network_bootstrap_realization(const MeanEstimator& estimator, const ConditioningDraw& draw,
                                              const Field& prior_mean, const ObservationModel& model,
                                              const Eigen::VectorXd& y) {
  const Eigen::VectorXd deviation = draw.prior_sample - prior_mean.values();
  return deviation + estimator(y + draw.noise - model.forward() * deviation);
}

RealizationBatch sample_posterior_dnn(const MeanEstimator& estimator, const GaussianPrior& prior,
                                      const ObservationModel& model, NoiseScaling noise, const Eigen::VectorXd& y,
                                      Index count, std::uint64_t seed) {
  if (model.field_size() != prior.size() || y.size() != model.measurement_count()) {
    throw ValidationError("sample_posterior_dnn: dimension mismatch");
  }
  if (count < 0) throw ValidationError("realization count must be non-negative");
  const ObservationModel scaled = model.with_noise_scale(noise.theta2);
  Eigen::MatrixXd samples(prior.size(), count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t k) {
    const auto draw = conditioning_draw(prior, scaled, seed, static_cast<Index>(k));
    samples.col(static_cast<Index>(k)) = network_bootstrap_realization(estimator, draw, prior.mean(), model, y);
  });
  return RealizationBatch(prior.grid(), std::move(samples));
}

RealizationBatch sample_posterior_dnn(const MLPParameters& params, const GaussianPrior& prior,
                                      const ObservationModel& model, NoiseScaling noise, const Eigen::VectorXd& y,
                                      Index count, std::uint64_t seed) {
  params.validate();
  if (params.input_dim() != model.measurement_count() || params.output_dim() != prior.size()) {
    throw ValidationError("network dimensions do not match the observation model and prior");
  }
  return sample_posterior_dnn([&params](const Eigen::VectorXd& v) { return forward(params, v); }, prior, model,
                              noise, y, count, seed);
}

}  // namespace bathy
