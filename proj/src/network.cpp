#include "cpinn/network.hpp"

#include "cpinn/autodiff.hpp"
#include "cpinn/random.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cpinn {

void ArchitectureConfig::validate() const {
  if (spatial_dim < 0 || spatial_dim > 3) throw std::invalid_argument("spatial_dim must lie in [0, 3]");
  if (n_y < 1) throw std::invalid_argument("n_y must be >= 1");
  if (n_u < 1) throw std::invalid_argument("n_u must be >= 1");
  if (width < 1) throw std::invalid_argument("width must be >= 1");
  if (trunk_layers < 1 || control_layers < 1 || adjoint_layers < 1) {
    throw std::invalid_argument("every branch needs at least one hidden layer");
  }
}

ControlPinnParams::ControlPinnParams(const ArchitectureConfig& config) : config_(config) {
  config_.validate();
  std::size_t offset = 0;
  auto add = [&](int in, int out, bool activated) {
    DenseLayer layer{in, out, offset, offset + static_cast<std::size_t>(in) * out, activated};
    offset = layer.bias_offset + static_cast<std::size_t>(out);
    layers_.push_back(layer);
  };
  const int w = config_.width;
  for (int i = 0; i < config_.trunk_layers; ++i) add(i == 0 ? config_.input_dim() : w, w, true);
  add(w, config_.n_y, false);
  for (int i = 0; i < config_.control_layers; ++i) add(i == 0 ? config_.n_y + w : w, w, true);
  add(w, config_.n_u, false);
  for (int i = 0; i < config_.adjoint_layers; ++i) add(i == 0 ? config_.n_y + config_.n_u + w : w, w, true);
  add(w, config_.n_y, false);
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

ControlPinnParams::WeightMap ControlPinnParams::weight(int layer) {
  const auto& l = layers_.at(static_cast<std::size_t>(layer));
  return {values_.data() + l.weight_offset, l.out, l.in};
}
ControlPinnParams::ConstWeightMap ControlPinnParams::weight(int layer) const {
  const auto& l = layers_.at(static_cast<std::size_t>(layer));
  return {values_.data() + l.weight_offset, l.out, l.in};
}
ControlPinnParams::BiasMap ControlPinnParams::bias(int layer) {
  const auto& l = layers_.at(static_cast<std::size_t>(layer));
  return {values_.data() + l.bias_offset, l.out};
}
ControlPinnParams::ConstBiasMap ControlPinnParams::bias(int layer) const {
  const auto& l = layers_.at(static_cast<std::size_t>(layer));
  return {values_.data() + l.bias_offset, l.out};
}

ControlPinnParams init_params(const ArchitectureConfig& config, std::uint64_t seed) {
  ControlPinnParams params(config);
  const auto layers = params.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    // stream 1 is reserved for initialization; substream is the layer index
    CounterRng rng(seed, 1, static_cast<std::uint32_t>(i));
    const double limit = std::sqrt(6.0 / (layers[i].in + layers[i].out));
    auto w = params.weight(static_cast<int>(i));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
    }
  }
  return params;
}

NetworkOutputs forward(const ControlPinnParams& params, double t, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.config().spatial_dim) {
    throw std::invalid_argument("forward: point dimension does not match the network");
  }
  Eigen::MatrixXd point(params.config().input_dim(), 1);
  point(0, 0) = t;
  for (std::size_t i = 0; i < x.size(); ++i) point(static_cast<Eigen::Index>(i) + 1, 0) = x[i];
  const JetBatch batch = forward_jets(params, point, JetLayout(params.config().spatial_dim, {}));
  return {batch.y.col(0), batch.u.col(0), batch.lambda.col(0)};
}

std::string to_string(Activation activation) {
  return activation == Activation::elu ? "elu" : "identity";
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'P', 'I', 'N', 'N', 'C', 'K', 'P'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: unexpected end of file");
  return v;
}

void put_vector(std::ofstream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd get_vector(std::ifstream& in, std::uint64_t n) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated vector");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  const auto& c = checkpoint.params.config();
  out.write(kMagic, sizeof(kMagic));
  put(out, kCheckpointVersion);
  for (std::int32_t v : {c.spatial_dim, c.n_y, c.n_u, c.width, c.trunk_layers, c.control_layers, c.adjoint_layers,
                         c.activation == Activation::elu ? 0 : 1}) {
    put(out, v);
  }
  put(out, checkpoint.epoch);
  put(out, static_cast<std::uint64_t>(checkpoint.params.size()));
  put_vector(out, checkpoint.params.values());
  const std::uint8_t has_opt = checkpoint.optimizer ? 1 : 0;
  put(out, has_opt);
  if (const auto& opt = checkpoint.optimizer) {
    if (opt->first_moment.size() != checkpoint.params.values().size() ||
        opt->second_moment.size() != checkpoint.params.values().size()) {
      throw std::invalid_argument("checkpoint: optimizer moments do not match parameter count");
    }
    put(out, opt->step);
    for (double v : {opt->learning_rate, opt->beta1, opt->beta2, opt->epsilon}) put(out, v);
    put_vector(out, opt->first_moment);
    put_vector(out, opt->second_moment);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  ArchitectureConfig c;
  c.spatial_dim = get<std::int32_t>(in);
  c.n_y = get<std::int32_t>(in);
  c.n_u = get<std::int32_t>(in);
  c.width = get<std::int32_t>(in);
  c.trunk_layers = get<std::int32_t>(in);
  c.control_layers = get<std::int32_t>(in);
  c.adjoint_layers = get<std::int32_t>(in);
  c.activation = get<std::int32_t>(in) == 0 ? Activation::elu : Activation::identity;
  Checkpoint ck{get<std::uint64_t>(in), ControlPinnParams(c), std::nullopt};
  const auto count = get<std::uint64_t>(in);
  if (count != ck.params.size()) throw std::runtime_error("checkpoint: parameter count does not match header");
  ck.params.values() = get_vector(in, count);
  if (get<std::uint8_t>(in) != 0) {
    OptimizerSnapshot opt;
    opt.step = get<std::uint64_t>(in);
    opt.learning_rate = get<double>(in);
    opt.beta1 = get<double>(in);
    opt.beta2 = get<double>(in);
    opt.epsilon = get<double>(in);
    opt.first_moment = get_vector(in, count);
    opt.second_moment = get_vector(in, count);
    ck.optimizer = std::move(opt);
  }
  return ck;
}

}  // namespace cpinn
