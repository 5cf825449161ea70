#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpinn {

/// Hidden-layer nonlinearity. `identity` exists so tests can build affine
/// networks whose derivatives are known in closed form.
enum class Activation { elu, identity };

/// Problem-dependent widths plus the (fixed) architecture shape.
struct ArchitectureConfig {
  int spatial_dim = 0;
  int n_y = 1;
  int n_u = 1;

  int width = 100;
  int trunk_layers = 5;
  int control_layers = 3;
  int adjoint_layers = 2;
  Activation activation = Activation::elu;

  int input_dim() const { return 1 + spatial_dim; }
  /// Throws std::invalid_argument on a malformed configuration.
  void validate() const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;  // column-major out x in block
  std::size_t bias_offset = 0;
  bool activated = false;
};

/// All trainable weights of the three-headed network, stored as one flat
/// vector. Layer order: trunk hidden layers, y head, control hidden layers,
/// u head, adjoint hidden layers, lambda head. Within a layer the weight
/// matrix (column-major) precedes the bias.
///
/// Wiring:
///   (t, x) -> trunk -> y
///   [y ; trunk last hidden] -> control branch -> u
///   [y ; u ; control last hidden] -> adjoint branch -> lambda
class ControlPinnParams {
 public:
  using WeightMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstWeightMap = Eigen::Map<const Eigen::MatrixXd>;
  using BiasMap = Eigen::Map<Eigen::VectorXd>;
  using ConstBiasMap = Eigen::Map<const Eigen::VectorXd>;

  /// Zero-initialized parameters for `config`.
  explicit ControlPinnParams(const ArchitectureConfig& config);

  const ArchitectureConfig& config() const { return config_; }
  std::span<const DenseLayer> layers() const { return layers_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  WeightMap weight(int layer);
  ConstWeightMap weight(int layer) const;
  BiasMap bias(int layer);
  ConstBiasMap bias(int layer) const;

  int trunk_begin() const { return 0; }
  int y_head() const { return config_.trunk_layers; }
  int control_begin() const { return y_head() + 1; }
  int u_head() const { return control_begin() + config_.control_layers; }
  int adjoint_begin() const { return u_head() + 1; }
  int lambda_head() const { return adjoint_begin() + config_.adjoint_layers; }

 private:
  ArchitectureConfig config_;
  std::vector<DenseLayer> layers_;
  Eigen::VectorXd values_;
};

/// Glorot-uniform weights and zero biases, drawn from a Philox stream keyed
/// by `seed` so the result is identical on every platform.
ControlPinnParams init_params(const ArchitectureConfig& config, std::uint64_t seed);

struct NetworkOutputs {
  Eigen::VectorXd y;
  Eigen::VectorXd u;
  Eigen::VectorXd lambda;
};

/// Plain evaluation at one space-time point. `x.size()` must equal the
/// configured spatial dimension (empty for ODE problems).
NetworkOutputs forward(const ControlPinnParams& params, double t, std::span<const double> x);

/// Optimizer state stored alongside parameters in a checkpoint.
struct OptimizerSnapshot {
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
};

struct Checkpoint {
  std::uint64_t epoch = 0;
  ControlPinnParams params;
  std::optional<OptimizerSnapshot> optimizer;
};

/// Checkpoint file format, version 1 (all integers and doubles little-endian):
///
///   char[8]  magic "CPINNCKP"
///   u32      version = 1
///   i32 x 8  spatial_dim, n_y, n_u, width, trunk_layers, control_layers,
///            adjoint_layers, activation (0 = elu, 1 = identity)
///   u64      epoch
///   u64      parameter count P
///   f64 x P  parameters in ControlPinnParams flattening order
///   u8       has_optimizer
///   if has_optimizer:
///     u64      step
///     f64 x 4  learning_rate, beta1, beta2, epsilon
///     f64 x P  first moment
///     f64 x P  second moment
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string to_string(Activation activation);

}  // namespace cpinn
