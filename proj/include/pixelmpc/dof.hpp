#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pixelmpc/neural.hpp"
#include "pixelmpc/vision.hpp"

namespace pixelmpc {

/// What the network's two outputs mean. Polar regresses (l, theta) directly; Cartesian regresses
/// (u_dot, v_dot) and converts, which avoids the angle wrap at +-pi.
enum class TargetMode : std::uint32_t { Polar = 0, Cartesian = 1 };

constexpr int kDofInputWidth = 10;

/// One training pair. Input layout: [qw, qx, qy, qz, u, v, wx, wy, wz, thrust * thrust_scale].
struct DofSample {
  std::array<float, kDofInputWidth> input{};
  std::array<float, 2> target{};  // (l, theta)
};

struct DofDatasetMeta {
  std::uint64_t seed = 0;
  std::string course;
  double speed_min = 0.0;
  double speed_max = 0.0;
  std::vector<std::uint32_t> lap_records;  // samples contributed by each lap, in order
};

struct DofDataset {
  DofDatasetMeta meta;
  std::vector<DofSample> samples;
  bool partial = false;  // set when collection stopped early (crash or no laps)
  std::string warning;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  /// Samples of the listed laps (train) and of the remaining laps (test), preserving order.
  std::pair<DofDataset, DofDataset> split_laps(const std::vector<int>& test_laps) const;
};

/// "DFDS" dataset file: magic, u32 version, u64 seed, u32 course-name length + bytes,
/// f64 speed_min, f64 speed_max, u32 lap count, u32 records per lap, u64 record count, then
/// 12 little-endian f32 per record (10 inputs, l, theta).
void save_dataset(const DofDataset& ds, const std::filesystem::path& path);
DofDataset load_dataset(const std::filesystem::path& path);

template <typename Scalar>
Vec2<Scalar> polar_to_euler(const FlowVector<Scalar>& f) {
  using std::cos;
  using std::sin;
  return Vec2<Scalar>(f.l * cos(f.theta), f.l * sin(f.theta));
}

/// Trained flow model: network weights plus the input/output conventions they were trained with.
class DofModel {
 public:
  DofModel() = default;
  DofModel(NetworkSpec spec, NetworkWeights<float> weights, double thrust_scale, TargetMode mode);

  /// All-zero network; predicts no flow.
  static DofModel zero(const VehicleParams& params, TargetMode mode = TargetMode::Polar);

  static double default_thrust_scale(const VehicleParams& params) { return 1.0 / params.max_thrust(); }

  std::array<float, kDofInputWidth> encode(const Quat<double>& q, const PixelStated& px,
                                           const ControlInputd& u) const;

  /// Inference-mode prediction with l clamped at zero from below.
  FlowVectord predict(const Quat<double>& q, const PixelStated& px, const ControlInputd& u) const;

  /// Raw float network outputs for encoded rows (feature-major, width 10 x n) into (u_dot, v_dot).
  void predict_velocity_batch(const BatchedMlp::RowMatrix& inputs, BatchedMlp::RowMatrix& velocity,
                              BatchedMlp::Workspace& ws) const;

  /// Convert a raw network output pair to a flow vector, applying the target mode and clamp.
  FlowVectord decode(double out0, double out1) const;
  /// Training target in network-output space for a polar flow target.
  std::array<float, 2> encode_target(float l, float theta) const;

  const NetworkSpec& spec() const { return spec_; }
  const NetworkWeights<float>& weights() const { return weights_; }
  const BatchedMlp& mlp() const { return mlp_; }
  double thrust_scale() const { return thrust_scale_; }
  TargetMode target_mode() const { return mode_; }

  /// Weights file with a "DOFM" trailer carrying thrust_scale (f32) and target mode (u32).
  void save(const std::filesystem::path& path) const;
  static DofModel load(const std::filesystem::path& path);

 private:
  NetworkSpec spec_;
  NetworkWeights<float> weights_;
  double thrust_scale_ = 0.0;
  TargetMode mode_ = TargetMode::Polar;
  BatchedMlp mlp_;
};

FlowVectord dof_predict(const DofModel& model, const Quat<double>& q, const PixelStated& px,
                        const ControlInputd& u);

/// (u_dot, v_dot) predicted for a pixel.
Vec2<double> pixel_derivative(const DofModel& model, const Quat<double>& q, const PixelStated& px,
                              const ControlInputd& u);

/// Robot state stacked with the tracked pixel.
struct CombinedState {
  RobotStated robot;
  PixelStated pixel;
};

struct CombinedDerivative {
  StateDerivative<double> robot;
  Vec2<double> pixel = Vec2<double>::Zero();
};

/// Robot part from the rigid-body model without process noise; pixel part from the flow model,
/// which only sees attitude, pixel and control.
CombinedDerivative combined_derivative(const CombinedState& x, const ControlInputd& u, const DofModel& model,
                                       const VehicleParams& params);

/// Euler rollout of the pixel alongside the robot. Returns n_steps + 1 pixels starting with pixel0.
/// The pixel is not clamped to the image.
std::vector<PixelStated> rollout_pixel(const DofModel& model, const RobotStated& x0,
                                       const std::vector<ControlInputd>& controls, const VehicleParams& params,
                                       const PixelStated& pixel0, double dt, int n_steps);

/// Same, with the attitude at each step given (e.g. a logged trajectory) instead of integrated.
std::vector<PixelStated> rollout_pixel(const DofModel& model, const std::vector<Quat<double>>& attitudes,
                                       const std::vector<ControlInputd>& controls, const PixelStated& pixel0,
                                       double dt, int n_steps);

struct TrainConfig {
  int epochs = 40;
  int batch_size = 256;
  double learning_rate = 1e-3;
  TargetMode target_mode = TargetMode::Polar;
  std::uint64_t seed = 1;
};

struct EpochReport {
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;  // NaN when no test set was given
};

struct TrainResult {
  DofModel model;
  std::vector<EpochReport> history;
};

/// Shuffled mini-batch training with Adam. Throws TrainingFailure on a non-finite loss.
TrainResult train_dof(const DofDataset& train, const DofDataset* test, const NetworkSpec& spec,
                      const TrainConfig& cfg, const VehicleParams& params,
                      const std::function<void(const EpochReport&)>& on_epoch = {});

/// Mean inference loss of a model on a dataset in network-output space.
double evaluate_loss(const DofModel& model, const DofDataset& ds);

struct AeeResult {
  double per_second = 0.0;  // normalized image units per second
  double per_frame = 0.0;   // normalized image units per 40 Hz frame
  double pixels_per_frame = 0.0;  // image pixels per frame: x uses W, y uses H
};

/// Average endpoint error between ground-truth and predicted flow vectors.
AeeResult aee(const DofModel& model, const DofDataset& ds, const CameraModel& cam, double frame_dt = 0.025);

}  // namespace pixelmpc
