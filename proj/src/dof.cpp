#include "pixelmpc/dof.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

namespace pixelmpc {

namespace {

constexpr std::array<char, 4> kDatasetMagic{'D', 'F', 'D', 'S'};
constexpr std::array<char, 4> kModelMagic{'D', 'O', 'F', 'M'};
constexpr std::uint32_t kDatasetVersion = 1;

static_assert(std::endian::native == std::endian::little, "dataset files are written little-endian");

template <typename T>
void put(std::vector<unsigned char>& out, const T& v) {
  const auto* b = reinterpret_cast<const unsigned char*>(&v);
  out.insert(out.end(), b, b + sizeof(T));
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& data, std::string what) : data_(data), what_(std::move(what)) {}
  void raw(void* p, std::size_t n) {
    if (n > data_.size() - pos_) throw CorruptFile(what_ + " is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const std::vector<unsigned char>& data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace

std::pair<DofDataset, DofDataset> DofDataset::split_laps(const std::vector<int>& test_laps) const {
  DofDataset train, test;
  train.meta = meta;
  test.meta = meta;
  train.meta.lap_records.clear();
  test.meta.lap_records.clear();
  std::size_t offset = 0;
  for (std::size_t lap = 0; lap < meta.lap_records.size(); ++lap) {
    const bool held_out = std::find(test_laps.begin(), test_laps.end(), static_cast<int>(lap)) != test_laps.end();
    DofDataset& dst = held_out ? test : train;
    const std::size_t n = meta.lap_records[lap];
    if (offset + n > samples.size()) throw InvalidArgument("dataset lap table exceeds the sample count");
    dst.samples.insert(dst.samples.end(), samples.begin() + static_cast<long>(offset),
                       samples.begin() + static_cast<long>(offset + n));
    dst.meta.lap_records.push_back(static_cast<std::uint32_t>(n));
    offset += n;
  }
  return {std::move(train), std::move(test)};
}

void save_dataset(const DofDataset& ds, const std::filesystem::path& path) {
  std::vector<unsigned char> out;
  out.reserve(64 + ds.samples.size() * 48);
  out.insert(out.end(), kDatasetMagic.begin(), kDatasetMagic.end());
  put(out, kDatasetVersion);
  put(out, ds.meta.seed);
  put(out, static_cast<std::uint32_t>(ds.meta.course.size()));
  out.insert(out.end(), ds.meta.course.begin(), ds.meta.course.end());
  put(out, ds.meta.speed_min);
  put(out, ds.meta.speed_max);
  put(out, static_cast<std::uint32_t>(ds.meta.lap_records.size()));
  for (std::uint32_t n : ds.meta.lap_records) put(out, n);
  put(out, static_cast<std::uint64_t>(ds.samples.size()));
  for (const DofSample& s : ds.samples) {
    for (float f : s.input) put(out, f);
    for (float f : s.target) put(out, f);
  }
  write_file(path, out);
}

DofDataset load_dataset(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  ByteReader in(bytes, "dataset " + path.string());
  std::array<char, 4> magic{};
  in.raw(magic.data(), magic.size());
  if (magic != kDatasetMagic) throw CorruptFile("bad dataset magic in " + path.string());
  if (in.get<std::uint32_t>() != kDatasetVersion) throw CorruptFile("unsupported dataset version");
  DofDataset ds;
  ds.meta.seed = in.get<std::uint64_t>();
  const auto name_len = in.get<std::uint32_t>();
  if (name_len > in.remaining()) throw CorruptFile("dataset course name is truncated");
  ds.meta.course.resize(name_len);
  in.raw(ds.meta.course.data(), name_len);
  ds.meta.speed_min = in.get<double>();
  ds.meta.speed_max = in.get<double>();
  const auto laps = in.get<std::uint32_t>();
  if (std::size_t(laps) * 4 > in.remaining()) throw CorruptFile("dataset lap table is truncated");
  std::uint64_t lap_total = 0;
  for (std::uint32_t i = 0; i < laps; ++i) {
    ds.meta.lap_records.push_back(in.get<std::uint32_t>());
    lap_total += ds.meta.lap_records.back();
  }
  const auto count = in.get<std::uint64_t>();
  if (count != lap_total) throw CorruptFile("dataset lap table does not match the record count");
  if (count > in.remaining() / 48) throw CorruptFile("dataset records are truncated");
  ds.samples.resize(count);
  for (DofSample& s : ds.samples) {
    in.raw(s.input.data(), sizeof(float) * s.input.size());
    in.raw(s.target.data(), sizeof(float) * s.target.size());
  }
  if (in.remaining() != 0) throw CorruptFile("trailing bytes after dataset records");
  return ds;
}

DofModel::DofModel(NetworkSpec spec, NetworkWeights<float> weights, double thrust_scale, TargetMode mode)
    : spec_(std::move(spec)), weights_(std::move(weights)), thrust_scale_(thrust_scale), mode_(mode) {
  if (spec_.input_width() != kDofInputWidth || spec_.output_width() != 2) {
    throw InvalidArgument("flow model needs 10 inputs and 2 outputs");
  }
  if (!(thrust_scale_ > 0.0)) throw InvalidArgument("thrust scale must be positive");
  mlp_ = BatchedMlp(weights_, spec_);
}

DofModel DofModel::zero(const VehicleParams& params, TargetMode mode) {
  NetworkSpec spec;
  return DofModel(spec, NetworkWeights<float>::zeros(spec), default_thrust_scale(params), mode);
}

std::array<float, kDofInputWidth> DofModel::encode(const Quat<double>& q, const PixelStated& px,
                                                   const ControlInputd& u) const {
  return {float(q(0)),       float(q(1)),       float(q(2)),       float(q(3)),
          float(px.u),       float(px.v),       float(u.omega.x()), float(u.omega.y()),
          float(u.omega.z()), float(u.thrust * thrust_scale_)};
}

FlowVectord DofModel::decode(double out0, double out1) const {
  if (mode_ == TargetMode::Cartesian) return to_polar(out0, out1);
  return FlowVectord{std::max(out0, 0.0), out1};
}

std::array<float, 2> DofModel::encode_target(float l, float theta) const {
  if (mode_ == TargetMode::Cartesian) {
    return {float(double(l) * std::cos(double(theta))), float(double(l) * std::sin(double(theta)))};
  }
  return {l, theta};
}

FlowVectord DofModel::predict(const Quat<double>& q, const PixelStated& px, const ControlInputd& u) const {
  if (mlp_.empty()) throw InvalidArgument("flow model is not initialized");
  BatchedMlp::RowMatrix in(kDofInputWidth, 1), out;
  const auto x = encode(q, px, u);
  for (int k = 0; k < kDofInputWidth; ++k) in(k, 0) = x[static_cast<std::size_t>(k)];
  mlp_.forward(in, out);
  return decode(out(0, 0), out(1, 0));
}

void DofModel::predict_velocity_batch(const BatchedMlp::RowMatrix& inputs, BatchedMlp::RowMatrix& velocity,
                                      BatchedMlp::Workspace& ws) const {
  if (mlp_.empty()) throw InvalidArgument("flow model is not initialized");
  mlp_.forward(inputs, velocity, ws);
  if (mode_ == TargetMode::Cartesian) return;
  for (Eigen::Index j = 0; j < velocity.cols(); ++j) {
    const FlowVectord f = decode(velocity(0, j), velocity(1, j));
    const Vec2<double> d = polar_to_euler(f);
    velocity(0, j) = float(d.x());
    velocity(1, j) = float(d.y());
  }
}

void DofModel::save(const std::filesystem::path& path) const {
  std::vector<unsigned char> trailer(kModelMagic.begin(), kModelMagic.end());
  put(trailer, float(thrust_scale_));
  put(trailer, static_cast<std::uint32_t>(mode_));
  save_weights(weights_, spec_, path, trailer);
}

DofModel DofModel::load(const std::filesystem::path& path) {
  LoadedNetwork net = load_weights(path);
  if (net.trailer.size() != 12) throw CorruptFile("weights file lacks the flow-model trailer");
  ByteReader in(net.trailer, "flow-model trailer");
  std::array<char, 4> magic{};
  in.raw(magic.data(), magic.size());
  if (magic != kModelMagic) throw CorruptFile("bad flow-model trailer magic");
  const float scale = in.get<float>();
  const auto mode = in.get<std::uint32_t>();
  if (mode > 1) throw CorruptFile("unknown flow target mode");
  if (net.spec.input_width() != kDofInputWidth || net.spec.output_width() != 2 || !(scale > 0.0f)) {
    throw CorruptFile("weights file does not describe a flow model");
  }
  return DofModel(net.spec, std::move(net.weights), scale, static_cast<TargetMode>(mode));
}

FlowVectord dof_predict(const DofModel& model, const Quat<double>& q, const PixelStated& px,
                        const ControlInputd& u) {
  return model.predict(q, px, u);
}

Vec2<double> pixel_derivative(const DofModel& model, const Quat<double>& q, const PixelStated& px,
                              const ControlInputd& u) {
  return polar_to_euler(dof_predict(model, q, px, u));
}

CombinedDerivative combined_derivative(const CombinedState& x, const ControlInputd& u, const DofModel& model,
                                       const VehicleParams& params) {
  CombinedDerivative d;
  d.robot = robot_derivative(x.robot, u, params, Vec3<double>(Vec3<double>::Zero()));
  d.pixel = pixel_derivative(model, x.robot.q, x.pixel, u);
  return d;
}

std::vector<PixelStated> rollout_pixel(const DofModel& model, const std::vector<Quat<double>>& attitudes,
                                       const std::vector<ControlInputd>& controls, const PixelStated& pixel0,
                                       double dt, int n_steps) {
  if (n_steps < 1) throw InvalidArgument("rollout_pixel: n_steps must be at least 1");
  if (attitudes.size() < std::size_t(n_steps) || controls.size() < std::size_t(n_steps)) {
    throw InvalidArgument("rollout_pixel: trajectory shorter than n_steps");
  }
  std::vector<PixelStated> out{pixel0};
  PixelStated px = pixel0;
  for (int t = 0; t < n_steps; ++t) {
    const Vec2<double> d = pixel_derivative(model, attitudes[std::size_t(t)], px, controls[std::size_t(t)]);
    px.u += d.x() * dt;
    px.v += d.y() * dt;
    out.push_back(px);
  }
  return out;
}

std::vector<PixelStated> rollout_pixel(const DofModel& model, const RobotStated& x0,
                                       const std::vector<ControlInputd>& controls, const VehicleParams& params,
                                       const PixelStated& pixel0, double dt, int n_steps) {
  if (n_steps < 1) throw InvalidArgument("rollout_pixel: n_steps must be at least 1");
  if (controls.size() < std::size_t(n_steps)) throw InvalidArgument("rollout_pixel: too few controls");
  std::vector<Quat<double>> attitudes;
  RobotStated x = x0;
  for (int t = 0; t < n_steps; ++t) {
    attitudes.push_back(x.q);
    x = step(x, controls[std::size_t(t)], params, dt);
  }
  return rollout_pixel(model, attitudes, controls, pixel0, dt, n_steps);
}

namespace {

using MatF = MatrixX<float>;

void fill_batch(const DofModel& model, const DofDataset& ds, const std::vector<std::size_t>& order,
                std::size_t begin, std::size_t end, MatF& x, MatF& y) {
  const auto n = static_cast<Eigen::Index>(end - begin);
  x.resize(kDofInputWidth, n);
  y.resize(2, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const DofSample& s = ds.samples[order[begin + std::size_t(j)]];
    for (int k = 0; k < kDofInputWidth; ++k) x(k, j) = s.input[std::size_t(k)];
    const auto t = model.encode_target(s.target[0], s.target[1]);
    y(0, j) = t[0];
    y(1, j) = t[1];
  }
}

}  // namespace

double evaluate_loss(const DofModel& model, const DofDataset& ds) {
  if (ds.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const NetworkWeights<float>& w = model.weights();
  double total = 0.0;
  MatF x, y;
  constexpr std::size_t kChunk = 4096;
  for (std::size_t b = 0; b < ds.size(); b += kChunk) {
    const std::size_t e = std::min(ds.size(), b + kChunk);
    fill_batch(model, ds, order, b, e, x, y);
    const MatF out = forward_batch(w, model.spec(), x);
    total += double((out - y).squaredNorm());
  }
  return total / double(ds.size());
}

TrainResult train_dof(const DofDataset& train, const DofDataset* test, const NetworkSpec& spec,
                      const TrainConfig& cfg, const VehicleParams& params,
                      const std::function<void(const EpochReport&)>& on_epoch) {
  if (train.empty()) throw InvalidArgument("train_dof: empty dataset");
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw InvalidArgument("train_dof: bad epoch or batch settings");
  spec.validate();
  if (spec.input_width() != kDofInputWidth || spec.output_width() != 2) {
    throw InvalidArgument("train_dof: network must map 10 inputs to 2 outputs");
  }
  const double thrust_scale = DofModel::default_thrust_scale(params);
  NetworkWeights<float> w = init_weights<float>(spec, stream_seed(cfg.seed, std::uint64_t(Stream::Init)));
  AdamState<float> adam = AdamState<float>::init(spec, cfg.learning_rate);
  Rng shuffle = make_rng(cfg.seed, Stream::Shuffle);
  Rng dropout = make_rng(cfg.seed, Stream::Dropout);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const DofModel encoder(spec, NetworkWeights<float>::zeros(spec), thrust_scale, cfg.target_mode);

  TrainResult result;
  MatF x, y;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle);
    double sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t e = std::min(order.size(), b + batch);
      fill_batch(encoder, train, order, b, e, x, y);
      LossAndGrad<float> lg;
      try {
        lg = loss_and_grad(w, spec, x, y, std::optional<std::uint64_t>(dropout()));
      } catch (const NumericalFailure& err) {
        throw TrainingFailure(std::string("training diverged: ") + err.what(), epoch);
      }
      if (!std::isfinite(double(lg.loss))) throw TrainingFailure("training diverged", epoch);
      sum += double(lg.loss) * double(e - b);
      adam_update(adam, w, lg.grad);
    }
    if (!w.all_finite()) throw TrainingFailure("weights became non-finite", epoch);
    EpochReport rep;
    rep.epoch = epoch;
    rep.train_loss = sum / double(order.size());
    const DofModel current(spec, w, thrust_scale, cfg.target_mode);
    rep.test_loss = test != nullptr ? evaluate_loss(current, *test) : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back(rep);
    if (on_epoch) on_epoch(rep);
  }
  result.model = DofModel(spec, std::move(w), thrust_scale, cfg.target_mode);
  return result;
}

AeeResult aee(const DofModel& model, const DofDataset& ds, const CameraModel& cam, double frame_dt) {
  if (ds.empty()) throw InvalidArgument("aee: empty dataset");
  constexpr Eigen::Index kChunk = 4096;
  BatchedMlp::RowMatrix in, vel;
  BatchedMlp::Workspace ws;
  double sum_norm = 0.0, sum_px = 0.0;
  for (std::size_t b = 0; b < ds.size(); b += std::size_t(kChunk)) {
    const auto n = static_cast<Eigen::Index>(std::min(ds.size() - b, std::size_t(kChunk)));
    in.resize(kDofInputWidth, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const DofSample& s = ds.samples[b + std::size_t(j)];
      for (int k = 0; k < kDofInputWidth; ++k) in(k, j) = s.input[std::size_t(k)];
    }
    model.predict_velocity_batch(in, vel, ws);
    for (Eigen::Index j = 0; j < n; ++j) {
      const DofSample& s = ds.samples[b + std::size_t(j)];
      const Vec2<double> gt = polar_to_euler(FlowVectord{s.target[0], s.target[1]});
      const double du = gt.x() - double(vel(0, j));
      const double dv = gt.y() - double(vel(1, j));
      sum_norm += std::hypot(du, dv);
      sum_px += std::hypot(du * cam.width, dv * cam.height);
    }
  }
  AeeResult r;
  r.per_second = sum_norm / double(ds.size());
  r.per_frame = r.per_second * frame_dt;
  r.pixels_per_frame = sum_px / double(ds.size()) * frame_dt;
  return r;
}

}  // namespace pixelmpc
