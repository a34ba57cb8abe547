#include "pixelmpc/neural.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <iterator>

namespace pixelmpc {

Activation NetworkSpec::activation(int layer) const {
  if (!activations.empty()) return activations.at(static_cast<std::size_t>(layer));
  return layer + 1 < layers() ? Activation::ReLU : Activation::Linear;
}

void NetworkSpec::validate() const {
  if (widths.size() < 2) throw InvalidArgument("network needs at least two layers");
  for (int w : widths) {
    if (w <= 0) throw InvalidArgument("layer widths must be positive");
  }
  if (!(dropout >= 0.0f && dropout < 1.0f)) throw InvalidArgument("dropout must be in [0, 1)");
  if (!activations.empty() && static_cast<int>(activations.size()) != layers()) {
    throw InvalidArgument("one activation per affine layer is required");
  }
}

namespace {

constexpr std::array<char, 4> kMagic{'D', 'O', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "weights files are written little-endian");

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::vector<unsigned char> bytes;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> data) : data_(std::move(data)) {}
  void raw(void* p, std::size_t n) {
    if (pos_ + n > data_.size()) throw CorruptFile("weights file is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  float f32() {
    float v;
    raw(&v, sizeof v);
    return v;
  }
  std::vector<unsigned char> rest() const { return {data_.begin() + static_cast<long>(pos_), data_.end()}; }

 private:
  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_weights(const NetworkWeights<float>& w, const NetworkSpec& spec, const std::filesystem::path& path,
                  const std::vector<unsigned char>& trailer) {
  spec.validate();
  detail::check_shapes(w, spec);
  Writer out;
  out.raw(kMagic.data(), kMagic.size());
  out.u32(kVersion);
  out.u32(static_cast<std::uint32_t>(spec.widths.size()));
  for (int width : spec.widths) out.u32(static_cast<std::uint32_t>(width));
  out.f32(spec.dropout);
  for (int l = 0; l < spec.layers(); ++l) {
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = w.weight[l];
    out.raw(row_major.data(), sizeof(float) * static_cast<std::size_t>(row_major.size()));
    out.raw(w.bias[l].data(), sizeof(float) * static_cast<std::size_t>(w.bias[l].size()));
  }
  out.raw(trailer.data(), trailer.size());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.bytes.data()), static_cast<std::streamsize>(out.bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

LoadedNetwork load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader in(std::move(data));

  std::array<char, 4> magic{};
  in.raw(magic.data(), magic.size());
  if (magic != kMagic) throw CorruptFile("bad weights magic in " + path.string());
  if (in.u32() != kVersion) throw CorruptFile("unsupported weights version");
  const std::uint32_t count = in.u32();
  if (count < 2 || count > 64) throw CorruptFile("implausible layer count");

  LoadedNetwork net;
  net.spec.widths.clear();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t width = in.u32();
    if (width == 0 || width > (1u << 16)) throw CorruptFile("implausible layer width");
    net.spec.widths.push_back(static_cast<int>(width));
  }
  net.spec.dropout = in.f32();
  try {
    net.spec.validate();
  } catch (const InvalidArgument& e) {
    throw CorruptFile(std::string("bad network header: ") + e.what());
  }
  net.weights = NetworkWeights<float>::zeros(net.spec);
  for (int l = 0; l < net.spec.layers(); ++l) {
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major(net.spec.widths[l + 1],
                                                                                   net.spec.widths[l]);
    in.raw(row_major.data(), sizeof(float) * static_cast<std::size_t>(row_major.size()));
    net.weights.weight[l] = row_major;
    in.raw(net.weights.bias[l].data(), sizeof(float) * static_cast<std::size_t>(net.weights.bias[l].size()));
  }
  net.trailer = in.rest();
  return net;
}

}  // namespace pixelmpc
