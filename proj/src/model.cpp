#include "lqe/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lqe/error.hpp"

namespace lqe {

namespace {

// Sanity bound on dimensions read from a stream before allocating.
constexpr std::uint32_t kMaxDimension = 1u << 20;

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) { raw(to_little_endian(v)); }
  void f64(double v) { raw(to_little_endian(std::bit_cast<std::uint64_t>(v))); }
  void row_major(const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  void vec(const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }

 private:
  template <typename T>
  void raw(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint32_t u32() { return to_little_endian(raw<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(to_little_endian(raw<std::uint64_t>())); }
  void row_major(Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
    }
  }
  void vec(Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
  }
  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw FormatError("model stream is truncated");
    }
  }

 private:
  template <typename T>
  T raw() {
    T v{};
    bytes(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
  }
  std::istream& in_;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > kMaxDimension) throw ValidationError(std::string("model ") + what + " is too large");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void PreprocessConfig::validate() const {
  smoothing_factor(tau);
  if (window == 0) throw ValidationError("window size must be >= 1");
  if (split.total() == 0) throw ValidationError("split ratio must have a positive part");
}

void save_model(std::ostream& out, const LqeModel& model) {
  const auto& p = model.params;
  const auto n = model.feature_count();
  if (model.standardizer.sd.size() != 2 * n || n == 0) {
    throw ValidationError("save_model: standardizer is malformed");
  }
  if (p.input_size() != 2 * n) {
    throw ValidationError("save_model: network input size does not match the standardizer");
  }

  Writer w(out);
  out.write(kModelMagic, sizeof(kModelMagic));
  w.u32(kModelFormatVersion);
  w.u32(checked_u32(n, "feature count"));
  w.u32(checked_u32(p.hidden_size(), "hidden size"));
  w.u32(checked_u32(p.layer_count(), "layer count"));
  w.u32(checked_u32(model.config.window, "window"));
  w.f64(model.config.tau);
  w.u32(model.config.split.train);
  w.u32(model.config.split.validation);
  w.u32(model.config.split.test);
  w.u32(checked_u32(2 * n, "channel count"));
  for (double v : model.standardizer.mean) w.f64(v);
  for (double v : model.standardizer.sd) w.f64(v);
  for (const auto& layer : p.layers) {
    w.row_major(layer.w_input);
    w.row_major(layer.w_recurrent);
    w.vec(layer.bias);
  }
  w.row_major(p.head_weight);
  w.vec(p.head_bias);
  if (!out) throw IoError("failed to write model stream");
}

void save_model(const std::string& path, const LqeModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_model(out, model);
}

LqeModel load_model(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw FormatError("not a model file: bad magic tag");
  }
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version) +
                      " (expected " + std::to_string(kModelFormatVersion) + ")");
  }

  const auto n = r.u32();
  const auto hidden = r.u32();
  const auto layers = r.u32();
  const auto window = r.u32();
  for (auto d : {n, hidden, layers, window}) {
    if (d == 0 || d > kMaxDimension) throw FormatError("model stream has invalid dimensions");
  }

  LqeModel model;
  model.config.window = window;
  model.config.tau = r.f64();
  model.config.split.train = r.u32();
  model.config.split.validation = r.u32();
  model.config.split.test = r.u32();
  try {
    model.config.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("model stream has invalid preprocessing config: ") + e.what());
  }

  const auto channels = r.u32();
  if (channels != 2 * n) throw FormatError("model stream channel count disagrees with features");
  model.standardizer.mean.resize(channels);
  model.standardizer.sd.resize(channels);
  for (auto& v : model.standardizer.mean) v = r.f64();
  for (auto& v : model.standardizer.sd) v = r.f64();
  for (double v : model.standardizer.sd) {
    if (!(v > 0.0) || !std::isfinite(v)) throw FormatError("model stream has a non-positive SD");
  }

  model.params = LstmParams::zeros(2 * n, hidden, layers);
  for (auto& layer : model.params.layers) {
    r.row_major(layer.w_input);
    r.row_major(layer.w_recurrent);
    r.vec(layer.bias);
  }
  r.row_major(model.params.head_weight);
  r.vec(model.params.head_bias);
  return model;
}

LqeModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace lqe
