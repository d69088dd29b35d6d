#include "mvseg/golden_io.hpp"

#include "mvseg/errors.hpp"

#include <bit>
#include <cstring>

namespace mvseg {

namespace {

constexpr char kViewMagic[4] = {'G', 'F', 'V', 'W'};
constexpr char kBlockMagic[4] = {'G', 'F', 'T', 'B'};
constexpr std::size_t kViewHeader = 17;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out.push_back(std::byte(v)); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(std::byte((v >> s) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) out.push_back(std::byte((v >> s) & 0xff));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::byte> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw MalformedInput("truncated binary file");
  }
  std::uint8_t u8() {
    need(1);
    return std::to_integer<std::uint8_t>(buf[pos++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) v |= std::uint32_t(std::to_integer<std::uint8_t>(buf[pos++])) << s;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int s = 0; s < 64; s += 8) v |= std::uint64_t(std::to_integer<std::uint8_t>(buf[pos++])) << s;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::byte> take(std::size_t n) {
    need(n);
    auto s = buf.subspan(pos, n);
    pos += n;
    return s;
  }
  std::size_t remaining() const { return buf.size() - pos; }

  std::span<const std::byte> buf;
  std::size_t pos = 0;
};

DType checked_dtype(std::uint8_t raw) {
  if (raw > 2) throw MalformedInput("unknown dtype code " + std::to_string(raw));
  return static_cast<DType>(raw);
}

void write_header(Writer& w, std::uint32_t h, std::uint32_t wd, std::uint32_t c, DType t) {
  w.bytes(kViewMagic, 4);
  w.u32(h);
  w.u32(wd);
  w.u32(c);
  w.u8(static_cast<std::uint8_t>(t));
}

void write_plane(Writer& w, const IndexRaster* plane, Eigen::Index h, Eigen::Index wd) {
  if (!plane) return;
  if (plane->rows() != h || plane->cols() != wd) throw ShapeMismatch("index plane shape differs from the view");
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < wd; ++j) w.i32((*plane)(i, j));
}

template <typename Scalar>
FeatureMap<Scalar> decode_values(const ViewFile& f) {
  FeatureMap<Scalar> m(static_cast<int>(f.height), static_cast<int>(f.width), static_cast<int>(f.channels));
  Reader r(f.values);
  for (Eigen::Index k = 0; k < m.data.size(); ++k) {
    const double v = f.dtype == DType::F32 ? r.f32() : f.dtype == DType::F64 ? r.f64() : r.i32();
    m.data.data()[k] = static_cast<Scalar>(v);
  }
  return m;
}

const Tensor& block(const TensorBlocks& blocks, const std::string& name) {
  const auto it = blocks.find(name);
  if (it == blocks.end()) throw ConfigError("parameter file lacks block '" + name + "'");
  return it->second;
}

template <typename Scalar>
Tensor to_tensor(const Eigen::Ref<const RowMatrix<Scalar>>& m) {
  Tensor t;
  t.dtype = std::is_same_v<Scalar, float> ? DType::F32 : DType::F64;
  t.shape = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.values.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.values[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return t;
}

template <typename Scalar>
Tensor vector_tensor(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
  Tensor t;
  t.dtype = std::is_same_v<Scalar, float> ? DType::F32 : DType::F64;
  t.shape = {static_cast<std::uint32_t>(v.size())};
  t.values.assign(v.data(), v.data() + v.size());
  return t;
}

Tensor scalar_tensor(double v) {
  Tensor t;
  t.shape = {1};
  t.values = {v};
  return t;
}

template <typename Scalar>
RowMatrix<Scalar> to_matrix(const Tensor& t, const std::string& name) {
  if (t.shape.size() != 2) throw ShapeMismatch("block '" + name + "' must be two-dimensional");
  RowMatrix<Scalar> m(t.shape[0], t.shape[1]);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<Scalar>(t.values[static_cast<std::size_t>(k)]);
  return m;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> to_vector(const Tensor& t) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(static_cast<Eigen::Index>(t.values.size()));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = static_cast<Scalar>(t.values[static_cast<std::size_t>(k)]);
  return v;
}

double to_scalar(const Tensor& t, const std::string& name) {
  if (t.values.size() != 1) throw ShapeMismatch("block '" + name + "' must hold one value");
  return t.values.front();
}

template <typename Scalar>
void put_conv(TensorBlocks& b, const std::string& p, const ConvBn<Scalar>& c) {
  b[p + ".weight"] = to_tensor<Scalar>(c.weight);
  b[p + ".bn_gamma"] = vector_tensor<Scalar>(c.gamma);
  b[p + ".bn_beta"] = vector_tensor<Scalar>(c.beta);
  b[p + ".bn_mean"] = vector_tensor<Scalar>(c.mean);
  b[p + ".bn_var"] = vector_tensor<Scalar>(c.var);
  b[p + ".bn_eps"] = scalar_tensor(static_cast<double>(c.eps));
  b[p + ".kernel"] = scalar_tensor(c.kernel);
}

template <typename Scalar>
ConvBn<Scalar> get_conv(const TensorBlocks& b, const std::string& p) {
  ConvBn<Scalar> c;
  c.kernel = static_cast<int>(to_scalar(block(b, p + ".kernel"), p + ".kernel"));
  c.weight = to_matrix<Scalar>(block(b, p + ".weight"), p + ".weight");
  c.gamma = to_vector<Scalar>(block(b, p + ".bn_gamma"));
  c.beta = to_vector<Scalar>(block(b, p + ".bn_beta"));
  c.mean = to_vector<Scalar>(block(b, p + ".bn_mean"));
  c.var = to_vector<Scalar>(block(b, p + ".bn_var"));
  c.eps = static_cast<Scalar>(to_scalar(block(b, p + ".bn_eps"), p + ".bn_eps"));
  return c;
}

}  // namespace

std::size_t dtype_size(DType t) { return t == DType::F64 ? 8 : 4; }

FeatureMap<float> ViewFile::as_f32() const { return decode_values<float>(*this); }
FeatureMap<double> ViewFile::as_f64() const { return decode_values<double>(*this); }

RowMatrix<std::int32_t> ViewFile::as_i32() const {
  if (dtype != DType::I32) throw MalformedInput("view raster is not an integer raster");
  RowMatrix<std::int32_t> m(Eigen::Index(height) * width, channels);
  Reader r(values);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = r.i32();
  return m;
}

std::vector<std::byte> encode_view(const FeatureMap<float>& map, const IndexRaster* index_plane) {
  Writer w;
  write_header(w, map.height, map.width, map.channels(), DType::F32);
  for (Eigen::Index k = 0; k < map.data.size(); ++k) w.f32(map.data.data()[k]);
  write_plane(w, index_plane, map.height, map.width);
  return std::move(w.out);
}

std::vector<std::byte> encode_view(const FeatureMap<double>& map, const IndexRaster* index_plane) {
  Writer w;
  write_header(w, map.height, map.width, map.channels(), DType::F64);
  for (Eigen::Index k = 0; k < map.data.size(); ++k) w.f64(map.data.data()[k]);
  write_plane(w, index_plane, map.height, map.width);
  return std::move(w.out);
}

std::vector<std::byte> encode_view_i32(std::uint32_t height, std::uint32_t width, const RowMatrix<std::int32_t>& data) {
  if (data.rows() != Eigen::Index(height) * width) throw_shape("i32 raster rows", Eigen::Index(height) * width, data.rows());
  Writer w;
  write_header(w, height, width, static_cast<std::uint32_t>(data.cols()), DType::I32);
  for (Eigen::Index k = 0; k < data.size(); ++k) w.i32(data.data()[k]);
  return std::move(w.out);
}

ViewFile decode_view(std::span<const std::byte> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kViewMagic, 4) != 0) throw MalformedInput("not a view raster (bad magic)");
  ViewFile f;
  f.height = r.u32();
  f.width = r.u32();
  f.channels = r.u32();
  f.dtype = checked_dtype(r.u8());
  const std::size_t pixels = std::size_t(f.height) * f.width;
  const std::size_t value_bytes = pixels * f.channels * dtype_size(f.dtype);
  const auto values = r.take(value_bytes);
  f.values.assign(values.begin(), values.end());
  if (r.remaining() == pixels * 4 && pixels > 0) {
    IndexRaster plane(f.height, f.width);
    for (Eigen::Index k = 0; k < plane.size(); ++k) plane.data()[k] = r.i32();
    f.index_plane = std::move(plane);
  } else if (r.remaining() != 0) {
    throw MalformedInput("view raster has " + std::to_string(r.remaining()) + " trailing bytes");
  }
  (void)kViewHeader;
  return f;
}

std::vector<std::byte> encode_correspondence(const Correspondence& c) {
  return encode_view_i32(c.target_height, c.target_width, c.coords);
}

Correspondence decode_correspondence(std::span<const std::byte> bytes, int source_height, int source_width) {
  const ViewFile f = decode_view(bytes);
  if (f.dtype != DType::I32 || f.channels != 2) throw MalformedInput("correspondence must be a two-plane i32 raster");
  Correspondence c(static_cast<int>(f.height), static_cast<int>(f.width), source_height, source_width);
  c.coords = f.as_i32();
  c.check();
  return c;
}

std::vector<std::byte> encode_blocks(const TensorBlocks& blocks) {
  Writer w;
  w.bytes(kBlockMagic, 4);
  w.u32(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, t] : blocks) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.dtype));
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    std::size_t count = 1;
    for (auto d : t.shape) {
      w.u32(d);
      count *= d;
    }
    if (count != t.values.size()) throw ShapeMismatch("tensor '" + name + "' shape does not match its values");
    for (double v : t.values) {
      if (t.dtype == DType::F32) w.f32(static_cast<float>(v));
      else if (t.dtype == DType::F64) w.f64(v);
      else w.i32(static_cast<std::int32_t>(v));
    }
  }
  return std::move(w.out);
}

TensorBlocks decode_blocks(std::span<const std::byte> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kBlockMagic, 4) != 0) throw MalformedInput("not a tensor block file (bad magic)");
  TensorBlocks blocks;
  const auto count = r.u32();
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto len = r.u32();
    const auto name_bytes = r.take(len);
    std::string name(reinterpret_cast<const char*>(name_bytes.data()), len);
    Tensor t;
    t.dtype = checked_dtype(r.u8());
    const auto ndim = r.u32();
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(r.u32());
      n *= t.shape.back();
    }
    r.need(n * dtype_size(t.dtype));
    t.values.resize(n);
    for (auto& v : t.values) v = t.dtype == DType::F32 ? r.f32() : t.dtype == DType::F64 ? r.f64() : r.i32();
    blocks.emplace(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) throw MalformedInput("tensor block file has trailing bytes");
  return blocks;
}

template <typename Scalar>
void put_attention(TensorBlocks& blocks, const std::string& prefix, const AttentionParams<Scalar>& p) {
  put_conv(blocks, prefix + ".mu", p.mu);
  put_conv(blocks, prefix + ".theta", p.theta);
  blocks[prefix + ".gate"] = scalar_tensor(p.gate == AttentionGate::Softmax ? 0.0 : 1.0);
}

template <typename Scalar>
AttentionParams<Scalar> get_attention(const TensorBlocks& blocks, const std::string& prefix) {
  AttentionParams<Scalar> p;
  p.mu = get_conv<Scalar>(blocks, prefix + ".mu");
  p.theta = get_conv<Scalar>(blocks, prefix + ".theta");
  if (blocks.count(prefix + ".gate"))
    p.gate = to_scalar(block(blocks, prefix + ".gate"), prefix + ".gate") == 0.0 ? AttentionGate::Softmax
                                                                                  : AttentionGate::Sigmoid;
  p.check();
  return p;
}

template void put_attention<float>(TensorBlocks&, const std::string&, const AttentionParams<float>&);
template void put_attention<double>(TensorBlocks&, const std::string&, const AttentionParams<double>&);
template AttentionParams<float> get_attention<float>(const TensorBlocks&, const std::string&);
template AttentionParams<double> get_attention<double>(const TensorBlocks&, const std::string&);

void put_kpconv(TensorBlocks& blocks, const std::string& prefix, const KpconvParams& p) {
  p.check();
  blocks[prefix + ".kernel_points"] = to_tensor<double>(p.kernel_points);
  for (std::size_t k = 0; k < p.weights.size(); ++k)
    blocks[prefix + ".weight." + std::to_string(k)] = to_tensor<double>(p.weights[k]);
  blocks[prefix + ".sigma"] = scalar_tensor(p.sigma);
  blocks[prefix + ".radius"] = scalar_tensor(p.radius);
}

KpconvParams get_kpconv(const TensorBlocks& blocks, const std::string& prefix) {
  KpconvParams p;
  const auto pts = to_matrix<double>(block(blocks, prefix + ".kernel_points"), prefix + ".kernel_points");
  if (pts.cols() != 3) throw ShapeMismatch("kernel points must be K x 3");
  p.kernel_points = pts;
  for (Eigen::Index k = 0; k < pts.rows(); ++k) {
    const auto name = prefix + ".weight." + std::to_string(k);
    p.weights.push_back(to_matrix<double>(block(blocks, name), name));
  }
  p.sigma = to_scalar(block(blocks, prefix + ".sigma"), prefix + ".sigma");
  p.radius = to_scalar(block(blocks, prefix + ".radius"), prefix + ".radius");
  p.check();
  return p;
}

}  // namespace mvseg
