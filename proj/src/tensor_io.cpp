#include "lfg/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <unistd.h>

namespace lfg {

namespace fs = std::filesystem;

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return 4;
    case DType::kUInt8: return 1;
    case DType::kInt32: return 4;
  }
  return 0;
}

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "float32";
    case DType::kUInt8: return "uint8";
    case DType::kInt32: return "int32";
  }
  return "unknown";
}

namespace {

std::size_t checked_product(const std::vector<std::uint64_t>& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint32_t>::max() / d) {
      fail(ErrorCode::kInvalidArgument, "tensor element count overflows");
    }
    n *= d;
  }
  return static_cast<std::size_t>(n);
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::ostringstream s;
  s << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s << (i ? ", " : "") << shape[i];
  s << "]";
  return s.str();
}

template <typename T>
void check_count(const std::vector<std::uint64_t>& shape, const std::vector<T>& values) {
  require(shape.size() <= kMaxTensorRank, ErrorCode::kInvalidArgument, "tensor rank exceeds 8");
  require(checked_product(shape) == values.size(), ErrorCode::kShapeMismatch,
          "tensor shape " + shape_string(shape) + " does not match " +
              std::to_string(values.size()) + " values");
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    require(bytes_.size() - pos_ >= n, ErrorCode::kTruncated,
            std::string("tensor truncated while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::to_integer<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::span<const std::byte> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t load_u32(const std::byte* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

Tensor::Tensor(std::vector<std::uint64_t> shape, std::vector<float> values)
    : shape_(std::move(shape)), storage_(std::move(values)) {
  check_count(shape_, std::get<std::vector<float>>(storage_));
}
Tensor::Tensor(std::vector<std::uint64_t> shape, std::vector<std::uint8_t> values)
    : shape_(std::move(shape)), storage_(std::move(values)) {
  check_count(shape_, std::get<std::vector<std::uint8_t>>(storage_));
}
Tensor::Tensor(std::vector<std::uint64_t> shape, std::vector<std::int32_t> values)
    : shape_(std::move(shape)), storage_(std::move(values)) {
  check_count(shape_, std::get<std::vector<std::int32_t>>(storage_));
}

DType Tensor::dtype() const noexcept {
  switch (storage_.index()) {
    case 0: return DType::kFloat32;
    case 1: return DType::kUInt8;
    default: return DType::kInt32;
  }
}

std::size_t Tensor::element_count() const { return checked_product(shape_); }

std::vector<std::byte> encode_tensor(const Tensor& tensor) {
  std::vector<std::byte> out;
  const std::size_t n = tensor.element_count();
  out.reserve(16 + 8 * tensor.shape().size() + n * dtype_size(tensor.dtype()));
  for (char c : kTensorMagic) out.push_back(static_cast<std::byte>(c));
  put_u32(out, kTensorFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(tensor.dtype()));
  put_u32(out, static_cast<std::uint32_t>(tensor.shape().size()));
  for (auto d : tensor.shape()) put_u64(out, d);
  std::visit(
      [&out](const auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        for (const T& v : values) {
          if constexpr (std::is_same_v<T, std::uint8_t>) {
            out.push_back(static_cast<std::byte>(v));
          } else {
            put_u32(out, std::bit_cast<std::uint32_t>(v));
          }
        }
      },
      tensor.storage());
  return out;
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4, "magic");
  require(std::memcmp(magic.data(), kTensorMagic, 4) == 0, ErrorCode::kBadMagic,
          "tensor magic is not \"LFGT\"");
  const std::uint32_t version = r.u32("version");
  require(version == kTensorFormatVersion, ErrorCode::kUnsupportedVersion,
          "unsupported tensor format version " + std::to_string(version));
  const std::uint32_t code = r.u32("dtype");
  require(code >= 1 && code <= 3, ErrorCode::kBadDtypeCode,
          "unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::uint32_t ndim = r.u32("ndim");
  require(ndim <= kMaxTensorRank, ErrorCode::kInvalidArgument,
          "tensor rank " + std::to_string(ndim) + " exceeds 8");
  std::vector<std::uint64_t> shape(ndim);
  for (auto& d : shape) d = r.u64("shape");
  // Anything larger than the bytes on hand is truncated, which also covers
  // shapes whose element count would overflow.
  const bool empty = std::find(shape.begin(), shape.end(), 0u) != shape.end();
  std::uint64_t n = empty ? 0 : 1;
  for (auto d : shape) {
    if (empty) break;
    require(n <= r.remaining() / d, ErrorCode::kTruncated,
            "tensor shape " + shape_string(shape) + " exceeds the " + std::to_string(r.remaining()) +
                " payload bytes present");
    n *= d;
  }
  const std::size_t payload = n * dtype_size(dtype);
  require(r.remaining() >= payload, ErrorCode::kTruncated,
          "tensor payload truncated: expected " + std::to_string(payload) + " bytes, found " +
              std::to_string(r.remaining()));
  require(r.remaining() == payload, ErrorCode::kTrailingData,
          std::to_string(r.remaining() - payload) + " unexpected bytes after tensor payload");
  const auto data = r.take(payload, "payload");

  switch (dtype) {
    case DType::kFloat32: {
      std::vector<float> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(load_u32(&data[4 * i]));
      return Tensor(std::move(shape), std::move(v));
    }
    case DType::kUInt8: {
      std::vector<std::uint8_t> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = std::to_integer<std::uint8_t>(data[i]);
      return Tensor(std::move(shape), std::move(v));
    }
    case DType::kInt32: {
      std::vector<std::int32_t> v(n);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::bit_cast<std::int32_t>(load_u32(&data[4 * i]));
      }
      return Tensor(std::move(shape), std::move(v));
    }
  }
  fail(ErrorCode::kBadDtypeCode, "unknown dtype");
}

void write_file_atomic(const fs::path& path, std::span<const std::byte> bytes) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      fail(ErrorCode::kIo, "write failed for " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::kIo, "cannot move output into place at " + path.string());
  }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::vector<std::byte> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  require(static_cast<bool>(in) || size == 0, ErrorCode::kIo, "read failed for " + path.string());
  return bytes;
}

void write_tensor(const Tensor& tensor, const fs::path& path) {
  write_file_atomic(path, encode_tensor(tensor));
}

Tensor read_tensor(const fs::path& path) {
  try {
    return decode_tensor(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Tensor read_tensor(const fs::path& path, DType expected, std::optional<std::size_t> expected_rank) {
  Tensor t = read_tensor(path);
  require(t.dtype() == expected, ErrorCode::kDtypeMismatch,
          path.string() + ": expected " + std::string(dtype_name(expected)) + ", found " +
              std::string(dtype_name(t.dtype())));
  if (expected_rank) {
    require(t.shape().size() == *expected_rank, ErrorCode::kShapeMismatch,
            path.string() + ": expected rank " + std::to_string(*expected_rank) + ", found " +
                std::to_string(t.shape().size()));
  }
  return t;
}

namespace {

void expect_shape(const Tensor& t, std::size_t rank, std::optional<std::uint64_t> last,
                  const char* what) {
  bool ok = t.shape().size() == rank;
  if (ok && last) ok = t.shape().back() == *last;
  require(ok, ErrorCode::kShapeMismatch,
          std::string(what) + " tensor has shape " + shape_string(t.shape()));
}

int dim(const Tensor& t, std::size_t i) {
  require(t.shape()[i] <= static_cast<std::uint64_t>(std::numeric_limits<int>::max()),
          ErrorCode::kShapeMismatch, "tensor dimension too large");
  return static_cast<int>(t.shape()[i]);
}

std::vector<std::uint64_t> hw(int h, int w) {
  return {static_cast<std::uint64_t>(h), static_cast<std::uint64_t>(w)};
}

}  // namespace

Tensor to_tensor(const PointMap& pm) {
  std::vector<float> v(static_cast<std::size_t>(pm.height()) * pm.width() * 3);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (int y = 0; y < pm.height(); ++y) {
    for (int x = 0; x < pm.width(); ++x) {
      for (int k = 0; k < 3; ++k) {
        v[pm.points().index(y, x, k)] =
            pm.valid(y, x) ? static_cast<float>(pm.points()(y, x, k)) : nan;
      }
    }
  }
  auto shape = hw(pm.height(), pm.width());
  shape.push_back(3);
  return Tensor(std::move(shape), std::move(v));
}

PointMap point_map_from_tensor(const Tensor& t) {
  expect_shape(t, 3, 3, "point map");
  const auto& v = t.values<float>();
  PointMap pm(dim(t, 0), dim(t, 1));
  for (int y = 0; y < pm.height(); ++y) {
    for (int x = 0; x < pm.width(); ++x) {
      bool finite = true;
      for (int k = 0; k < 3; ++k) {
        const float f = v[pm.points().index(y, x, k)];
        finite = finite && std::isfinite(f);
        pm.points()(y, x, k) = f;
      }
      pm.set_valid(y, x, finite);
      if (!finite) pm.set_point(y, x, Eigen::Vector3d::Zero());
    }
  }
  return pm;
}

Tensor to_tensor(const Pose& pose) {
  const Eigen::Matrix4d m = pose.matrix();
  std::vector<float> v(16);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) v[4 * r + c] = static_cast<float>(m(r, c));
  }
  return Tensor({4, 4}, std::move(v));
}

Pose pose_from_tensor(const Tensor& t) {
  expect_shape(t, 2, 4, "pose");
  require(t.shape()[0] == 4, ErrorCode::kShapeMismatch, "pose tensor must be 4x4");
  const auto& v = t.values<float>();
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m(r, c) = v[4 * r + c];
  }
  require(m.allFinite(), ErrorCode::kNonFinite, "pose tensor has non-finite entries");
  require((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= 1e-6,
          ErrorCode::kInvalidArgument, "pose bottom row must be (0, 0, 0, 1)");
  // float32 storage only guarantees orthonormality to ~1e-7 per entry; accept
  // within 1e-5 and snap back onto SO(3).
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  const double ortho_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  require(ortho_err <= 1e-5 && std::abs(r.determinant() - 1.0) <= 1e-5, ErrorCode::kNotOrthonormal,
          "pose rotation block is not a rotation");
  Pose p;
  p.rotation = project_to_rotation(r);
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

Tensor to_tensor(const ScalarMap& map) {
  require(map.channels() == 1, ErrorCode::kShapeMismatch, "scalar map must be single-channel");
  std::vector<float> v(map.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(map.data()[i]);
  return Tensor(hw(map.height(), map.width()), std::move(v));
}

ScalarMap scalar_map_from_tensor(const Tensor& t) {
  expect_shape(t, 2, std::nullopt, "scalar map");
  const auto& v = t.values<float>();
  ScalarMap map(dim(t, 0), dim(t, 1));
  for (std::size_t i = 0; i < v.size(); ++i) map.data()[i] = v[i];
  return map;
}

SemanticMap semantic_map_from_tensor(const Tensor& t) {
  expect_shape(t, 3, kNumClasses, "semantic map");
  const auto& v = t.values<float>();
  SemanticMap map(dim(t, 0), dim(t, 1), kNumClasses);
  for (std::size_t i = 0; i < v.size(); ++i) map.data()[i] = v[i];
  return map;
}

Tensor mask_to_tensor(const Mask& mask) {
  std::vector<std::uint8_t> v(mask.data().begin(), mask.data().end());
  for (auto& b : v) b = b ? 1 : 0;
  return Tensor(hw(mask.height(), mask.width()), std::move(v));
}

Mask mask_from_tensor(const Tensor& t) {
  expect_shape(t, 2, std::nullopt, "mask");
  const auto& v = t.values<std::uint8_t>();
  Mask m(dim(t, 0), dim(t, 1));
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(v[i] <= 1, ErrorCode::kOutOfDomain, "mask values must be 0 or 1");
    m.data()[i] = v[i];
  }
  return m;
}

Tensor to_tensor(const LabelMap& labels) {
  return Tensor(hw(labels.height(), labels.width()), labels.grid().data());
}

LabelMap label_map_from_tensor(const Tensor& t) {
  expect_shape(t, 2, std::nullopt, "label map");
  Grid<std::uint8_t> g(dim(t, 0), dim(t, 1));
  if (t.dtype() == DType::kInt32) {
    const auto& v = t.values<std::int32_t>();
    for (std::size_t i = 0; i < v.size(); ++i) {
      require(v[i] >= 0 && v[i] < kNumClasses, ErrorCode::kOutOfDomain,
              "label index " + std::to_string(v[i]) + " outside [0, 7)");
      g.data()[i] = static_cast<std::uint8_t>(v[i]);
    }
  } else {
    g.data() = t.values<std::uint8_t>();
  }
  return LabelMap(std::move(g));
}

Tensor to_tensor(const DepthMap& depth) {
  std::vector<float> v(depth.depth.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = depth.valid.data()[i] ? static_cast<float>(depth.depth.data()[i])
                                 : std::numeric_limits<float>::quiet_NaN();
  }
  return Tensor(hw(depth.height(), depth.width()), std::move(v));
}

DepthMap depth_map_from_tensor(const Tensor& t) {
  expect_shape(t, 2, std::nullopt, "depth map");
  const auto& v = t.values<float>();
  DepthMap d(dim(t, 0), dim(t, 1));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool ok = std::isfinite(v[i]) && v[i] > 0.0f;
    d.valid.data()[i] = ok ? 1 : 0;
    d.depth.data()[i] = ok ? v[i] : 0.0;
  }
  return d;
}

}  // namespace lfg
