#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lfg/eval_metrics.hpp"
#include "lfg/geometry.hpp"
#include "lfg/grid.hpp"

namespace lfg {

// Container layout, all integers little-endian:
//   "LFGT" | u32 version | u32 dtype | u32 ndim | u64 shape[ndim] | payload
inline constexpr char kTensorMagic[4] = {'L', 'F', 'G', 'T'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::uint32_t kMaxTensorRank = 8;

enum class DType : std::uint32_t { kFloat32 = 1, kUInt8 = 2, kInt32 = 3 };

std::size_t dtype_size(DType dtype);
std::string_view dtype_name(DType dtype);

class Tensor {
 public:
  using Storage = std::variant<std::vector<float>, std::vector<std::uint8_t>,
                               std::vector<std::int32_t>>;

  Tensor() = default;
  Tensor(std::vector<std::uint64_t> shape, std::vector<float> values);
  Tensor(std::vector<std::uint64_t> shape, std::vector<std::uint8_t> values);
  Tensor(std::vector<std::uint64_t> shape, std::vector<std::int32_t> values);

  DType dtype() const noexcept;
  const std::vector<std::uint64_t>& shape() const noexcept { return shape_; }
  std::size_t element_count() const;

  template <typename T>
  const std::vector<T>& values() const {
    const auto* v = std::get_if<std::vector<T>>(&storage_);
    require(v != nullptr, ErrorCode::kDtypeMismatch, "tensor holds " +
                                                         std::string(dtype_name(dtype())));
    return *v;
  }

  const Storage& storage() const noexcept { return storage_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::uint64_t> shape_;
  Storage storage_ = std::vector<float>{};
};

std::vector<std::byte> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::byte> bytes);

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed write never leaves a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::byte> read_file(const std::filesystem::path& path);

void write_tensor(const Tensor& tensor, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);
/// Reads and checks dtype and (optionally) rank against the caller's expectation.
Tensor read_tensor(const std::filesystem::path& path, DType expected,
                   std::optional<std::size_t> expected_rank = std::nullopt);

// Domain conversions. Point maps and depth maps mark invalid pixels with NaN
// (depth additionally treats non-positive values as invalid).
Tensor to_tensor(const PointMap& pm);
PointMap point_map_from_tensor(const Tensor& t);
Tensor to_tensor(const Pose& pose);
Pose pose_from_tensor(const Tensor& t);
Tensor to_tensor(const ScalarMap& map);
ScalarMap scalar_map_from_tensor(const Tensor& t);
SemanticMap semantic_map_from_tensor(const Tensor& t);
Tensor mask_to_tensor(const Mask& mask);
Mask mask_from_tensor(const Tensor& t);
Tensor to_tensor(const LabelMap& labels);
LabelMap label_map_from_tensor(const Tensor& t);
Tensor to_tensor(const DepthMap& depth);
DepthMap depth_map_from_tensor(const Tensor& t);

}  // namespace lfg
