#pragma once

// Space-filling-curve ordering of point clouds. Points are quantized onto an
// integer grid over the cloud's bounding box, encoded with a Z-order or
// Hilbert curve, and sorted by code (stable in the original index).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hoil/core.hpp"

namespace hoil {

enum class CurveVariant { ZOrder, Hilbert };

struct CurveKind {
  CurveVariant variant = CurveVariant::Hilbert;
  int bit_depth = 16;  // bits per axis; 3*bit_depth must fit in 64 bits
};

struct SerializationResult {
  std::vector<std::size_t> permutation;  // bijection on [0,N)
  std::vector<uint64_t> codes;           // per original point index
};

inline void check_bit_depth(int bit_depth) {
  if (bit_depth < 1 || bit_depth > 21)
    throw std::invalid_argument("bit_depth must be in [1,21], got " + std::to_string(bit_depth));
}

/// Maps each axis affinely from the cloud bounding box to [0, 2^bit_depth-1],
/// rounding by floor. Axes with zero extent map to 0.
inline std::vector<std::array<uint32_t, 3>> quantize(const PointCloud& cloud, int bit_depth) {
  check_bit_depth(bit_depth);
  if (cloud.size() == 0) throw std::invalid_argument("quantize: empty cloud");
  Vec3 lo = cloud.coords[0], hi = cloud.coords[0];
  for (const auto& p : cloud.coords) {
    if (!finite(p)) throw std::invalid_argument("quantize: non-finite coordinate");
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const uint32_t top = (1u << bit_depth) - 1u;
  Vec3 scale;
  for (int a = 0; a < 3; ++a) {
    const double extent = hi[a] - lo[a];
    scale[a] = extent > 0.0 ? static_cast<double>(top) / extent : 0.0;
  }
  std::vector<std::array<uint32_t, 3>> grid(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double v = std::floor(scale[a] * (cloud.coords[i][a] - lo[a]));
      grid[i][a] = static_cast<uint32_t>(std::min(v, static_cast<double>(top)));
    }
  }
  return grid;
}

/// Interleaves the bits of (ix, iy, iz); x occupies the least-significant
/// position of each bit triple.
inline uint64_t morton_encode(uint32_t ix, uint32_t iy, uint32_t iz, int bit_depth) {
  check_bit_depth(bit_depth);
  const uint32_t limit = bit_depth >= 32 ? ~0u : (1u << bit_depth);
  if (ix >= limit || iy >= limit || iz >= limit)
    throw std::invalid_argument("morton_encode: coordinate exceeds 2^bit_depth");
  uint64_t code = 0;
  for (int b = 0; b < bit_depth; ++b) {
    code |= static_cast<uint64_t>((ix >> b) & 1u) << (3 * b);
    code |= static_cast<uint64_t>((iy >> b) & 1u) << (3 * b + 1);
    code |= static_cast<uint64_t>((iz >> b) & 1u) << (3 * b + 2);
  }
  return code;
}

namespace detail {

// Skilling's transposed-form Hilbert transform ("Programming the Hilbert
// curve", AIP Conf. Proc. 707). The transposed form stores the curve index
// bit-interleaved across the axis words, X[0] most significant.
inline void axes_to_transpose(std::array<uint32_t, 3>& x, int bits) {
  uint32_t m = 1u << (bits - 1);
  for (uint32_t q = m; q > 1; q >>= 1) {
    const uint32_t p = q - 1;
    for (int i = 0; i < 3; ++i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        const uint32_t t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  for (int i = 1; i < 3; ++i) x[i] ^= x[i - 1];
  uint32_t t = 0;
  for (uint32_t q = m; q > 1; q >>= 1)
    if (x[2] & q) t ^= q - 1;
  for (int i = 0; i < 3; ++i) x[i] ^= t;
}

inline void transpose_to_axes(std::array<uint32_t, 3>& x, int bits) {
  const uint32_t n = 2u << (bits - 1);
  uint32_t t = x[2] >> 1;
  for (int i = 2; i > 0; --i) x[i] ^= x[i - 1];
  x[0] ^= t;
  for (uint32_t q = 2; q != n; q <<= 1) {
    const uint32_t p = q - 1;
    for (int i = 2; i >= 0; --i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
}

inline uint64_t transpose_to_index(const std::array<uint32_t, 3>& x, int bits) {
  uint64_t code = 0;
  for (int b = bits - 1; b >= 0; --b)
    for (int i = 0; i < 3; ++i) code = (code << 1) | ((x[i] >> b) & 1u);
  return code;
}

inline std::array<uint32_t, 3> index_to_transpose(uint64_t code, int bits) {
  std::array<uint32_t, 3> x = {0, 0, 0};
  for (int b = bits - 1; b >= 0; --b)
    for (int i = 0; i < 3; ++i) {
      x[i] |= static_cast<uint32_t>((code >> (3 * b + (2 - i))) & 1ull) << b;
    }
  return x;
}

}  // namespace detail

/// 3D Hilbert curve index of a grid cell. hilbert_decode inverts it.
inline uint64_t hilbert_encode(uint32_t ix, uint32_t iy, uint32_t iz, int bit_depth) {
  check_bit_depth(bit_depth);
  const uint32_t limit = 1u << bit_depth;
  if (ix >= limit || iy >= limit || iz >= limit)
    throw std::invalid_argument("hilbert_encode: coordinate exceeds 2^bit_depth");
  std::array<uint32_t, 3> x = {ix, iy, iz};
  detail::axes_to_transpose(x, bit_depth);
  return detail::transpose_to_index(x, bit_depth);
}

inline std::array<uint32_t, 3> hilbert_decode(uint64_t code, int bit_depth) {
  check_bit_depth(bit_depth);
  if (bit_depth < 21 && code >= (1ull << (3 * bit_depth)))
    throw std::invalid_argument("hilbert_decode: code exceeds 2^(3*bit_depth)");
  auto x = detail::index_to_transpose(code, bit_depth);
  detail::transpose_to_axes(x, bit_depth);
  return x;
}

inline uint64_t curve_encode(const std::array<uint32_t, 3>& g, const CurveKind& curve) {
  switch (curve.variant) {
    case CurveVariant::ZOrder: return morton_encode(g[0], g[1], g[2], curve.bit_depth);
    case CurveVariant::Hilbert: return hilbert_encode(g[0], g[1], g[2], curve.bit_depth);
  }
  throw std::invalid_argument("curve_encode: unknown curve variant");
}

/// Orders the cloud along the space-filling curve. The permutation sorts
/// points by code; equal codes keep their original relative order.
inline SerializationResult serialize(const PointCloud& cloud, const CurveKind& curve) {
  SerializationResult r;
  const auto grid = quantize(cloud, curve.bit_depth);
  r.codes.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) r.codes[i] = curve_encode(grid[i], curve);
  r.permutation.resize(cloud.size());
  std::iota(r.permutation.begin(), r.permutation.end(), std::size_t{0});
  std::stable_sort(r.permutation.begin(), r.permutation.end(),
                   [&](std::size_t a, std::size_t b) { return r.codes[a] < r.codes[b]; });
  return r;
}

/// output[j] = input[permutation[j]].
template <typename T>
std::vector<T> apply_permutation(const std::vector<T>& items,
                                 const std::vector<std::size_t>& permutation) {
  if (items.size() != permutation.size())
    throw std::invalid_argument("apply_permutation: length mismatch (" +
                                std::to_string(items.size()) + " items vs " +
                                std::to_string(permutation.size()) + " indices)");
  std::vector<T> out;
  out.reserve(items.size());
  for (std::size_t j : permutation) out.push_back(items[j]);
  return out;
}

inline std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) inv[perm[j]] = j;
  return inv;
}

}  // namespace hoil
