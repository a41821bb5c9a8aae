#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "msvc/field.hpp"
#include "msvc/rng.hpp"

namespace msvc {

/// Additive sharing into n parts. The first n-1 shares are drawn uniformly
/// (entries in vector order / row-major for matrices), the last share absorbs
/// the secret so they sum back to it. Any n-1 shares alone are uniform.
inline std::vector<FieldVector> share_vector(const FieldVector& x, int n,
                                             RandomSource& rng) {
  if (n < 1) throw std::invalid_argument("sharing: need at least one share");
  std::vector<FieldVector> shares;
  shares.reserve(static_cast<std::size_t>(n));
  FieldVector acc = x;
  for (int i = 0; i + 1 < n; ++i) {
    shares.push_back(FieldVector::random(x.modulus(), x.dim(), rng));
    acc = vec_sub(acc, shares.back());
  }
  shares.push_back(std::move(acc));
  return shares;
}

inline std::vector<FieldMatrix> share_matrix(const FieldMatrix& F, int n,
                                             RandomSource& rng) {
  if (n < 1) throw std::invalid_argument("sharing: need at least one share");
  std::vector<FieldMatrix> shares;
  shares.reserve(static_cast<std::size_t>(n));
  FieldMatrix acc = F;
  for (int i = 0; i + 1 < n; ++i) {
    shares.push_back(
        FieldMatrix::random(F.modulus(), F.rows(), F.cols(), rng));
    acc = mat_sub(acc, shares.back());
  }
  shares.push_back(std::move(acc));
  return shares;
}

inline FieldVector reconstruct_vector(std::span<const FieldVector> shares) {
  if (shares.empty())
    throw std::invalid_argument("sharing: nothing to reconstruct");
  FieldVector acc = shares[0];
  for (std::size_t i = 1; i < shares.size(); ++i)
    acc = vec_add(acc, shares[i]);
  return acc;
}

inline FieldMatrix reconstruct_matrix(std::span<const FieldMatrix> shares) {
  if (shares.empty())
    throw std::invalid_argument("sharing: nothing to reconstruct");
  FieldMatrix acc = shares[0];
  for (std::size_t i = 1; i < shares.size(); ++i)
    acc = mat_add(acc, shares[i]);
  return acc;
}

}  // namespace msvc
