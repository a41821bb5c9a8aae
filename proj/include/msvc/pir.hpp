#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "msvc/covering.hpp"
#include "msvc/field.hpp"
#include "msvc/protocol.hpp"
#include "msvc/rng.hpp"

namespace msvc {

// N database entries laid out row-major (1-based) over a d x d matrix with
// d = ceil(sqrt(N)); the tail is zero-padded.  Retrieving entry i = (r-1)d + c
// then amounts to delegating F * e_c and reading off row r of the verified
// column, so no single server ever sees which entry was asked for.
struct PirDatabase {
  std::size_t n;
  FieldMatrix matrix;

  std::size_t side() const { return matrix.rows(); }
};

struct PirQuery {
  std::size_t index;  // 1-based, index == (row-1)*side + col
  std::size_t row;
  std::size_t col;
  FieldVector x;  // e_col
};

inline PirDatabase build_database(const std::vector<FieldElement>& f) {
  if (f.empty()) throw std::invalid_argument("pir: empty database");
  std::size_t d = 1;
  while (d * d < f.size()) ++d;
  FieldMatrix m(f[0].modulus(), d, d);
  for (std::size_t i = 0; i < f.size(); ++i) m.set(i / d, i % d, f[i]);
  return PirDatabase{f.size(), std::move(m)};
}

inline PirQuery make_query(std::size_t index, std::size_t n,
                           const FieldModulus& mod) {
  if (index == 0 || index > n)
    throw std::out_of_range("pir: index outside [1, N]");
  std::size_t d = 1;
  while (d * d < n) ++d;
  std::size_t row = (index - 1) / d + 1;
  std::size_t col = (index - 1) % d + 1;
  FieldVector x(mod, d);
  x.set(col - 1, FieldElement::one(mod));
  return PirQuery{index, row, col, std::move(x)};
}

// Holds one database's function shares so repeated lookups skip key_gen.
class PirClient {
 public:
  PirClient(PirDatabase db, CoveringScheme scheme, RandomSource& rng)
      : db_(std::move(db)),
        scheme_(std::move(scheme)),
        fk_(key_gen(db_.matrix, scheme_, rng)) {}

  const PirDatabase& database() const { return db_; }
  const CoveringScheme& scheme() const { return scheme_; }
  const FunctionKey& function_key() const { return fk_; }

  std::optional<FieldElement> retrieve(std::size_t index,
                                       RandomSource& rng) const {
    PirQuery query = make_query(index, db_.n, db_.matrix.modulus());
    auto [sigma, ik] = prob_gen(query.x, scheme_, rng);
    std::vector<ServerOutput> outputs;
    outputs.reserve(static_cast<std::size_t>(scheme_.k));
    for (int l = 0; l < scheme_.k; ++l)
      outputs.push_back(compute(fk_.rho[l], sigma[l], scheme_.C[l]));
    VerifyOutcome out = verify(fk_.vk, ik, outputs, scheme_);
    if (!out.ok()) return std::nullopt;
    return out.value().at(query.row - 1);
  }

 private:
  PirDatabase db_;
  CoveringScheme scheme_;
  FunctionKey fk_;
};

inline std::optional<FieldElement> pir_retrieve(const PirDatabase& db,
                                                std::size_t index,
                                                const CoveringScheme& scheme,
                                                RandomSource& rng) {
  return PirClient(db, scheme, rng).retrieve(index, rng);
}

}  // namespace msvc
