#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "msvc/covering.hpp"
#include "msvc/field.hpp"
#include "msvc/protocol.hpp"
#include "msvc/rng.hpp"

namespace msvc {

/// (1, x, x^2, ..., x^{count-1})
inline FieldVector powers_ascending(const FieldElement& x, std::size_t count) {
  if (count == 0) throw std::invalid_argument("poly: empty power vector");
  FieldVector out(x.modulus(), count);
  FieldElement cur = FieldElement::one(x.modulus());
  out.set(0, cur);
  for (std::size_t i = 1; i < count; ++i) {
    cur = fe_mul(cur, x);
    out.set(i, cur);
  }
  return out;
}

/// A polynomial rewritten as f(point) = build_y(point)^T (M build_x(point)),
/// so that the matrix-vector protocol evaluates it: delegate M once, then
/// each evaluation ships only build_x and finishes with one inner product.
class TwoStageDecomposition {
 public:
  enum class Family { univariate, bivariate, quadratic_form, multivariate };

  Family family() const { return family_; }
  std::size_t arity() const { return arity_; }
  const FieldMatrix& matrix() const { return matrix_; }
  const FieldModulus& modulus() const { return matrix_.modulus(); }

  FieldVector build_x(const std::vector<FieldElement>& point) const {
    check_point(point);
    switch (family_) {
      case Family::univariate:
        return powers_ascending(point[0], matrix_.cols());
      case Family::bivariate:
        return powers_ascending(point[0], matrix_.cols());
      case Family::quadratic_form: {
        FieldVector out(modulus(), point.size());
        for (std::size_t i = 0; i < point.size(); ++i) out.set(i, point[i]);
        return out;
      }
      case Family::multivariate:
        return monomial_side(point, split_, arity_, matrix_.cols());
    }
    throw std::logic_error("poly: unreachable");
  }

  FieldVector build_y(const std::vector<FieldElement>& point) const {
    check_point(point);
    switch (family_) {
      case Family::univariate: {
        // x^grid, x^{2 grid}, ...: powers of x^grid
        FieldVector xs = powers_ascending(point[0], grid_);
        FieldElement x_grid = fe_mul(xs.at(grid_ - 1), point[0]);
        return powers_ascending(x_grid, matrix_.rows());
      }
      case Family::bivariate:
        return powers_ascending(point[1], matrix_.rows());
      case Family::quadratic_form: {
        FieldVector out(modulus(), point.size());
        for (std::size_t i = 0; i < point.size(); ++i) out.set(i, point[i]);
        return out;
      }
      case Family::multivariate:
        return monomial_side(point, 0, split_, matrix_.rows());
    }
    throw std::logic_error("poly: unreachable");
  }

 private:
  TwoStageDecomposition(Family family, FieldMatrix matrix, std::size_t arity)
      : family_(family), matrix_(std::move(matrix)), arity_(arity) {}

  void check_point(const std::vector<FieldElement>& point) const {
    if (point.size() != arity_)
      throw std::invalid_argument("poly: point has arity " +
                                  std::to_string(point.size()) +
                                  ", expected " + std::to_string(arity_));
    for (const FieldElement& c : point)
      detail::require_same_modulus(c.modulus(), modulus());
  }

  // product of point[first..last) raised to the exponent digits of idx,
  // digits in base `degree_` (first variable most significant), each digit
  // shifted up by one so exponents run 1..degree_
  FieldVector monomial_side(const std::vector<FieldElement>& point,
                            std::size_t first, std::size_t last,
                            std::size_t count) const {
    FieldVector out(modulus(), count);
    std::vector<FieldVector> table;
    for (std::size_t t = first; t < last; ++t)
      table.push_back(powers_ascending(
          point[t], static_cast<std::size_t>(degree_) + 1));
    for (std::size_t idx = 0; idx < count; ++idx) {
      FieldElement acc = FieldElement::one(modulus());
      std::size_t rest = idx;
      for (std::size_t t = table.size(); t-- > 0;) {
        const std::size_t digit = rest % static_cast<std::size_t>(degree_);
        rest /= static_cast<std::size_t>(degree_);
        acc = fe_mul(acc, table[t].at(digit + 1));
      }
      out.set(idx, acc);
    }
    return out;
  }

  Family family_;
  FieldMatrix matrix_;
  std::size_t arity_;
  std::size_t grid_ = 0;    // univariate: row stride in the exponent grid
  int degree_ = 0;          // multivariate: per-variable exponent bound
  std::size_t split_ = 0;   // multivariate: variables folded into build_y

  friend TwoStageDecomposition decompose_univariate(
      const std::vector<FieldElement>&);
  friend TwoStageDecomposition decompose_bivariate(
      const std::vector<std::vector<FieldElement>>&);
  friend TwoStageDecomposition decompose_quadratic_form(
      const std::vector<std::vector<FieldElement>>&);
  friend TwoStageDecomposition decompose_multivariate(
      const std::vector<FieldElement>&, std::size_t, int, std::size_t);
};

/// coeffs[i] multiplies x^i. The exponent range splits into a near-square
/// grid: entry (r, c) of the matrix holds the coefficient of x^{r*g + c}
/// where g = ceil(sqrt(len)), zero-padded past the degree.
inline TwoStageDecomposition decompose_univariate(
    const std::vector<FieldElement>& coeffs) {
  if (coeffs.empty()) throw std::invalid_argument("poly: no coefficients");
  const FieldModulus& mod = coeffs[0].modulus();
  std::size_t g = 1;
  while (g * g < coeffs.size()) ++g;
  const std::size_t rows = (coeffs.size() + g - 1) / g;
  FieldMatrix M(mod, rows, g);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    detail::require_same_modulus(coeffs[i].modulus(), mod);
    M.set(i / g, i % g, coeffs[i]);
  }
  TwoStageDecomposition d(TwoStageDecomposition::Family::univariate,
                          std::move(M), 1);
  d.grid_ = g;
  return d;
}

/// coeffs[i][j] multiplies x^i y^j; the coefficient grid must be square.
/// Stored transposed so rows follow y and columns follow x.
inline TwoStageDecomposition decompose_bivariate(
    const std::vector<std::vector<FieldElement>>& coeffs) {
  if (coeffs.empty() || coeffs[0].empty())
    throw std::invalid_argument("poly: no coefficients");
  const std::size_t n = coeffs.size();
  const FieldModulus& mod = coeffs[0][0].modulus();
  FieldMatrix M(mod, n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (coeffs[i].size() != n)
      throw std::invalid_argument("poly: coefficient grid must be square");
    for (std::size_t j = 0; j < n; ++j) {
      detail::require_same_modulus(coeffs[i][j].modulus(), mod);
      M.set(j, i, coeffs[i][j]);
    }
  }
  return TwoStageDecomposition(TwoStageDecomposition::Family::bivariate,
                               std::move(M), 2);
}

/// coeffs[i][j] multiplies x_{i+1} x_{j+1}: evaluation is point^T M point.
inline TwoStageDecomposition decompose_quadratic_form(
    const std::vector<std::vector<FieldElement>>& coeffs) {
  if (coeffs.empty() || coeffs[0].empty())
    throw std::invalid_argument("poly: no coefficients");
  const std::size_t n = coeffs.size();
  const FieldModulus& mod = coeffs[0][0].modulus();
  FieldMatrix M(mod, n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (coeffs[i].size() != n)
      throw std::invalid_argument("poly: coefficient grid must be square");
    for (std::size_t j = 0; j < n; ++j) {
      detail::require_same_modulus(coeffs[i][j].modulus(), mod);
      M.set(i, j, coeffs[i][j]);
    }
  }
  return TwoStageDecomposition(TwoStageDecomposition::Family::quadratic_form,
                               std::move(M), n);
}

/// Dense polynomial in `vars` variables where every variable appears in every
/// monomial with exponent 1..degree. flat lists the d^vars coefficients
/// lexicographically, the last variable's exponent varying fastest. The first
/// floor(vars/2) variables fold into build_y, the rest into build_x.
inline TwoStageDecomposition decompose_multivariate(
    const std::vector<FieldElement>& flat, std::size_t vars, int degree,
    std::size_t max_cells = (1u << 20)) {
  if (vars < 1 || degree < 1)
    throw std::invalid_argument("poly: need at least one variable and degree");
  std::size_t cells = 1;
  for (std::size_t t = 0; t < vars; ++t) {
    cells *= static_cast<std::size_t>(degree);
    if (cells > max_cells)
      throw std::invalid_argument("poly: coefficient tensor too large");
  }
  if (flat.size() != cells)
    throw std::invalid_argument("poly: expected " + std::to_string(cells) +
                                " coefficients, got " +
                                std::to_string(flat.size()));
  const FieldModulus& mod = flat[0].modulus();
  const std::size_t split = vars / 2;
  std::size_t rows = 1, cols = 1;
  for (std::size_t t = 0; t < split; ++t)
    rows *= static_cast<std::size_t>(degree);
  for (std::size_t t = split; t < vars; ++t)
    cols *= static_cast<std::size_t>(degree);
  FieldMatrix M(mod, rows, cols);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    detail::require_same_modulus(flat[i].modulus(), mod);
    M.set(i / cols, i % cols, flat[i]);
  }
  TwoStageDecomposition d(TwoStageDecomposition::Family::multivariate,
                          std::move(M), vars);
  d.degree_ = degree;
  d.split_ = split;
  return d;
}

/// Holds a delegated coefficient matrix and evaluates the polynomial at
/// fresh points, amortizing the key generation across evaluations.
/// nullopt means the servers' answers failed verification.
class DelegatedPolynomial {
 public:
  DelegatedPolynomial(TwoStageDecomposition decomp, CoveringScheme scheme,
                      RandomSource& rng)
      : decomp_(std::move(decomp)),
        scheme_(std::move(scheme)),
        fk_(key_gen(decomp_.matrix(), scheme_, rng)) {}

  std::optional<FieldElement> evaluate(const std::vector<FieldElement>& point,
                                       RandomSource& rng) const {
    auto [sigma, ik] = prob_gen(decomp_.build_x(point), scheme_, rng);
    std::vector<ServerOutput> outs;
    outs.reserve(static_cast<std::size_t>(scheme_.k));
    for (int l = 0; l < scheme_.k; ++l)
      outs.push_back(compute(fk_.rho[static_cast<std::size_t>(l)],
                             sigma[static_cast<std::size_t>(l)],
                             scheme_.C[static_cast<std::size_t>(l)]));
    VerifyOutcome out = verify(fk_.vk, ik, outs, scheme_);
    if (!out.ok()) return std::nullopt;
    return dot(decomp_.build_y(point), out.value());
  }

  const TwoStageDecomposition& decomposition() const { return decomp_; }
  const CoveringScheme& scheme() const { return scheme_; }
  const FunctionKey& function_key() const { return fk_; }

 private:
  TwoStageDecomposition decomp_;
  CoveringScheme scheme_;
  FunctionKey fk_;
};

inline std::optional<FieldElement> evaluate_delegated(
    const TwoStageDecomposition& decomp,
    const std::vector<FieldElement>& point, const CoveringScheme& scheme,
    RandomSource& rng) {
  DelegatedPolynomial dp(decomp, scheme, rng);
  return dp.evaluate(point, rng);
}

}  // namespace msvc
