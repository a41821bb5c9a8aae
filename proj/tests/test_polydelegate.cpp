#include "msvc/polydelegate.hpp"

#include <gtest/gtest.h>

#include <optional>
#include <vector>

#include "msvc/covering.hpp"
#include "msvc/field.hpp"
#include "msvc/protocol.hpp"
#include "msvc/rng.hpp"

using msvc::DelegatedPolynomial;
using msvc::FieldElement;
using msvc::FieldModulus;
using msvc::FieldVector;
using msvc::TwoStageDecomposition;
using msvc::U256;

namespace {

// Straight-line evaluators, kept deliberately naive and separate from the
// two-stage code they check.

FieldElement horner(const std::vector<FieldElement>& coeffs,
                    const FieldElement& x) {
  FieldElement acc = FieldElement::zero(x.modulus());
  for (std::size_t i = coeffs.size(); i-- > 0;)
    acc = fe_add(fe_mul(acc, x), coeffs[i]);
  return acc;
}

FieldElement eval_bivariate(const std::vector<std::vector<FieldElement>>& c,
                            const FieldElement& x, const FieldElement& y) {
  FieldElement acc = FieldElement::zero(x.modulus());
  FieldElement xi = FieldElement::one(x.modulus());
  for (std::size_t i = 0; i < c.size(); ++i) {
    FieldElement yj = FieldElement::one(x.modulus());
    for (std::size_t j = 0; j < c[i].size(); ++j) {
      acc = fe_add(acc, fe_mul(c[i][j], fe_mul(xi, yj)));
      yj = fe_mul(yj, y);
    }
    xi = fe_mul(xi, x);
  }
  return acc;
}

FieldElement eval_quadratic(const std::vector<std::vector<FieldElement>>& c,
                            const std::vector<FieldElement>& pt) {
  FieldElement acc = FieldElement::zero(pt[0].modulus());
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j)
      acc = fe_add(acc, fe_mul(c[i][j], fe_mul(pt[i], pt[j])));
  return acc;
}

// walks exponent tuples (1..d)^vars with an odometer, last variable fastest
FieldElement eval_multivariate(const std::vector<FieldElement>& flat,
                               std::size_t vars, int degree,
                               const std::vector<FieldElement>& pt) {
  const FieldModulus& mod = pt[0].modulus();
  std::vector<int> expo(vars, 1);
  FieldElement acc = FieldElement::zero(mod);
  for (std::size_t idx = 0;; ++idx) {
    FieldElement term = flat[idx];
    for (std::size_t t = 0; t < vars; ++t)
      for (int e = 0; e < expo[t]; ++e) term = fe_mul(term, pt[t]);
    acc = fe_add(acc, term);
    std::size_t t = vars;
    while (t-- > 0) {
      if (++expo[t] <= degree) break;
      expo[t] = 1;
      if (t == 0) return acc;
    }
  }
}

std::vector<FieldElement> random_coeffs(const FieldModulus& mod, std::size_t n,
                                        msvc::RandomSource& rng) {
  std::vector<FieldElement> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(FieldElement::random(mod, rng));
  return out;
}

std::vector<std::vector<FieldElement>> random_grid(const FieldModulus& mod,
                                                   std::size_t n,
                                                   msvc::RandomSource& rng) {
  std::vector<std::vector<FieldElement>> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_coeffs(mod, n, rng));
  return out;
}

FieldElement direct_identity(const TwoStageDecomposition& d,
                             const std::vector<FieldElement>& pt) {
  return dot(d.build_y(pt), mat_vec_mul(d.matrix(), d.build_x(pt)));
}

TEST(PolyShapes, UnivariateGrid) {
  FieldModulus m7{U256{7}};
  // 1 + 2x + 3x^2 splits over a 2x2 grid with a zero pad
  std::vector<FieldElement> coeffs = {FieldElement::from_u64(m7, 1),
                                      FieldElement::from_u64(m7, 2),
                                      FieldElement::from_u64(m7, 3)};
  TwoStageDecomposition d = msvc::decompose_univariate(coeffs);
  ASSERT_EQ(d.matrix().rows(), 2u);
  ASSERT_EQ(d.matrix().cols(), 2u);
  EXPECT_EQ(d.matrix().at(0, 0).canonical_u64(), 1u);
  EXPECT_EQ(d.matrix().at(0, 1).canonical_u64(), 2u);
  EXPECT_EQ(d.matrix().at(1, 0).canonical_u64(), 3u);
  EXPECT_EQ(d.matrix().at(1, 1).canonical_u64(), 0u);
  // f(2) = 1 + 4 + 12 = 17 = 3 mod 7
  FieldElement at2 =
      direct_identity(d, {FieldElement::from_u64(m7, 2)});
  EXPECT_EQ(at2.canonical_u64(), 3u);

  // degree 5: six coefficients over a 2x3 grid
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(60);
  TwoStageDecomposition d6 =
      msvc::decompose_univariate(random_coeffs(m101, 6, rng));
  EXPECT_EQ(d6.matrix().rows(), 2u);
  EXPECT_EQ(d6.matrix().cols(), 3u);
  TwoStageDecomposition d1 =
      msvc::decompose_univariate(random_coeffs(m101, 1, rng));
  EXPECT_EQ(d1.matrix().rows(), 1u);
  EXPECT_EQ(d1.matrix().cols(), 1u);
}

TEST(PolyShapes, MultivariateSplit) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(61);
  // three variables, exponents 1..2: 8 coefficients over a 2x4 matrix
  TwoStageDecomposition d =
      msvc::decompose_multivariate(random_coeffs(m101, 8, rng), 3, 2);
  EXPECT_EQ(d.matrix().rows(), 2u);
  EXPECT_EQ(d.matrix().cols(), 4u);
  EXPECT_EQ(d.arity(), 3u);
  // single variable folds everything into build_x
  TwoStageDecomposition d1 =
      msvc::decompose_multivariate(random_coeffs(m101, 4, rng), 1, 4);
  EXPECT_EQ(d1.matrix().rows(), 1u);
  EXPECT_EQ(d1.matrix().cols(), 4u);
}

TEST(PolyIdentity, UnivariateMatchesHorner) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(62);
  for (std::size_t len : {1u, 2u, 5u, 9u, 16u, 20u}) {
    auto coeffs = random_coeffs(m101, len, rng);
    TwoStageDecomposition d = msvc::decompose_univariate(coeffs);
    for (int rep = 0; rep < 10; ++rep) {
      FieldElement x = FieldElement::random(m101, rng);
      EXPECT_EQ(direct_identity(d, {x}), horner(coeffs, x));
    }
  }
}

TEST(PolyIdentity, BivariateMatchesDoubleSum) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(63);
  for (std::size_t n : {1u, 2u, 4u, 7u}) {
    auto grid = random_grid(m101, n, rng);
    TwoStageDecomposition d = msvc::decompose_bivariate(grid);
    EXPECT_EQ(d.matrix().rows(), n);
    EXPECT_EQ(d.matrix().cols(), n);
    for (int rep = 0; rep < 10; ++rep) {
      FieldElement x = FieldElement::random(m101, rng);
      FieldElement y = FieldElement::random(m101, rng);
      EXPECT_EQ(direct_identity(d, {x, y}), eval_bivariate(grid, x, y));
    }
  }
}

TEST(PolyIdentity, QuadraticFormMatchesDoubleSum) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(64);
  for (std::size_t n : {1u, 3u, 6u}) {
    auto grid = random_grid(m101, n, rng);
    TwoStageDecomposition d = msvc::decompose_quadratic_form(grid);
    for (int rep = 0; rep < 10; ++rep) {
      auto pt = random_coeffs(m101, n, rng);
      EXPECT_EQ(direct_identity(d, pt), eval_quadratic(grid, pt));
    }
  }
}

TEST(PolyIdentity, MultivariateMatchesMonomialSum) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(65);
  const struct {
    std::size_t vars;
    int degree;
  } shapes[] = {{1, 3}, {2, 2}, {2, 4}, {3, 2}, {4, 2}, {3, 3}};
  for (const auto& sh : shapes) {
    std::size_t cells = 1;
    for (std::size_t t = 0; t < sh.vars; ++t)
      cells *= static_cast<std::size_t>(sh.degree);
    auto flat = random_coeffs(m101, cells, rng);
    TwoStageDecomposition d =
        msvc::decompose_multivariate(flat, sh.vars, sh.degree);
    for (int rep = 0; rep < 5; ++rep) {
      auto pt = random_coeffs(m101, sh.vars, rng);
      EXPECT_EQ(direct_identity(d, pt),
                eval_multivariate(flat, sh.vars, sh.degree, pt))
          << sh.vars << " vars, degree " << sh.degree;
    }
  }
}

TEST(PolyDelegation, EndToEndThroughBothSchemes) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(66);
  auto coeffs = random_coeffs(m101, 10, rng);
  for (const msvc::CoveringScheme& scheme : {msvc::pi_s(), msvc::pi_w()}) {
    TwoStageDecomposition d = msvc::decompose_univariate(coeffs);
    for (int rep = 0; rep < 5; ++rep) {
      FieldElement x = FieldElement::random(m101, rng);
      auto got = msvc::evaluate_delegated(d, {x}, scheme, rng);
      ASSERT_TRUE(got.has_value());
      EXPECT_EQ(*got, horner(coeffs, x));
    }
  }
}

TEST(PolyDelegation, WorkedExampleSeventeen) {
  FieldModulus m101{U256{101}};
  std::vector<FieldElement> coeffs = {FieldElement::from_u64(m101, 1),
                                      FieldElement::from_u64(m101, 2),
                                      FieldElement::from_u64(m101, 3)};
  msvc::ChaChaRng rng(67);
  auto got = msvc::evaluate_delegated(msvc::decompose_univariate(coeffs),
                                      {FieldElement::from_u64(m101, 2)},
                                      msvc::pi_s(), rng);
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(got->canonical_u64(), 17u);
}

TEST(PolyDelegation, AmortizedEvaluatorReusesOneKey) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(68);
  auto grid = random_grid(m101, 5, rng);
  DelegatedPolynomial dp(msvc::decompose_bivariate(grid), msvc::pi_s(), rng);
  const FieldVector probe = dp.function_key().vk.r;
  for (int rep = 0; rep < 8; ++rep) {
    FieldElement x = FieldElement::random(m101, rng);
    FieldElement y = FieldElement::random(m101, rng);
    auto got = dp.evaluate({x, y}, rng);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got, eval_bivariate(grid, x, y));
  }
  EXPECT_EQ(dp.function_key().vk.r, probe);
  EXPECT_EQ(dp.function_key().vk.uses, 8u);
}

TEST(PolyDelegation, CorruptedAnswerFailsVerification) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(69);
  auto coeffs = random_coeffs(m101, 9, rng);
  DelegatedPolynomial dp(msvc::decompose_univariate(coeffs), msvc::pi_s(),
                         rng);
  FieldElement x = FieldElement::random(m101, rng);
  auto [sigma, ik] =
      msvc::prob_gen(dp.decomposition().build_x({x}), dp.scheme(), rng);
  std::vector<msvc::ServerOutput> outs;
  for (int l = 0; l < dp.scheme().k; ++l)
    outs.push_back(msvc::compute(dp.function_key().rho[l], sigma[l],
                                 dp.scheme().C[l]));
  auto it = outs[1].begin();
  FieldVector bump(m101, it->second.dim());
  bump.set(0, FieldElement::one(m101));
  it->second = vec_add(it->second, bump);
  EXPECT_FALSE(
      msvc::verify(dp.function_key().vk, ik, outs, dp.scheme()).ok());
}

TEST(PolyErrors, RejectBadShapesAndPoints) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(70);
  EXPECT_THROW(msvc::decompose_univariate({}), std::invalid_argument);
  auto ragged = random_grid(m101, 3, rng);
  ragged[1].pop_back();
  EXPECT_THROW(msvc::decompose_bivariate(ragged), std::invalid_argument);
  EXPECT_THROW(msvc::decompose_quadratic_form(ragged), std::invalid_argument);
  EXPECT_THROW(msvc::decompose_multivariate(random_coeffs(m101, 7, rng), 3, 2),
               std::invalid_argument);  // needs 8 coefficients
  EXPECT_THROW(
      msvc::decompose_multivariate(random_coeffs(m101, 8, rng), 30, 2, 1000),
      std::invalid_argument);  // tensor over the cell cap
  TwoStageDecomposition d =
      msvc::decompose_univariate(random_coeffs(m101, 4, rng));
  FieldElement x = FieldElement::random(m101, rng);
  EXPECT_THROW(d.build_x({x, x}), std::invalid_argument);
  FieldModulus m7{U256{7}};
  EXPECT_THROW(d.build_x({FieldElement::from_u64(m7, 1)}),
               std::invalid_argument);
}

}  // namespace
