#include "msvc/pir.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <map>
#include <vector>

#include "msvc/covering.hpp"
#include "msvc/field.hpp"
#include "msvc/protocol.hpp"
#include "msvc/rng.hpp"

using msvc::FieldElement;
using msvc::FieldModulus;
using msvc::FieldVector;
using msvc::PirClient;
using msvc::PirDatabase;
using msvc::PirQuery;
using msvc::U256;

namespace {

std::vector<FieldElement> entries_u64(const FieldModulus& mod,
                                      std::initializer_list<std::uint64_t> v) {
  std::vector<FieldElement> out;
  for (std::uint64_t e : v) out.push_back(FieldElement::from_u64(mod, e));
  return out;
}

std::vector<FieldElement> random_entries(const FieldModulus& mod,
                                         std::size_t n,
                                         msvc::RandomSource& rng) {
  std::vector<FieldElement> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(FieldElement::random(mod, rng));
  return out;
}

TEST(PirDatabaseLayout, RowMajorSquareWithZeroPad) {
  FieldModulus m101{U256{101}};
  PirDatabase db = msvc::build_database(entries_u64(m101, {10, 20, 30, 40}));
  ASSERT_EQ(db.n, 4u);
  ASSERT_EQ(db.side(), 2u);
  EXPECT_EQ(db.matrix.at(0, 0).canonical_u64(), 10u);
  EXPECT_EQ(db.matrix.at(0, 1).canonical_u64(), 20u);
  EXPECT_EQ(db.matrix.at(1, 0).canonical_u64(), 30u);
  EXPECT_EQ(db.matrix.at(1, 1).canonical_u64(), 40u);

  PirDatabase one = msvc::build_database(entries_u64(m101, {77}));
  EXPECT_EQ(one.side(), 1u);
  EXPECT_EQ(one.matrix.at(0, 0).canonical_u64(), 77u);

  PirDatabase padded = msvc::build_database(entries_u64(m101, {1, 2, 3}));
  EXPECT_EQ(padded.side(), 2u);
  EXPECT_EQ(padded.matrix.at(1, 1).canonical_u64(), 0u);

  PirDatabase five = msvc::build_database(entries_u64(m101, {1, 2, 3, 4, 5}));
  EXPECT_EQ(five.side(), 3u);
  EXPECT_EQ(five.matrix.at(1, 2).canonical_u64(), 0u);
  EXPECT_EQ(five.matrix.at(2, 2).canonical_u64(), 0u);

  EXPECT_THROW(msvc::build_database({}), std::invalid_argument);
  std::vector<FieldElement> mixed = entries_u64(m101, {1});
  FieldModulus m7{U256{7}};
  mixed.push_back(FieldElement::from_u64(m7, 2));
  EXPECT_THROW(msvc::build_database(mixed), std::invalid_argument);
}

TEST(PirQueryIndexing, RowColumnSelector) {
  FieldModulus m101{U256{101}};
  PirQuery q3 = msvc::make_query(3, 4, m101);
  EXPECT_EQ(q3.row, 2u);
  EXPECT_EQ(q3.col, 1u);
  ASSERT_EQ(q3.x.dim(), 2u);
  EXPECT_EQ(q3.x.at(0).canonical_u64(), 1u);
  EXPECT_EQ(q3.x.at(1).canonical_u64(), 0u);

  PirQuery q1 = msvc::make_query(1, 4, m101);
  EXPECT_EQ(q1.row, 1u);
  EXPECT_EQ(q1.col, 1u);
  EXPECT_EQ(q1.x.at(0).canonical_u64(), 1u);

  PirQuery q4 = msvc::make_query(4, 4, m101);
  EXPECT_EQ(q4.row, 2u);
  EXPECT_EQ(q4.col, 2u);
  EXPECT_EQ(q4.x.at(1).canonical_u64(), 1u);

  // (row, col) always maps back to the queried index
  for (std::size_t n : {1u, 4u, 10u, 100u}) {
    std::size_t d = 1;
    while (d * d < n) ++d;
    for (std::size_t i = 1; i <= n; ++i) {
      PirQuery q = msvc::make_query(i, n, m101);
      EXPECT_EQ((q.row - 1) * d + q.col, i);
      EXPECT_EQ(q.x.dim(), d);
      std::uint64_t ones = 0;
      for (std::size_t t = 0; t < d; ++t) ones += q.x.at(t).canonical_u64();
      EXPECT_EQ(ones, 1u);
      EXPECT_EQ(q.x.at(q.col - 1).canonical_u64(), 1u);
    }
  }

  EXPECT_THROW(msvc::make_query(0, 4, m101), std::out_of_range);
  EXPECT_THROW(msvc::make_query(5, 4, m101), std::out_of_range);
}

TEST(PirRetrieve, WorkedExample) {
  FieldModulus m101{U256{101}};
  PirDatabase db = msvc::build_database(entries_u64(m101, {10, 20, 30, 40}));
  msvc::ChaChaRng rng(80);
  auto got = msvc::pir_retrieve(db, 3, msvc::pi_s(), rng);
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(got->canonical_u64(), 30u);
}

TEST(PirRetrieve, EveryIndexOfHundredEntryDatabase) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(81);
  auto entries = random_entries(m101, 100, rng);
  PirDatabase db = msvc::build_database(entries);
  PirClient client(db, msvc::pi_s(), rng);
  for (std::size_t i = 1; i <= 100; ++i) {
    auto got = client.retrieve(i, rng);
    ASSERT_TRUE(got.has_value()) << "index " << i;
    EXPECT_EQ(*got, entries[i - 1]) << "index " << i;
  }
  EXPECT_EQ(client.function_key().vk.uses, 100u);
  // spot checks through the four-server scheme and at a 256-bit modulus
  PirClient wide(db, msvc::pi_w(), rng);
  for (std::size_t i : {1u, 37u, 64u, 100u}) {
    auto got = wide.retrieve(i, rng);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got, entries[i - 1]);
  }
  const FieldModulus& big = FieldModulus::default_modulus();
  auto big_entries = random_entries(big, 10, rng);
  PirDatabase big_db = msvc::build_database(big_entries);
  for (std::size_t i = 1; i <= 10; ++i) {
    auto got = msvc::pir_retrieve(big_db, i, msvc::pi_s(), rng);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got, big_entries[i - 1]);
  }
  EXPECT_THROW(client.retrieve(0, rng), std::out_of_range);
  EXPECT_THROW(client.retrieve(101, rng), std::out_of_range);
}

TEST(PirRetrieve, TamperedColumnAlmostAlwaysRejected) {
  FieldModulus m101{U256{101}};
  msvc::ChaChaRng rng(82);
  auto entries = random_entries(m101, 9, rng);
  PirDatabase db = msvc::build_database(entries);
  PirClient client(db, msvc::pi_s(), rng);
  const msvc::CoveringScheme& scheme = client.scheme();
  int rejected = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    PirQuery q = msvc::make_query(5, db.n, m101);
    auto [sigma, ik] = msvc::prob_gen(q.x, scheme, rng);
    std::vector<msvc::ServerOutput> outs;
    for (int l = 0; l < scheme.k; ++l)
      outs.push_back(
          msvc::compute(client.function_key().rho[l], sigma[l], scheme.C[l]));
    FieldVector delta = msvc::random_vector(m101, 3, rng);
    bool all_zero = true;
    for (std::size_t i = 0; i < delta.dim(); ++i)
      if (delta.at(i).canonical_u64() != 0) all_zero = false;
    if (all_zero) delta.set(0, FieldElement::one(m101));
    auto it = outs[0].begin();
    it->second = vec_add(it->second, delta);
    if (!msvc::verify(client.function_key().vk, ik, outs, scheme).ok())
      ++rejected;
  }
  // a corrupted column slips through only when the probe annihilates the
  // random offset, so roughly one trial in 101
  EXPECT_GE(rejected, 190) << rejected << " of " << trials;
  EXPECT_LT(rejected, trials + 1);
}

TEST(PirPrivacy, ServerSharesIndependentOfIndex) {
  using Dist = std::map<std::vector<std::uint64_t>, int>;
  FieldModulus m2{U256{2}};
  for (const msvc::CoveringScheme& scheme : {msvc::pi_s(), msvc::pi_w()}) {
    const std::size_t d = 2;
    const std::size_t words = static_cast<std::size_t>(scheme.b - 1) * d;
    std::vector<std::vector<Dist>> by_index;  // [queried index][server]
    for (std::size_t index : {1u, 2u, 3u, 4u}) {
      PirQuery q = msvc::make_query(index, 4, m2);
      std::vector<Dist> dist(static_cast<std::size_t>(scheme.k));
      for (std::uint64_t mask = 0; mask < (1ull << words); ++mask) {
        std::vector<std::uint64_t> tape(words);
        for (std::size_t w = 0; w < words; ++w) tape[w] = (mask >> w) & 1;
        msvc::TapeRng tr(tape);
        auto [sigma, ik] = msvc::prob_gen(q.x, scheme, tr);
        for (int l = 0; l < scheme.k; ++l) {
          std::vector<std::uint64_t> key;
          for (const auto& [v, share] : sigma[static_cast<std::size_t>(l)])
            for (std::size_t t = 0; t < share.dim(); ++t)
              key.push_back(share.at(t).canonical_u64());
          ++dist[static_cast<std::size_t>(l)][key];
        }
      }
      by_index.push_back(std::move(dist));
    }
    for (std::size_t i = 1; i < by_index.size(); ++i)
      for (int l = 0; l < scheme.k; ++l)
        EXPECT_EQ(by_index[i][static_cast<std::size_t>(l)],
                  by_index[0][static_cast<std::size_t>(l)])
            << "server " << l << " sees a different share distribution";
  }
}

}  // namespace
