#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msvc/rng.hpp"
#include "msvc/u256.hpp"

namespace msvc {

namespace detail {

inline std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b,
                                std::uint64_t q) {
  return static_cast<std::uint64_t>(
      static_cast<unsigned __int128>(a) * b % q);
}

inline std::uint64_t powmod_u64(std::uint64_t base, std::uint64_t exp,
                                std::uint64_t q) {
  std::uint64_t acc = 1 % q;
  base %= q;
  while (exp != 0) {
    if (exp & 1) acc = mulmod_u64(acc, base, q);
    base = mulmod_u64(base, base, q);
    exp >>= 1;
  }
  return acc;
}

// Deterministic for all 64-bit inputs: these twelve bases are a proven
// witness set below 3.3e24.
inline bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                          23ull, 29ull, 31ull, 37ull}) {
    if (n == p) return true;
    if (n % p == 0) return false;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                          23ull, 29ull, 31ull, 37ull}) {
    std::uint64_t x = powmod_u64(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool witness = true;
    for (int i = 1; i < s; ++i) {
      x = mulmod_u64(x, x, n);
      if (x == n - 1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

struct MontParams {
  U256 q;
  std::uint64_t n0inv = 0;  // -q^{-1} mod 2^64
  U256 r1;                  // R mod q, the resident form of 1
  U256 r2;                  // R^2 mod q, conversion factor into resident form
};

inline U256 double_mod(const U256& x, const U256& q) {
  U256 out;
  std::uint64_t carry = add_limbs(x, x, out);
  if (carry != 0 || out >= q) {
    U256 t;
    sub_limbs(out, q, t);
    out = t;
  }
  return out;
}

inline MontParams make_mont_params(const U256& q) {
  MontParams p;
  p.q = q;
  const std::uint64_t q0 = q.w[0];
  std::uint64_t inv = q0;  // Newton iterations for q0^{-1} mod 2^64
  for (int i = 0; i < 6; ++i) inv *= 2 - q0 * inv;
  p.n0inv = ~inv + 1;
  U256 x{1};
  for (int i = 0; i < 512; ++i) {
    x = double_mod(x, q);
    if (i == 255) p.r1 = x;
  }
  p.r2 = x;
  return p;
}

inline U256 mont_redc(const U512& t_in, const MontParams& p) {
  std::uint64_t t[9];
  for (std::size_t i = 0; i < 8; ++i) t[i] = t_in.w[i];
  t[8] = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::uint64_t m = t[i] * p.n0inv;
    std::uint64_t carry = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      unsigned __int128 cur = static_cast<unsigned __int128>(m) * p.q.w[j];
      cur += t[i + j];
      cur += carry;
      t[i + j] = static_cast<std::uint64_t>(cur);
      carry = static_cast<std::uint64_t>(cur >> 64);
    }
    for (std::size_t k = i + 4; carry != 0 && k < 9; ++k) {
      unsigned __int128 cur = static_cast<unsigned __int128>(t[k]) + carry;
      t[k] = static_cast<std::uint64_t>(cur);
      carry = static_cast<std::uint64_t>(cur >> 64);
    }
  }
  U256 r{t[4], t[5], t[6], t[7]};
  if (t[8] != 0 || r >= p.q) {
    U256 o;
    sub_limbs(r, p.q, o);
    r = o;
  }
  return r;
}

inline U256 mont_mul(const U256& a, const U256& b, const MontParams& p) {
  return mont_redc(mul_wide(a, b), p);
}

inline U256 add_mod(const U256& a, const U256& b, const U256& q) {
  U256 out;
  std::uint64_t carry = add_limbs(a, b, out);
  if (carry != 0 || out >= q) {
    U256 t;
    sub_limbs(out, q, t);
    out = t;
  }
  return out;
}

inline U256 sub_mod(const U256& a, const U256& b, const U256& q) {
  U256 out;
  if (sub_limbs(a, b, out) != 0) {
    U256 t;
    add_limbs(out, q, t);
    out = t;
  }
  return out;
}

inline bool is_prime_mont(const MontParams& p) {
  const U256& n = p.q;
  U256 n_minus_1;
  sub_limbs(n, U256{1}, n_minus_1);
  U256 d = n_minus_1;
  int s = 0;
  while (!d.is_zero() && (d.w[0] & 1) == 0) {
    for (std::size_t i = 0; i < 3; ++i)
      d.w[i] = (d.w[i] >> 1) | (d.w[i + 1] << 63);
    d.w[3] >>= 1;
    ++s;
  }
  auto powmod = [&](const U256& base_resident, const U256& exp) {
    U256 acc = p.r1;
    const int bits = exp.bit_length();
    for (int i = bits - 1; i >= 0; --i) {
      acc = mont_mul(acc, acc, p);
      if (exp.bit(i)) acc = mont_mul(acc, base_resident, p);
    }
    return acc;
  };
  const U256 minus_one_resident = sub_mod(U256{}, p.r1, n);
  for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                          23ull, 29ull, 31ull, 37ull, 41ull, 43ull, 47ull,
                          53ull, 59ull, 61ull, 67ull, 71ull, 73ull, 79ull,
                          83ull, 89ull, 97ull}) {
    const U256 base = mont_mul(U256{a}, p.r2, p);  // to resident form
    U256 x = powmod(base, d);
    if (x == p.r1 || x == minus_one_resident) continue;
    bool witness = true;
    for (int i = 1; i < s; ++i) {
      x = mont_mul(x, x, p);
      if (x == minus_one_resident) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

}  // namespace detail

/// Multiplication/addition tallies for the current process. Kernels tick in
/// batches so the counts are exact, not sampled; representation conversions
/// are bookkeeping and never tick.
struct OpCounters {
  std::atomic<std::uint64_t> mul{0};
  std::atomic<std::uint64_t> add{0};
  void reset() {
    mul.store(0, std::memory_order_relaxed);
    add.store(0, std::memory_order_relaxed);
  }
};

inline OpCounters& op_counters() {
  static OpCounters counters;
  return counters;
}

/// Captures the counters at construction; muls()/adds() report the delta.
class OpCountScope {
 public:
  OpCountScope()
      : mul0_(op_counters().mul.load(std::memory_order_relaxed)),
        add0_(op_counters().add.load(std::memory_order_relaxed)) {}
  std::uint64_t muls() const {
    return op_counters().mul.load(std::memory_order_relaxed) - mul0_;
  }
  std::uint64_t adds() const {
    return op_counters().add.load(std::memory_order_relaxed) - add0_;
  }

 private:
  std::uint64_t mul0_, add0_;
};

namespace detail {
inline void tick_mul(std::uint64_t n) {
  op_counters().mul.fetch_add(n, std::memory_order_relaxed);
}
inline void tick_add(std::uint64_t n) {
  op_counters().add.fetch_add(n, std::memory_order_relaxed);
}
}  // namespace detail

/// A prime modulus plus the arithmetic engine for Z_q. Construction verifies
/// primality and fails loudly otherwise. Elements are stored in a resident
/// representation: the canonical value itself when q fits one limb, the
/// Montgomery form otherwise. Instances are pinned in memory; elements and
/// containers hold pointers to the modulus they belong to.
class FieldModulus {
 public:
  explicit FieldModulus(const U256& q) : q_(q) {
    if (cmp(q, U256{2}) < 0)
      throw std::invalid_argument("field: modulus must be at least 2");
    small_ = q.fits_u64();
    if (small_) {
      q64_ = q.low_u64();
      if (!detail::is_prime_u64(q64_))
        throw std::invalid_argument("field: modulus " + q.to_decimal() +
                                    " is not prime");
    } else {
      if ((q.w[0] & 1) == 0)
        throw std::invalid_argument("field: modulus " + q.to_decimal() +
                                    " is not prime");
      mont_ = detail::make_mont_params(q);
      if (!detail::is_prime_mont(mont_))
        throw std::invalid_argument("field: modulus " + q.to_decimal() +
                                    " is not prime");
    }
    sub_limbs(q_, U256{1}, q_minus_1_);
    sample_bits_ = q_minus_1_.bit_length();
    if (sample_bits_ == 0) sample_bits_ = 1;  // q == 2 draws one bit
  }

  FieldModulus(const FieldModulus&) = delete;
  FieldModulus& operator=(const FieldModulus&) = delete;

  static bool is_prime(const U256& n) {
    if (n.fits_u64()) return detail::is_prime_u64(n.low_u64());
    if ((n.w[0] & 1) == 0) return false;
    return detail::is_prime_mont(detail::make_mont_params(n));
  }

  /// 256-bit prime used as the default modulus throughout the tools.
  static U256 default_prime() {
    return U256{0xc2bc818f7b6bef99ull, 0xd8001f44b6b7f4b7ull,
                0x2200000085fd547full, 0xb64000000000ff2full};
  }

  static const FieldModulus& default_modulus() {
    static FieldModulus m{default_prime()};
    return m;
  }

  const U256& value() const { return q_; }
  int bits() const { return q_.bit_length(); }
  int sample_bits() const { return sample_bits_; }
  bool uses_montgomery() const { return !small_; }
  bool same(const FieldModulus& o) const { return this == &o || q_ == o.q_; }

  bool is_canonical(const U256& v) const { return v < q_; }

  // raw resident-representation arithmetic; counters are ticked by callers
  U256 add_raw(const U256& a, const U256& b) const {
    if (small_) {
      unsigned __int128 s = static_cast<unsigned __int128>(a.w[0]) + b.w[0];
      if (s >= q64_) s -= q64_;
      return U256{static_cast<std::uint64_t>(s)};
    }
    return detail::add_mod(a, b, q_);
  }

  U256 sub_raw(const U256& a, const U256& b) const {
    if (small_) {
      std::uint64_t x = a.w[0], y = b.w[0];
      return U256{x >= y ? x - y : x + (q64_ - y)};
    }
    return detail::sub_mod(a, b, q_);
  }

  U256 neg_raw(const U256& a) const { return sub_raw(U256{}, a); }

  U256 mul_raw(const U256& a, const U256& b) const {
    if (small_) return U256{detail::mulmod_u64(a.w[0], b.w[0], q64_)};
    return detail::mont_mul(a, b, mont_);
  }

  U256 to_resident(const U256& canonical) const {
    if (!is_canonical(canonical))
      throw std::invalid_argument("field: value not reduced");
    if (small_) return canonical;
    return detail::mont_mul(canonical, mont_.r2, mont_);
  }

  U256 from_resident(const U256& resident) const {
    if (small_) return resident;
    U512 wide;
    for (std::size_t i = 0; i < 4; ++i) wide.w[i] = resident.w[i];
    return detail::mont_redc(wide, mont_);
  }

  U256 zero_raw() const { return U256{}; }
  U256 one_raw() const { return small_ ? U256{1 % q64_} : mont_.r1; }

  U256 reduce(const U256& any) const { return mod_u256(any, q_); }

 private:
  U256 q_;
  U256 q_minus_1_;
  bool small_ = false;
  std::uint64_t q64_ = 0;
  detail::MontParams mont_;
  int sample_bits_ = 0;
};

/// Uniform canonical draw from [0, q). Rejection sampling: draw whole 64-bit
/// words starting at the least-significant limb, mask the top word down to
/// bit_length(q-1) bits, retry until the value is below q. For q = 2 this
/// consumes exactly one word per draw.
inline U256 sample_canonical(const FieldModulus& m, RandomSource& rng) {
  const int nbits = m.sample_bits();
  const int nwords = (nbits + 63) / 64;
  const int top_bits = nbits - 64 * (nwords - 1);
  const std::uint64_t mask =
      top_bits == 64 ? ~0ull : ((1ull << top_bits) - 1ull);
  for (;;) {
    U256 v;
    for (int i = 0; i < nwords; ++i)
      v.w[static_cast<std::size_t>(i)] = rng.next_u64();
    v.w[static_cast<std::size_t>(nwords - 1)] &= mask;
    if (m.is_canonical(v)) return v;
  }
}

class FieldElement {
 public:
  FieldElement(const FieldModulus& m, const U256& canonical)
      : mod_(&m), raw_(m.to_resident(canonical)) {}

  static FieldElement zero(const FieldModulus& m) {
    return FieldElement(&m, m.zero_raw());
  }
  static FieldElement one(const FieldModulus& m) {
    return FieldElement(&m, m.one_raw());
  }
  static FieldElement from_u64(const FieldModulus& m, std::uint64_t v) {
    return FieldElement(m, m.reduce(U256{v}));
  }
  static FieldElement random(const FieldModulus& m, RandomSource& rng) {
    return FieldElement(m, sample_canonical(m, rng));
  }
  static FieldElement from_resident(const FieldModulus& m, const U256& raw) {
    return FieldElement(&m, raw);
  }

  const FieldModulus& modulus() const { return *mod_; }
  const U256& resident() const { return raw_; }
  U256 canonical() const { return mod_->from_resident(raw_); }
  std::uint64_t canonical_u64() const {
    U256 c = canonical();
    if (!c.fits_u64())
      throw std::logic_error("field: element does not fit 64 bits");
    return c.low_u64();
  }
  bool is_zero() const { return raw_.is_zero(); }

  bool operator==(const FieldElement& o) const {
    return mod_->same(*o.mod_) && raw_ == o.raw_;
  }

 private:
  FieldElement(const FieldModulus* m, const U256& raw) : mod_(m), raw_(raw) {}
  const FieldModulus* mod_;
  U256 raw_;

  friend FieldElement fe_add(const FieldElement&, const FieldElement&);
  friend FieldElement fe_sub(const FieldElement&, const FieldElement&);
  friend FieldElement fe_mul(const FieldElement&, const FieldElement&);
  friend FieldElement fe_neg(const FieldElement&);
};

namespace detail {
inline void require_same_modulus(const FieldModulus& a, const FieldModulus& b) {
  if (!a.same(b))
    throw std::invalid_argument("field: mixed moduli in one operation");
}
}  // namespace detail

inline FieldElement fe_add(const FieldElement& a, const FieldElement& b) {
  detail::require_same_modulus(a.modulus(), b.modulus());
  detail::tick_add(1);
  return FieldElement(a.mod_, a.mod_->add_raw(a.raw_, b.raw_));
}

inline FieldElement fe_sub(const FieldElement& a, const FieldElement& b) {
  detail::require_same_modulus(a.modulus(), b.modulus());
  detail::tick_add(1);
  return FieldElement(a.mod_, a.mod_->sub_raw(a.raw_, b.raw_));
}

inline FieldElement fe_mul(const FieldElement& a, const FieldElement& b) {
  detail::require_same_modulus(a.modulus(), b.modulus());
  detail::tick_mul(1);
  return FieldElement(a.mod_, a.mod_->mul_raw(a.raw_, b.raw_));
}

inline FieldElement fe_neg(const FieldElement& a) {
  return FieldElement(a.mod_, a.mod_->neg_raw(a.raw_));
}

inline FieldElement operator+(const FieldElement& a, const FieldElement& b) {
  return fe_add(a, b);
}
inline FieldElement operator-(const FieldElement& a, const FieldElement& b) {
  return fe_sub(a, b);
}
inline FieldElement operator*(const FieldElement& a, const FieldElement& b) {
  return fe_mul(a, b);
}
inline FieldElement operator-(const FieldElement& a) { return fe_neg(a); }

/// Dense vector over Z_q, resident representation, contiguous storage.
class FieldVector {
 public:
  FieldVector(const FieldModulus& m, std::size_t dim)
      : mod_(&m), raw_(check_dim(dim), U256{}) {}

  static FieldVector random(const FieldModulus& m, std::size_t dim,
                            RandomSource& rng) {
    FieldVector v(m, dim);
    for (auto& cell : v.raw_) cell = m.to_resident(sample_canonical(m, rng));
    return v;
  }

  static FieldVector from_u64(const FieldModulus& m,
                              std::span<const std::uint64_t> vals) {
    FieldVector v(m, vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i)
      v.raw_[i] = m.to_resident(m.reduce(U256{vals[i]}));
    return v;
  }

  static FieldVector from_u64(const FieldModulus& m,
                              std::initializer_list<std::uint64_t> vals) {
    return from_u64(m, std::span<const std::uint64_t>(vals.begin(),
                                                      vals.size()));
  }

  const FieldModulus& modulus() const { return *mod_; }
  std::size_t dim() const { return raw_.size(); }

  FieldElement at(std::size_t i) const {
    return FieldElement::from_resident(*mod_, raw_.at(i));
  }
  void set(std::size_t i, const FieldElement& v) {
    detail::require_same_modulus(*mod_, v.modulus());
    raw_.at(i) = v.resident();
  }

  std::span<const U256> resident_data() const { return raw_; }
  std::span<U256> resident_data() { return raw_; }

  std::vector<U256> canonical_entries() const {
    std::vector<U256> out;
    out.reserve(raw_.size());
    for (const auto& cell : raw_) out.push_back(mod_->from_resident(cell));
    return out;
  }

  bool operator==(const FieldVector& o) const {
    return mod_->same(*o.mod_) && raw_ == o.raw_;
  }

 private:
  static std::size_t check_dim(std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("field: vector dim must be > 0");
    return dim;
  }
  const FieldModulus* mod_;
  std::vector<U256> raw_;

  friend FieldVector vec_add(const FieldVector&, const FieldVector&);
  friend FieldVector vec_sub(const FieldVector&, const FieldVector&);
  friend FieldElement dot(const FieldVector&, const FieldVector&);
  friend class FieldMatrix;
  friend FieldVector mat_vec_mul(const class FieldMatrix&, const FieldVector&);
  friend FieldVector vec_mat_mul(const FieldVector&, const class FieldMatrix&);
};

/// Dense row-major matrix over Z_q. Indices are 0-based here; protocol-level
/// share labels stay 1-based where the covering scheme speaks of them.
class FieldMatrix {
 public:
  FieldMatrix(const FieldModulus& m, std::size_t rows, std::size_t cols)
      : mod_(&m), rows_(check_dim(rows)), cols_(check_dim(cols)),
        raw_(rows * cols, U256{}) {}

  static FieldMatrix random(const FieldModulus& m, std::size_t rows,
                            std::size_t cols, RandomSource& rng) {
    FieldMatrix out(m, rows, cols);
    for (auto& cell : out.raw_) cell = m.to_resident(sample_canonical(m, rng));
    return out;
  }

  static FieldMatrix from_u64(
      const FieldModulus& m,
      std::initializer_list<std::initializer_list<std::uint64_t>> rows) {
    if (rows.size() == 0)
      throw std::invalid_argument("field: matrix rows must be > 0");
    FieldMatrix out(m, rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
      if (row.size() != out.cols_)
        throw std::invalid_argument("field: ragged matrix literal");
      std::size_t c = 0;
      for (std::uint64_t v : row)
        out.raw_[r * out.cols_ + c++] = m.to_resident(m.reduce(U256{v}));
      ++r;
    }
    return out;
  }

  const FieldModulus& modulus() const { return *mod_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  FieldElement at(std::size_t r, std::size_t c) const {
    return FieldElement::from_resident(*mod_, raw_.at(r * cols_ + c));
  }
  void set(std::size_t r, std::size_t c, const FieldElement& v) {
    detail::require_same_modulus(*mod_, v.modulus());
    raw_.at(r * cols_ + c) = v.resident();
  }

  std::span<const U256> resident_data() const { return raw_; }
  std::span<U256> resident_data() { return raw_; }

  bool operator==(const FieldMatrix& o) const {
    return mod_->same(*o.mod_) && rows_ == o.rows_ && cols_ == o.cols_ &&
           raw_ == o.raw_;
  }

 private:
  static std::size_t check_dim(std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("field: matrix dim must be > 0");
    return dim;
  }
  const FieldModulus* mod_;
  std::size_t rows_, cols_;
  std::vector<U256> raw_;

  friend FieldMatrix mat_add(const FieldMatrix&, const FieldMatrix&);
  friend FieldMatrix mat_sub(const FieldMatrix&, const FieldMatrix&);
  friend FieldVector mat_vec_mul(const FieldMatrix&, const FieldVector&);
  friend FieldVector vec_mat_mul(const FieldVector&, const FieldMatrix&);
};

inline FieldVector vec_add(const FieldVector& a, const FieldVector& b) {
  detail::require_same_modulus(a.modulus(), b.modulus());
  if (a.dim() != b.dim())
    throw std::invalid_argument("field: vector dims differ");
  FieldVector out(a.modulus(), a.dim());
  const FieldModulus& m = a.modulus();
  for (std::size_t i = 0; i < a.dim(); ++i)
    out.raw_[i] = m.add_raw(a.raw_[i], b.raw_[i]);
  detail::tick_add(a.dim());
  return out;
}

inline FieldVector vec_sub(const FieldVector& a, const FieldVector& b) {
  detail::require_same_modulus(a.modulus(), b.modulus());
  if (a.dim() != b.dim())
    throw std::invalid_argument("field: vector dims differ");
  FieldVector out(a.modulus(), a.dim());
  const FieldModulus& m = a.modulus();
  for (std::size_t i = 0; i < a.dim(); ++i)
    out.raw_[i] = m.sub_raw(a.raw_[i], b.raw_[i]);
  detail::tick_add(a.dim());
  return out;
}

inline FieldMatrix mat_add(const FieldMatrix& a, const FieldMatrix& b) {
  detail::require_same_modulus(a.modulus(), b.modulus());
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("field: matrix dims differ");
  FieldMatrix out(a.modulus(), a.rows(), a.cols());
  const FieldModulus& m = a.modulus();
  for (std::size_t i = 0; i < a.raw_.size(); ++i)
    out.raw_[i] = m.add_raw(a.raw_[i], b.raw_[i]);
  detail::tick_add(a.raw_.size());
  return out;
}

inline FieldMatrix mat_sub(const FieldMatrix& a, const FieldMatrix& b) {
  detail::require_same_modulus(a.modulus(), b.modulus());
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("field: matrix dims differ");
  FieldMatrix out(a.modulus(), a.rows(), a.cols());
  const FieldModulus& m = a.modulus();
  for (std::size_t i = 0; i < a.raw_.size(); ++i)
    out.raw_[i] = m.sub_raw(a.raw_[i], b.raw_[i]);
  detail::tick_add(a.raw_.size());
  return out;
}

/// Inner product; ticks exactly dim multiplications.
inline FieldElement dot(const FieldVector& a, const FieldVector& b) {
  detail::require_same_modulus(a.modulus(), b.modulus());
  if (a.dim() != b.dim())
    throw std::invalid_argument("field: vector dims differ");
  const FieldModulus& m = a.modulus();
  U256 acc{};
  for (std::size_t i = 0; i < a.dim(); ++i)
    acc = m.add_raw(acc, m.mul_raw(a.raw_[i], b.raw_[i]));
  detail::tick_mul(a.dim());
  detail::tick_add(a.dim() > 0 ? a.dim() - 1 : 0);
  return FieldElement::from_resident(m, acc);
}

/// y = M x; ticks exactly rows*cols multiplications.
inline FieldVector mat_vec_mul(const FieldMatrix& M, const FieldVector& x) {
  detail::require_same_modulus(M.modulus(), x.modulus());
  if (M.cols() != x.dim())
    throw std::invalid_argument("field: matrix/vector dims differ");
  const FieldModulus& m = M.modulus();
  FieldVector y(m, M.rows());
  for (std::size_t r = 0; r < M.rows(); ++r) {
    U256 acc{};
    const U256* row = &M.raw_[r * M.cols()];
    for (std::size_t c = 0; c < M.cols(); ++c)
      acc = m.add_raw(acc, m.mul_raw(row[c], x.raw_[c]));
    y.raw_[r] = acc;
  }
  detail::tick_mul(static_cast<std::uint64_t>(M.rows()) * M.cols());
  detail::tick_add(static_cast<std::uint64_t>(M.rows()) *
                   (M.cols() > 0 ? M.cols() - 1 : 0));
  return y;
}

/// s = r M (row vector times matrix); ticks exactly rows*cols multiplications.
inline FieldVector vec_mat_mul(const FieldVector& r, const FieldMatrix& M) {
  detail::require_same_modulus(r.modulus(), M.modulus());
  if (r.dim() != M.rows())
    throw std::invalid_argument("field: vector/matrix dims differ");
  const FieldModulus& m = M.modulus();
  FieldVector s(m, M.cols());
  for (std::size_t i = 0; i < M.rows(); ++i) {
    const U256& ri = r.raw_[i];
    const U256* row = &M.raw_[i * M.cols()];
    for (std::size_t c = 0; c < M.cols(); ++c)
      s.raw_[c] = m.add_raw(s.raw_[c], m.mul_raw(ri, row[c]));
  }
  detail::tick_mul(static_cast<std::uint64_t>(M.rows()) * M.cols());
  detail::tick_add(static_cast<std::uint64_t>(M.rows()) * M.cols());
  return s;
}

inline FieldVector random_vector(const FieldModulus& m, std::size_t dim,
                                 RandomSource& rng) {
  return FieldVector::random(m, dim, rng);
}

inline FieldMatrix random_matrix(const FieldModulus& m, std::size_t rows,
                                 std::size_t cols, RandomSource& rng) {
  return FieldMatrix::random(m, rows, cols, rng);
}

}  // namespace msvc
