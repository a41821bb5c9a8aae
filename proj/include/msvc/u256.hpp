#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace msvc {

/// Fixed-width 256-bit unsigned integer, four 64-bit limbs, little-endian
/// limb order (w[0] is least significant). This is the raw storage type for
/// field elements; it carries no modulus and does no reduction on its own.
struct U256 {
  std::array<std::uint64_t, 4> w{};

  constexpr U256() = default;
  explicit constexpr U256(std::uint64_t lo) : w{lo, 0, 0, 0} {}
  constexpr U256(std::uint64_t w0, std::uint64_t w1, std::uint64_t w2,
                 std::uint64_t w3)
      : w{w0, w1, w2, w3} {}

  constexpr bool is_zero() const { return (w[0] | w[1] | w[2] | w[3]) == 0; }
  constexpr bool fits_u64() const { return (w[1] | w[2] | w[3]) == 0; }
  constexpr std::uint64_t low_u64() const { return w[0]; }

  constexpr bool bit(int i) const {
    return (w[static_cast<std::size_t>(i) / 64] >>
            (static_cast<std::size_t>(i) % 64)) &
           1u;
  }

  int bit_length() const {
    for (int limb = 3; limb >= 0; --limb) {
      if (w[static_cast<std::size_t>(limb)] != 0) {
        return 64 * limb +
               64 - __builtin_clzll(w[static_cast<std::size_t>(limb)]);
      }
    }
    return 0;
  }

  bool operator==(const U256&) const = default;

  static U256 from_bytes_be(std::span<const std::uint8_t, 32> bytes) {
    U256 out;
    for (int limb = 0; limb < 4; ++limb) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) {
        v = (v << 8) | bytes[static_cast<std::size_t>((3 - limb) * 8 + b)];
      }
      out.w[static_cast<std::size_t>(limb)] = v;
    }
    return out;
  }

  void to_bytes_be(std::span<std::uint8_t, 32> bytes) const {
    for (int limb = 0; limb < 4; ++limb) {
      std::uint64_t v = w[static_cast<std::size_t>(limb)];
      for (int b = 7; b >= 0; --b) {
        bytes[static_cast<std::size_t>((3 - limb) * 8 + b)] =
            static_cast<std::uint8_t>(v & 0xff);
        v >>= 8;
      }
    }
  }

  static U256 from_decimal(std::string_view text);
  static U256 from_hex(std::string_view text);
  std::string to_decimal() const;
  std::string to_hex() const;
};

inline int cmp(const U256& a, const U256& b) {
  for (int i = 3; i >= 0; --i) {
    const auto ai = a.w[static_cast<std::size_t>(i)];
    const auto bi = b.w[static_cast<std::size_t>(i)];
    if (ai != bi) return ai < bi ? -1 : 1;
  }
  return 0;
}

inline bool operator<(const U256& a, const U256& b) { return cmp(a, b) < 0; }
inline bool operator<=(const U256& a, const U256& b) { return cmp(a, b) <= 0; }
inline bool operator>(const U256& a, const U256& b) { return cmp(a, b) > 0; }
inline bool operator>=(const U256& a, const U256& b) { return cmp(a, b) >= 0; }

/// out = a + b; returns the carry out of the top limb (0 or 1).
inline std::uint64_t add_limbs(const U256& a, const U256& b, U256& out) {
  unsigned __int128 carry = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    carry += a.w[i];
    carry += b.w[i];
    out.w[i] = static_cast<std::uint64_t>(carry);
    carry >>= 64;
  }
  return static_cast<std::uint64_t>(carry);
}

/// out = a - b; returns the borrow out of the top limb (0 or 1).
inline std::uint64_t sub_limbs(const U256& a, const U256& b, U256& out) {
  std::uint64_t borrow = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::uint64_t ai = a.w[i];
    const std::uint64_t bi = b.w[i];
    const std::uint64_t d0 = ai - bi;
    const std::uint64_t b0 = static_cast<std::uint64_t>(ai < bi);
    out.w[i] = d0 - borrow;
    borrow = b0 | static_cast<std::uint64_t>(d0 < borrow);
  }
  return borrow;
}

/// 512-bit product workspace for 256x256 multiplies and Montgomery reduction.
struct U512 {
  std::array<std::uint64_t, 8> w{};
  bool operator==(const U512&) const = default;
};

inline U512 mul_wide(const U256& a, const U256& b) {
  U512 out;
  for (std::size_t i = 0; i < 4; ++i) {
    std::uint64_t carry = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      unsigned __int128 cur = static_cast<unsigned __int128>(a.w[i]) * b.w[j];
      cur += out.w[i + j];
      cur += carry;
      out.w[i + j] = static_cast<std::uint64_t>(cur);
      carry = static_cast<std::uint64_t>(cur >> 64);
    }
    out.w[i + 4] = carry;
  }
  return out;
}

/// Quotient and remainder of division by a single 64-bit limb.
inline std::pair<U256, std::uint64_t> div_u64(const U256& a, std::uint64_t d) {
  if (d == 0) throw std::invalid_argument("u256: division by zero");
  U256 q;
  unsigned __int128 rem = 0;
  for (int i = 3; i >= 0; --i) {
    rem = (rem << 64) | a.w[static_cast<std::size_t>(i)];
    q.w[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(rem / d);
    rem %= d;
  }
  return {q, static_cast<std::uint64_t>(rem)};
}

/// x mod q by binary long division. Off the hot path; used when reducing
/// arbitrary (possibly unreduced) inputs at API boundaries.
inline U256 mod_u256(const U256& x, const U256& q) {
  if (q.is_zero()) throw std::invalid_argument("u256: modulus is zero");
  if (x < q) return x;
  if (q.fits_u64() && x.fits_u64()) return U256{x.low_u64() % q.low_u64()};
  U256 rem;
  for (int i = x.bit_length() - 1; i >= 0; --i) {
    std::uint64_t top = rem.w[3] >> 63;
    rem.w[3] = (rem.w[3] << 1) | (rem.w[2] >> 63);
    rem.w[2] = (rem.w[2] << 1) | (rem.w[1] >> 63);
    rem.w[1] = (rem.w[1] << 1) | (rem.w[0] >> 63);
    rem.w[0] = (rem.w[0] << 1) | static_cast<std::uint64_t>(x.bit(i));
    if (top != 0 || rem >= q) {
      U256 t;
      sub_limbs(rem, q, t);
      rem = t;
    }
  }
  return rem;
}

inline U256 U256::from_decimal(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("u256: empty decimal literal");
  U256 out;
  for (char c : text) {
    if (c < '0' || c > '9')
      throw std::invalid_argument("u256: bad decimal digit");
    // out = out * 10 + digit, with overflow detection
    unsigned __int128 carry = static_cast<unsigned __int128>(c - '0');
    for (std::size_t i = 0; i < 4; ++i) {
      carry += static_cast<unsigned __int128>(out.w[i]) * 10;
      out.w[i] = static_cast<std::uint64_t>(carry);
      carry >>= 64;
    }
    if (carry != 0)
      throw std::overflow_error("u256: decimal literal exceeds 256 bits");
  }
  return out;
}

inline U256 U256::from_hex(std::string_view text) {
  if (text.starts_with("0x") || text.starts_with("0X")) text.remove_prefix(2);
  if (text.empty() || text.size() > 64)
    throw std::invalid_argument("u256: bad hex literal");
  U256 out;
  for (char c : text) {
    int digit;
    if (c >= '0' && c <= '9')
      digit = c - '0';
    else if (c >= 'a' && c <= 'f')
      digit = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F')
      digit = c - 'A' + 10;
    else
      throw std::invalid_argument("u256: bad hex digit");
    std::uint64_t top = out.w[3] >> 60;
    if (top != 0) throw std::overflow_error("u256: hex literal exceeds 256 bits");
    for (int i = 3; i > 0; --i) {
      out.w[static_cast<std::size_t>(i)] =
          (out.w[static_cast<std::size_t>(i)] << 4) |
          (out.w[static_cast<std::size_t>(i - 1)] >> 60);
    }
    out.w[0] = (out.w[0] << 4) | static_cast<std::uint64_t>(digit);
  }
  return out;
}

inline std::string U256::to_decimal() const {
  if (is_zero()) return "0";
  std::string digits;
  U256 cur = *this;
  while (!cur.is_zero()) {
    auto [q, r] = div_u64(cur, 10);
    digits.push_back(static_cast<char>('0' + r));
    cur = q;
  }
  return {digits.rbegin(), digits.rend()};
}

inline std::string U256::to_hex() const {
  static const char* kHex = "0123456789abcdef";
  std::string out = "0x";
  bool seen = false;
  for (int i = 255; i >= 0; i -= 4) {
    int nibble = 0;
    for (int b = 3; b >= 0; --b) nibble = (nibble << 1) | (bit(i - 3 + b) ? 1 : 0);
    if (nibble != 0 || seen || i == 3) {
      out.push_back(kHex[nibble]);
      seen = true;
    }
  }
  return out;
}

}  // namespace msvc
