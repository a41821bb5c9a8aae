#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace msvc {

/// Source of uniform 64-bit words. All randomized operations in the library
/// take one of these, so tests can substitute a seeded generator (or a
/// scripted tape) and replay runs exactly.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual std::uint64_t next_u64() = 0;

  void fill_bytes(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
      std::uint64_t word = next_u64();
      for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
        out[i] = static_cast<std::uint8_t>(word & 0xff);
        word >>= 8;
      }
    }
  }
};

namespace detail {

inline void chacha_quarter_round(std::uint32_t& a, std::uint32_t& b,
                                 std::uint32_t& c, std::uint32_t& d) {
  auto rotl = [](std::uint32_t x, int n) {
    return (x << n) | (x >> (32 - n));
  };
  a += b; d ^= a; d = rotl(d, 16);
  c += d; b ^= c; b = rotl(b, 12);
  a += b; d ^= a; d = rotl(d, 8);
  c += d; b ^= c; b = rotl(b, 7);
}

/// One ChaCha20 block: 64 bytes of keystream from (key, nonce, counter).
inline void chacha20_block(const std::array<std::uint32_t, 8>& key,
                           const std::array<std::uint32_t, 3>& nonce,
                           std::uint32_t counter,
                           std::span<std::uint8_t, 64> out) {
  std::array<std::uint32_t, 16> state = {
      0x61707865, 0x3320646e, 0x79622d32, 0x6b206574,
      key[0],     key[1],     key[2],     key[3],
      key[4],     key[5],     key[6],     key[7],
      counter,    nonce[0],   nonce[1],   nonce[2]};
  std::array<std::uint32_t, 16> x = state;
  for (int round = 0; round < 10; ++round) {
    chacha_quarter_round(x[0], x[4], x[8], x[12]);
    chacha_quarter_round(x[1], x[5], x[9], x[13]);
    chacha_quarter_round(x[2], x[6], x[10], x[14]);
    chacha_quarter_round(x[3], x[7], x[11], x[15]);
    chacha_quarter_round(x[0], x[5], x[10], x[15]);
    chacha_quarter_round(x[1], x[6], x[11], x[12]);
    chacha_quarter_round(x[2], x[7], x[8], x[13]);
    chacha_quarter_round(x[3], x[4], x[9], x[14]);
  }
  for (std::size_t i = 0; i < 16; ++i) {
    std::uint32_t word = x[i] + state[i];
    out[4 * i + 0] = static_cast<std::uint8_t>(word & 0xff);
    out[4 * i + 1] = static_cast<std::uint8_t>((word >> 8) & 0xff);
    out[4 * i + 2] = static_cast<std::uint8_t>((word >> 16) & 0xff);
    out[4 * i + 3] = static_cast<std::uint8_t>((word >> 24) & 0xff);
  }
}

}  // namespace detail

/// Deterministic generator: ChaCha20 keystream consumed 8 bytes at a time,
/// little-endian. Same seed, same word sequence, on every platform.
class ChaChaRng final : public RandomSource {
 public:
  explicit ChaChaRng(std::uint64_t seed) {
    key_.fill(0);
    key_[0] = static_cast<std::uint32_t>(seed & 0xffffffffu);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    nonce_ = {0, 0, 0};
  }

  ChaChaRng(std::span<const std::uint8_t, 32> key,
            std::span<const std::uint8_t, 12> nonce) {
    auto load32 = [](std::span<const std::uint8_t> b, std::size_t off) {
      return static_cast<std::uint32_t>(b[off]) |
             (static_cast<std::uint32_t>(b[off + 1]) << 8) |
             (static_cast<std::uint32_t>(b[off + 2]) << 16) |
             (static_cast<std::uint32_t>(b[off + 3]) << 24);
    };
    for (std::size_t i = 0; i < 8; ++i) key_[i] = load32(key, 4 * i);
    for (std::size_t i = 0; i < 3; ++i) nonce_[i] = load32(nonce, 4 * i);
  }

  std::uint64_t next_u64() override {
    if (pos_ == block_.size()) {
      detail::chacha20_block(key_, nonce_, counter_++, block_);
      pos_ = 0;
    }
    std::uint64_t word = 0;
    for (int b = 7; b >= 0; --b) {
      word = (word << 8) | block_[pos_ + static_cast<std::size_t>(b)];
    }
    pos_ += 8;
    return word;
  }

 private:
  std::array<std::uint32_t, 8> key_{};
  std::array<std::uint32_t, 3> nonce_{};
  std::uint32_t counter_ = 0;
  std::array<std::uint8_t, 64> block_{};
  std::size_t pos_ = 64;
};

/// OS-entropy-backed source for production key generation.
class SystemRng final : public RandomSource {
 public:
  std::uint64_t next_u64() override {
    return (static_cast<std::uint64_t>(dev_()) << 32) |
           static_cast<std::uint64_t>(dev_());
  }

 private:
  std::random_device dev_;
};

/// Replays a fixed list of words, then throws. Lets tests enumerate every
/// possible randomness tape of a bounded computation.
class TapeRng final : public RandomSource {
 public:
  explicit TapeRng(std::vector<std::uint64_t> words)
      : words_(std::move(words)) {}

  std::uint64_t next_u64() override {
    if (pos_ >= words_.size())
      throw std::runtime_error("tape rng: tape exhausted");
    return words_[pos_++];
  }

  std::size_t consumed() const { return pos_; }

 private:
  std::vector<std::uint64_t> words_;
  std::size_t pos_ = 0;
};

}  // namespace msvc
