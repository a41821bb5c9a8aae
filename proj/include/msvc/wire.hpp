#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "msvc/covering.hpp"
#include "msvc/field.hpp"
#include "msvc/protocol.hpp"
#include "msvc/u256.hpp"

namespace msvc {

// Frame layout: 4-byte big-endian length over the rest, 1-byte tag, payload.
// Field elements travel as 32-byte big-endian canonical values; every
// element-bearing message carries its modulus so a frame can be checked for
// canonicality on its own.  Maps are length-prefixed and written in key order.

struct WireError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ErrorCode : std::uint8_t {
  malformed = 1,
  unknown_session = 2,
  dup_setup = 3,
  bad_dims = 4,
  internal = 5,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::malformed:
      return "MALFORMED";
    case ErrorCode::unknown_session:
      return "UNKNOWN_SESSION";
    case ErrorCode::dup_setup:
      return "DUP_SETUP";
    case ErrorCode::bad_dims:
      return "BAD_DIMS";
    case ErrorCode::internal:
      return "INTERNAL";
  }
  return "UNKNOWN";
}

// Preprocessing payload for one server: its function shares plus the slice of
// the covering scheme it needs to answer later input shares.
struct SetupShares {
  std::string session_id;
  int server_index = 0;  // 1-based
  std::uint64_t scheme_digest = 0;
  SchemeSlice slice;
  std::shared_ptr<const FieldModulus> modulus;
  std::map<int, FieldMatrix> function_shares;

  bool operator==(const SetupShares& o) const {
    return session_id == o.session_id && server_index == o.server_index &&
           scheme_digest == o.scheme_digest && slice == o.slice &&
           modulus->value() == o.modulus->value() &&
           function_shares == o.function_shares;
  }
};

struct InputShares {
  std::string session_id;
  std::uint64_t request_id = 0;
  std::shared_ptr<const FieldModulus> modulus;
  std::map<int, FieldVector> input_shares;

  bool operator==(const InputShares& o) const {
    return session_id == o.session_id && request_id == o.request_id &&
           modulus->value() == o.modulus->value() &&
           input_shares == o.input_shares;
  }
};

// Also doubles as the acknowledgement for SetupShares, with an empty map.
struct Results {
  std::string session_id;
  std::uint64_t request_id = 0;
  std::shared_ptr<const FieldModulus> modulus;
  std::map<std::pair<int, int>, FieldVector> outputs;

  bool operator==(const Results& o) const {
    return session_id == o.session_id && request_id == o.request_id &&
           modulus->value() == o.modulus->value() && outputs == o.outputs;
  }
};

struct ErrorReply {
  ErrorCode code = ErrorCode::internal;
  std::string detail;

  bool operator==(const ErrorReply&) const = default;
};

using WireMessage = std::variant<SetupShares, InputShares, Results, ErrorReply>;

inline std::shared_ptr<const FieldModulus> borrow_modulus(
    const FieldModulus& m) {
  return std::shared_ptr<const FieldModulus>(
      std::shared_ptr<const FieldModulus>(), &m);
}

inline bool valid_session_id(const std::string& s) {
  if (s.empty() || s.size() > 64) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

namespace detail {

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) {
  out.push_back(v);
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u256(std::vector<std::uint8_t>& out, const U256& v) {
  std::uint8_t buf[32];
  v.to_bytes_be(buf);
  out.insert(out.end(), buf, buf + 32);
}

inline void put_session(std::vector<std::uint8_t>& out, const std::string& s) {
  if (!valid_session_id(s))
    throw std::invalid_argument(
        "wire: session id must be 1-64 chars of [A-Za-z0-9_-]");
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

inline void put_index(std::vector<std::uint8_t>& out, int v) {
  if (v < 0) throw std::invalid_argument("wire: negative index");
  put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_vector(std::vector<std::uint8_t>& out, const FieldVector& v) {
  put_u32(out, static_cast<std::uint32_t>(v.dim()));
  for (std::size_t i = 0; i < v.dim(); ++i) put_u256(out, v.at(i).canonical());
}

inline void put_matrix(std::vector<std::uint8_t>& out, const FieldMatrix& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      put_u256(out, m.at(r, c).canonical());
}

inline void put_slice(std::vector<std::uint8_t>& out, const SchemeSlice& s) {
  put_index(out, s.k);
  put_index(out, s.a);
  put_index(out, s.b);
  put_index(out, s.server_index);
  put_u32(out, static_cast<std::uint32_t>(s.A.size()));
  for (int u : s.A) put_index(out, u);
  put_u32(out, static_cast<std::uint32_t>(s.B.size()));
  for (int v : s.B) put_index(out, v);
  put_u32(out, static_cast<std::uint32_t>(s.C.size()));
  for (const auto& [u, v] : s.C) {
    put_index(out, u);
    put_index(out, v);
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> buf) : buf_(buf) {}

  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | buf_[pos_++];
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | buf_[pos_++];
    return v;
  }

  U256 u256() {
    need(32);
    U256 v = U256::from_bytes_be(
        std::span<const std::uint8_t, 32>(buf_.data() + pos_, 32));
    pos_ += 32;
    return v;
  }

  std::string session() {
    std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
    pos_ += len;
    if (!valid_session_id(s)) throw WireError("wire: bad session id");
    return s;
  }

  std::string text(std::size_t cap) {
    std::uint32_t len = u32();
    if (len > cap) throw WireError("wire: oversized text field");
    need(len);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  // bounds the element count of a container before it gets allocated
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw WireError("wire: truncated frame");
  }

  void need_elements(std::size_t count) const { need(count * 32); }

  bool done() const { return pos_ == buf_.size(); }

 private:
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

inline int read_index(ByteReader& r) {
  std::uint32_t v = r.u32();
  if (v > 1u << 20) throw WireError("wire: index out of range");
  return static_cast<int>(v);
}

inline std::shared_ptr<const FieldModulus> read_modulus(ByteReader& r) {
  U256 q = r.u256();
  try {
    return std::make_shared<const FieldModulus>(q);
  } catch (const std::invalid_argument& e) {
    throw WireError(std::string("wire: ") + e.what());
  }
}

inline FieldElement read_element(ByteReader& r, const FieldModulus& m) {
  U256 v = r.u256();
  if (!m.is_canonical(v)) throw WireError("wire: non-canonical element");
  return FieldElement(m, v);
}

inline FieldVector read_vector(ByteReader& r, const FieldModulus& m) {
  std::uint32_t dim = r.u32();
  if (dim == 0) throw WireError("wire: empty vector");
  r.need_elements(dim);
  FieldVector v(m, dim);
  for (std::uint32_t i = 0; i < dim; ++i) v.set(i, read_element(r, m));
  return v;
}

inline FieldMatrix read_matrix(ByteReader& r, const FieldModulus& m) {
  std::uint32_t rows = r.u32();
  std::uint32_t cols = r.u32();
  if (rows == 0 || cols == 0) throw WireError("wire: empty matrix");
  r.need_elements(static_cast<std::size_t>(rows) * cols);
  FieldMatrix mat(m, rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) mat.set(i, j, read_element(r, m));
  return mat;
}

inline SchemeSlice read_slice(ByteReader& r) {
  SchemeSlice s;
  s.k = read_index(r);
  s.a = read_index(r);
  s.b = read_index(r);
  s.server_index = read_index(r);
  std::uint32_t na = r.u32();
  for (std::uint32_t i = 0; i < na; ++i) s.A.push_back(read_index(r));
  std::uint32_t nb = r.u32();
  for (std::uint32_t i = 0; i < nb; ++i) s.B.push_back(read_index(r));
  std::uint32_t nc = r.u32();
  for (std::uint32_t i = 0; i < nc; ++i) {
    int u = read_index(r);
    int v = read_index(r);
    s.C.emplace_back(u, v);
  }
  auto strictly_increasing_within = [](const std::vector<int>& set, int hi) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set[i] < 1 || set[i] > hi) return false;
      if (i > 0 && set[i] <= set[i - 1]) return false;
    }
    return !set.empty();
  };
  bool ok = s.k >= 1 && s.a >= 1 && s.b >= 1 && s.server_index >= 1 &&
            s.server_index <= s.k && strictly_increasing_within(s.A, s.a) &&
            strictly_increasing_within(s.B, s.b);
  if (ok) {
    for (std::size_t i = 0; i < s.C.size(); ++i) {
      if (i > 0 && s.C[i] <= s.C[i - 1]) ok = false;
      if (!std::binary_search(s.A.begin(), s.A.end(), s.C[i].first) ||
          !std::binary_search(s.B.begin(), s.B.end(), s.C[i].second))
        ok = false;
    }
  }
  if (!ok) throw WireError("wire: bad scheme slice");
  return s;
}

constexpr std::uint8_t tag_setup = 1;
constexpr std::uint8_t tag_input = 2;
constexpr std::uint8_t tag_results = 3;
constexpr std::uint8_t tag_error = 4;

}  // namespace detail

/// FNV-1a over the canonical serialization of a covering scheme; lets a server
/// detect a client talking about a different scheme under the same session.
inline std::uint64_t scheme_digest(const CoveringScheme& s) {
  std::vector<std::uint8_t> buf;
  detail::put_u32(buf, static_cast<std::uint32_t>(s.k));
  detail::put_u32(buf, static_cast<std::uint32_t>(s.a));
  detail::put_u32(buf, static_cast<std::uint32_t>(s.b));
  for (const auto& side : {s.A, s.B}) {
    detail::put_u32(buf, static_cast<std::uint32_t>(side.size()));
    for (const auto& set : side) {
      detail::put_u32(buf, static_cast<std::uint32_t>(set.size()));
      for (int e : set) detail::put_u32(buf, static_cast<std::uint32_t>(e));
    }
  }
  detail::put_u32(buf, static_cast<std::uint32_t>(s.C.size()));
  for (const auto& cell : s.C) {
    detail::put_u32(buf, static_cast<std::uint32_t>(cell.size()));
    for (const auto& [u, v] : cell) {
      detail::put_u32(buf, static_cast<std::uint32_t>(u));
      detail::put_u32(buf, static_cast<std::uint32_t>(v));
    }
  }
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t byte : buf) {
    h ^= byte;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::vector<std::uint8_t> encode_message(const WireMessage& msg) {
  std::vector<std::uint8_t> body;
  std::visit(
      [&body](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SetupShares>) {
          detail::put_u8(body, detail::tag_setup);
          detail::put_session(body, m.session_id);
          detail::put_index(body, m.server_index);
          detail::put_u64(body, m.scheme_digest);
          detail::put_slice(body, m.slice);
          detail::put_u256(body, m.modulus->value());
          detail::put_u32(body,
                          static_cast<std::uint32_t>(m.function_shares.size()));
          for (const auto& [u, share] : m.function_shares) {
            detail::put_index(body, u);
            detail::put_matrix(body, share);
          }
        } else if constexpr (std::is_same_v<T, InputShares>) {
          detail::put_u8(body, detail::tag_input);
          detail::put_session(body, m.session_id);
          detail::put_u64(body, m.request_id);
          detail::put_u256(body, m.modulus->value());
          detail::put_u32(body,
                          static_cast<std::uint32_t>(m.input_shares.size()));
          for (const auto& [v, share] : m.input_shares) {
            detail::put_index(body, v);
            detail::put_vector(body, share);
          }
        } else if constexpr (std::is_same_v<T, Results>) {
          detail::put_u8(body, detail::tag_results);
          detail::put_session(body, m.session_id);
          detail::put_u64(body, m.request_id);
          detail::put_u256(body, m.modulus->value());
          detail::put_u32(body, static_cast<std::uint32_t>(m.outputs.size()));
          for (const auto& [pair, y] : m.outputs) {
            detail::put_index(body, pair.first);
            detail::put_index(body, pair.second);
            detail::put_vector(body, y);
          }
        } else {
          detail::put_u8(body, detail::tag_error);
          detail::put_u8(body, static_cast<std::uint8_t>(m.code));
          std::string_view d(m.detail);
          d = d.substr(0, 4096);
          detail::put_u32(body, static_cast<std::uint32_t>(d.size()));
          body.insert(body.end(), d.begin(), d.end());
        }
      },
      msg);
  std::vector<std::uint8_t> out;
  out.reserve(4 + body.size());
  detail::put_u32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

/// Length of the frame body announced by a 4-byte header.
inline std::uint32_t frame_body_length(
    std::span<const std::uint8_t, 4> header) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | header[static_cast<size_t>(i)];
  return v;
}

inline WireMessage decode_message(std::span<const std::uint8_t> frame) {
  if (frame.size() < 5) throw WireError("wire: truncated frame");
  detail::ByteReader header(frame.first(4));
  if (header.u32() != frame.size() - 4)
    throw WireError("wire: frame length mismatch");
  detail::ByteReader r(frame.subspan(4));
  std::uint8_t tag = r.u8();
  WireMessage msg;
  switch (tag) {
    case detail::tag_setup: {
      SetupShares m;
      m.session_id = r.session();
      m.server_index = detail::read_index(r);
      m.scheme_digest = r.u64();
      m.slice = detail::read_slice(r);
      m.modulus = detail::read_modulus(r);
      std::uint32_t count = r.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        int u = detail::read_index(r);
        if (!m.function_shares.emplace(u, detail::read_matrix(r, *m.modulus))
                 .second)
          throw WireError("wire: duplicate map key");
      }
      msg = std::move(m);
      break;
    }
    case detail::tag_input: {
      InputShares m;
      m.session_id = r.session();
      m.request_id = r.u64();
      m.modulus = detail::read_modulus(r);
      std::uint32_t count = r.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        int v = detail::read_index(r);
        if (!m.input_shares.emplace(v, detail::read_vector(r, *m.modulus))
                 .second)
          throw WireError("wire: duplicate map key");
      }
      msg = std::move(m);
      break;
    }
    case detail::tag_results: {
      Results m;
      m.session_id = r.session();
      m.request_id = r.u64();
      m.modulus = detail::read_modulus(r);
      std::uint32_t count = r.u32();
      for (std::uint32_t i = 0; i < count; ++i) {
        int u = detail::read_index(r);
        int v = detail::read_index(r);
        if (!m.outputs
                 .emplace(std::make_pair(u, v),
                          detail::read_vector(r, *m.modulus))
                 .second)
          throw WireError("wire: duplicate map key");
      }
      msg = std::move(m);
      break;
    }
    case detail::tag_error: {
      ErrorReply m;
      std::uint8_t code = r.u8();
      if (code < 1 || code > 5) throw WireError("wire: unknown error code");
      m.code = static_cast<ErrorCode>(code);
      m.detail = r.text(4096);
      msg = std::move(m);
      break;
    }
    default:
      throw WireError("wire: unknown tag");
  }
  if (!r.done()) throw WireError("wire: trailing bytes");
  return msg;
}

// What the delegating side keeps on disk between runs: enough to hand fresh
// inputs to the servers of an established session and verify their answers.
struct ClientKeys {
  std::string session_id;
  CoveringScheme scheme;
  std::shared_ptr<const FieldModulus> modulus;
  VerificationKey vk;
};

inline std::vector<std::uint8_t> encode_client_keys(
    const std::string& session_id, const CoveringScheme& scheme,
    const FieldModulus& mod, const VerificationKey& vk) {
  std::vector<std::uint8_t> out;
  const char magic[8] = {'M', 'S', 'V', 'C', 'K', 'E', 'Y', '1'};
  out.insert(out.end(), magic, magic + 8);
  detail::put_session(out, session_id);
  detail::put_u256(out, mod.value());
  detail::put_index(out, scheme.k);
  detail::put_index(out, scheme.a);
  detail::put_index(out, scheme.b);
  auto put_side = [&out](const std::vector<std::vector<int>>& side) {
    detail::put_u32(out, static_cast<std::uint32_t>(side.size()));
    for (const auto& set : side) {
      detail::put_u32(out, static_cast<std::uint32_t>(set.size()));
      for (int e : set) detail::put_index(out, e);
    }
  };
  put_side(scheme.A);
  put_side(scheme.B);
  detail::put_u32(out, static_cast<std::uint32_t>(scheme.C.size()));
  for (const auto& cell : scheme.C) {
    detail::put_u32(out, static_cast<std::uint32_t>(cell.size()));
    for (const auto& [u, v] : cell) {
      detail::put_index(out, u);
      detail::put_index(out, v);
    }
  }
  detail::put_vector(out, vk.r);
  detail::put_u32(out, static_cast<std::uint32_t>(vk.s.size()));
  for (const FieldVector& s : vk.s) detail::put_vector(out, s);
  detail::put_u64(out, vk.uses);
  return out;
}

inline ClientKeys decode_client_keys(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  const char magic[8] = {'M', 'S', 'V', 'C', 'K', 'E', 'Y', '1'};
  for (char c : magic)
    if (r.u8() != static_cast<std::uint8_t>(c))
      throw WireError("wire: not a key file");
  std::string session = r.session();
  auto mod = detail::read_modulus(r);
  CoveringScheme scheme;
  scheme.k = detail::read_index(r);
  scheme.a = detail::read_index(r);
  scheme.b = detail::read_index(r);
  auto read_side = [&r](std::vector<std::vector<int>>& side) {
    std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::vector<int> set;
      std::uint32_t len = r.u32();
      for (std::uint32_t j = 0; j < len; ++j)
        set.push_back(detail::read_index(r));
      side.push_back(std::move(set));
    }
  };
  read_side(scheme.A);
  read_side(scheme.B);
  std::uint32_t nc = r.u32();
  for (std::uint32_t i = 0; i < nc; ++i) {
    std::vector<std::pair<int, int>> cell;
    std::uint32_t len = r.u32();
    for (std::uint32_t j = 0; j < len; ++j) {
      int u = detail::read_index(r);
      int v = detail::read_index(r);
      cell.emplace_back(u, v);
    }
    scheme.C.push_back(std::move(cell));
  }
  try {
    validate_covering(scheme);
  } catch (const std::invalid_argument& e) {
    throw WireError(std::string("wire: ") + e.what());
  }
  VerificationKey vk{detail::read_vector(r, *mod), {}, 0};
  std::uint32_t ns = r.u32();
  for (std::uint32_t i = 0; i < ns; ++i)
    vk.s.push_back(detail::read_vector(r, *mod));
  vk.uses = r.u64();
  if (!r.done()) throw WireError("wire: trailing bytes");
  if (vk.s.size() != static_cast<std::size_t>(scheme.a))
    throw WireError("wire: key file has wrong share count");
  return ClientKeys{std::move(session), std::move(scheme), std::move(mod),
                    std::move(vk)};
}

}  // namespace msvc
