#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "msvc/covering.hpp"
#include "msvc/field.hpp"
#include "msvc/rng.hpp"
#include "msvc/sharing.hpp"

namespace msvc {

/// Anyone may delegate an input; there is no public key material.
struct PublicKey {};

/// Verifier secret for a fixed matrix F: a random probe vector r and the
/// probe's image through each row share, s_u = r F_u. Accepting a forged
/// answer requires hitting a hyperplane determined by the never-revealed r,
/// so each forgery attempt succeeds with probability 1/q per pair.
struct VerificationKey {
  FieldVector r;
  std::vector<FieldVector> s;
  mutable std::uint64_t uses = 0;  // verifications performed with this key
};

struct FunctionKey {
  PublicKey pk;
  // rho[l-1] maps row-share index u (1-based) to F_u, for u in A[l]
  std::vector<std::map<int, FieldMatrix>> rho;
  VerificationKey vk;
};

/// Verifier secret for one delegated input: the column shares themselves.
struct InputKey {
  std::vector<FieldVector> x;  // x[v-1], v = 1..b
};

/// sigma[l-1] maps column-share index v (1-based) to x_v, for v in B[l].
using InputSharesPerServer = std::vector<std::map<int, FieldVector>>;

/// One server's answer: the partial products it is responsible for.
using ServerOutput = std::map<std::pair<int, int>, FieldVector>;

/// Splits F into a row shares, draws the probe vector and precomputes its
/// images. Draw order: the m entries of r first, then the a-1 leading row
/// shares of F in row-major order (the last share absorbs F).
inline FunctionKey key_gen(const FieldMatrix& F, const CoveringScheme& scheme,
                           RandomSource& rng) {
  validate_covering(scheme);
  const FieldModulus& mod = F.modulus();
  FieldVector r = FieldVector::random(mod, F.rows(), rng);
  std::vector<FieldMatrix> shares =
      share_matrix(F, scheme.a, rng);  // shares[u-1] = F_u
  std::vector<FieldVector> s;
  s.reserve(static_cast<std::size_t>(scheme.a));
  for (const FieldMatrix& share : shares) s.push_back(vec_mat_mul(r, share));
  std::vector<std::map<int, FieldMatrix>> rho(
      static_cast<std::size_t>(scheme.k));
  for (int l = 0; l < scheme.k; ++l) {
    for (int u : scheme.A[static_cast<std::size_t>(l)])
      rho[static_cast<std::size_t>(l)].emplace(
          u, shares[static_cast<std::size_t>(u - 1)]);
  }
  return FunctionKey{PublicKey{}, std::move(rho),
                     VerificationKey{std::move(r), std::move(s), 0}};
}

/// Splits x into b column shares and routes them: server l receives the
/// shares indexed by B[l]. Performs no multiplications.
inline std::pair<InputSharesPerServer, InputKey> prob_gen(
    const FieldVector& x, const CoveringScheme& scheme, RandomSource& rng) {
  validate_covering(scheme);
  std::vector<FieldVector> shares = share_vector(x, scheme.b, rng);
  InputSharesPerServer sigma(static_cast<std::size_t>(scheme.k));
  for (int l = 0; l < scheme.k; ++l) {
    for (int v : scheme.B[static_cast<std::size_t>(l)])
      sigma[static_cast<std::size_t>(l)].emplace(
          v, shares[static_cast<std::size_t>(v - 1)]);
  }
  return {std::move(sigma), InputKey{std::move(shares)}};
}

/// One server's work: every partial product it is assigned.
inline ServerOutput compute(const std::map<int, FieldMatrix>& rho_l,
                            const std::map<int, FieldVector>& sigma_l,
                            const std::vector<std::pair<int, int>>& assigned) {
  ServerOutput out;
  for (const auto& [u, v] : assigned) {
    auto fu = rho_l.find(u);
    if (fu == rho_l.end())
      throw std::invalid_argument("protocol: missing row share " +
                                  std::to_string(u));
    auto xv = sigma_l.find(v);
    if (xv == sigma_l.end())
      throw std::invalid_argument("protocol: missing column share " +
                                  std::to_string(v));
    out.emplace(std::make_pair(u, v), mat_vec_mul(fu->second, xv->second));
  }
  return out;
}

struct VerifyRejection {
  int u = 0, v = 0;  // first failing pair in lexicographic order
};

class VerifyOutcome {
 public:
  static VerifyOutcome accepted(FieldVector y) {
    return VerifyOutcome(std::move(y));
  }
  static VerifyOutcome rejected(int u, int v) { return VerifyOutcome(u, v); }

  bool ok() const { return y_.has_value(); }
  const FieldVector& value() const {
    if (!y_) throw std::logic_error("protocol: rejected outcome has no value");
    return *y_;
  }
  const VerifyRejection& rejection() const {
    if (y_) throw std::logic_error("protocol: accepted outcome has no rejection");
    return rej_;
  }

 private:
  explicit VerifyOutcome(FieldVector y) : y_(std::move(y)) {}
  VerifyOutcome(int u, int v) : rej_{u, v} {}
  std::optional<FieldVector> y_;
  VerifyRejection rej_;
};

/// Checks every partial product against the probe images, in lexicographic
/// pair order, stopping at the first mismatch. Structural defects (wrong
/// server count, missing or extra pairs, dimension mismatches) throw instead
/// of rejecting: rejection is reserved for well-formed wrong answers.
inline VerifyOutcome verify(const VerificationKey& vk, const InputKey& vkx,
                            const std::vector<ServerOutput>& outputs,
                            const CoveringScheme& scheme) {
  validate_covering(scheme);
  const std::size_t m = vk.r.dim();
  if (static_cast<int>(vk.s.size()) != scheme.a)
    throw std::invalid_argument("protocol: key has wrong share count");
  if (static_cast<int>(vkx.x.size()) != scheme.b)
    throw std::invalid_argument("protocol: input key has wrong share count");
  if (static_cast<int>(outputs.size()) != scheme.k)
    throw std::invalid_argument("protocol: expected one output per server");
  std::map<std::pair<int, int>, const FieldVector*> merged;
  for (int l = 0; l < scheme.k; ++l) {
    const auto& assigned = scheme.C[static_cast<std::size_t>(l)];
    const ServerOutput& out = outputs[static_cast<std::size_t>(l)];
    if (out.size() != assigned.size())
      throw std::invalid_argument("protocol: server " + std::to_string(l + 1) +
                                  " answered the wrong pair set");
    for (const auto& [uv, y] : out) {
      if (!std::binary_search(assigned.begin(), assigned.end(), uv))
        throw std::invalid_argument(
            "protocol: server " + std::to_string(l + 1) +
            " answered a pair outside its assignment");
      if (y.dim() != m)
        throw std::invalid_argument("protocol: partial product has dim " +
                                    std::to_string(y.dim()) + ", expected " +
                                    std::to_string(m));
      merged.emplace(uv, &y);
    }
  }
  vk.uses += 1;
  for (const auto& [uv, y] : merged) {
    const auto& [u, v] = uv;
    FieldElement lhs = dot(vk.r, *y);
    FieldElement rhs = dot(vk.s[static_cast<std::size_t>(u - 1)],
                           vkx.x[static_cast<std::size_t>(v - 1)]);
    if (!(lhs == rhs)) return VerifyOutcome::rejected(u, v);
  }
  auto it = merged.begin();
  FieldVector y = *it->second;
  for (++it; it != merged.end(); ++it) y = vec_add(y, *it->second);
  return VerifyOutcome::accepted(std::move(y));
}

/// Floor of q / (2^40 * a * b): the number of verifications after which the
/// accumulated forgery odds pass 2^-40 and the function key should be redrawn.
inline U256 refresh_threshold(const FieldModulus& mod,
                              const CoveringScheme& scheme) {
  const U256 by_margin = div_u64(mod.value(), 1ull << 40).first;
  return div_u64(by_margin, static_cast<std::uint64_t>(scheme.a) *
                                static_cast<std::uint64_t>(scheme.b))
      .first;
}

inline bool refresh_recommended(const VerificationKey& vk,
                                const FieldModulus& mod,
                                const CoveringScheme& scheme) {
  return U256{vk.uses} >= refresh_threshold(mod, scheme);
}

// ---------------------------------------------------------------------------
// Forgery experiment
// ---------------------------------------------------------------------------

struct ExperimentRound {
  FieldVector chosen_x;
  InputSharesPerServer sigma;
  std::vector<ServerOutput> crafted;
  bool accepted = false;
};

/// Everything the colluding servers jointly learn. The verification keys are
/// deliberately absent.
struct AdversaryView {
  const FieldModulus& modulus;
  const CoveringScheme& scheme;
  const PublicKey& pk;
  const std::vector<std::map<int, FieldMatrix>>& rho;
  const std::vector<ExperimentRound>& history;

  std::size_t input_dim() const {
    for (const auto& per_server : rho)
      if (!per_server.empty()) return per_server.begin()->second.cols();
    throw std::logic_error("protocol: no function shares in view");
  }
};

class Adversary {
 public:
  virtual ~Adversary() = default;
  virtual FieldVector choose_input(const AdversaryView& view) = 0;
  virtual std::vector<ServerOutput> craft_outputs(
      const AdversaryView& view, const InputSharesPerServer& sigma) = 0;
};

/// Runs the chosen-input forgery game for `attempts` rounds against one
/// generated function key. Returns 1 iff some round's crafted outputs were
/// accepted with a value different from F x.
inline int run_security_experiment(const FieldMatrix& F, int attempts,
                                   Adversary& adv,
                                   const CoveringScheme& scheme,
                                   RandomSource& rng) {
  FunctionKey fk = key_gen(F, scheme, rng);
  std::vector<ExperimentRound> history;
  int forged = 0;
  for (int t = 0; t < attempts; ++t) {
    AdversaryView view{F.modulus(), scheme, fk.pk, fk.rho, history};
    FieldVector x = adv.choose_input(view);
    auto [sigma, ik] = prob_gen(x, scheme, rng);
    std::vector<ServerOutput> crafted = adv.craft_outputs(view, sigma);
    VerifyOutcome out = verify(fk.vk, ik, crafted, scheme);
    if (out.ok() && !(out.value() == mat_vec_mul(F, x))) forged = 1;
    history.push_back(
        {std::move(x), std::move(sigma), std::move(crafted), out.ok()});
  }
  return forged;
}

/// Follows the protocol exactly; never wins.
class HonestAdversary : public Adversary {
 public:
  explicit HonestAdversary(RandomSource& rng) : rng_(&rng) {}

  FieldVector choose_input(const AdversaryView& view) override {
    return FieldVector::random(view.modulus, view.input_dim(), *rng_);
  }

  std::vector<ServerOutput> craft_outputs(
      const AdversaryView& view, const InputSharesPerServer& sigma) override {
    std::vector<ServerOutput> outs;
    outs.reserve(static_cast<std::size_t>(view.scheme.k));
    for (int l = 0; l < view.scheme.k; ++l)
      outs.push_back(compute(view.rho[static_cast<std::size_t>(l)],
                             sigma[static_cast<std::size_t>(l)],
                             view.scheme.C[static_cast<std::size_t>(l)]));
    return outs;
  }

 protected:
  RandomSource* rng_;
};

/// Computes honestly, then adds a uniformly chosen nonzero offset to one
/// uniformly chosen partial product. The strongest oblivious strategy: each
/// attempt survives verification with probability exactly 1/q.
class RandomTamperAdversary : public HonestAdversary {
 public:
  explicit RandomTamperAdversary(RandomSource& rng) : HonestAdversary(rng) {}

  std::vector<ServerOutput> craft_outputs(
      const AdversaryView& view, const InputSharesPerServer& sigma) override {
    std::vector<ServerOutput> outs =
        HonestAdversary::craft_outputs(view, sigma);
    const int a = view.scheme.a, b = view.scheme.b;
    const std::uint64_t cell =
        rng_->next_u64() % (static_cast<std::uint64_t>(a) * b);
    const int u = static_cast<int>(cell / b) + 1;
    const int v = static_cast<int>(cell % b) + 1;
    for (int l = 0; l < view.scheme.k; ++l) {
      auto& out = outs[static_cast<std::size_t>(l)];
      auto it = out.find({u, v});
      if (it == out.end()) continue;
      it->second = vec_add(it->second, nonzero_offset(view, it->second.dim()));
      break;
    }
    return outs;
  }

 private:
  FieldVector nonzero_offset(const AdversaryView& view, std::size_t dim) {
    for (;;) {
      FieldVector d = FieldVector::random(view.modulus, dim, *rng_);
      for (const U256& cell : d.resident_data())
        if (!cell.is_zero()) return d;
    }
  }
};

}  // namespace msvc
