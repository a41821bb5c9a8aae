#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "msvc/covering.hpp"
#include "msvc/field.hpp"
#include "msvc/pir.hpp"
#include "msvc/polydelegate.hpp"
#include "msvc/protocol.hpp"
#include "msvc/rng.hpp"
#include "msvc/sharing.hpp"
#include "msvc/transport.hpp"
#include "msvc/wire.hpp"

// Exit contract: 0 success, 2 verification reject, 3 transport failure,
// 4 configuration or input error.
namespace {

constexpr int kExitOk = 0;
constexpr int kExitReject = 2;
constexpr int kExitTransport = 3;
constexpr int kExitConfig = 4;

using json = nlohmann::json;
using msvc::CoveringScheme;
using msvc::FieldElement;
using msvc::FieldMatrix;
using msvc::FieldModulus;
using msvc::FieldVector;
using msvc::U256;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

std::vector<std::uint8_t> read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void write_binary(const std::string& path,
                  const std::vector<std::uint8_t>& bytes,
                  bool restrict_mode = false) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
  out.close();
  if (restrict_mode) ::chmod(path.c_str(), S_IRUSR | S_IWUSR);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in);
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

CoveringScheme parse_scheme(const std::string& name) {
  if (name == "pi_s") return msvc::pi_s();
  if (name == "pi_w") return msvc::pi_w();
  CoveringScheme s = msvc::scheme_from_json(read_json(name));
  return s;
}

std::string scheme_label(const std::string& name) {
  if (name == "pi_s" || name == "pi_w") return name;
  return "custom";
}

FieldElement parse_element(const FieldModulus& mod, const std::string& text) {
  U256 v = U256::from_decimal(text);
  if (!mod.is_canonical(v))
    throw std::invalid_argument("value " + text + " is not below the modulus");
  return FieldElement(mod, v);
}

std::vector<FieldElement> parse_elements(const FieldModulus& mod,
                                         const std::string& csv) {
  std::vector<FieldElement> out;
  for (const std::string& item : split_csv(csv))
    out.push_back(parse_element(mod, item));
  if (out.empty()) throw std::invalid_argument("no values given");
  return out;
}

FieldVector vector_from_elements(const FieldModulus& mod,
                                 const std::vector<FieldElement>& elems) {
  FieldVector v(mod, elems.size());
  for (std::size_t i = 0; i < elems.size(); ++i) v.set(i, elems[i]);
  return v;
}

std::string vector_to_csv(const FieldVector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (i) out += ",";
    out += v.at(i).canonical().to_decimal();
  }
  return out;
}

std::vector<msvc::Endpoint> parse_endpoints(const std::string& csv) {
  std::vector<msvc::Endpoint> out;
  for (const std::string& item : split_csv(csv))
    out.push_back(msvc::parse_endpoint(item));
  return out;
}

std::string fresh_session_id() {
  std::random_device rd;
  std::ostringstream id;
  id << "s" << std::hex << rd() << rd();
  return id.str();
}

std::unique_ptr<msvc::RandomSource> make_rng(
    const std::optional<std::uint64_t>& seed) {
  if (seed) return std::make_unique<msvc::ChaChaRng>(*seed);
  return std::make_unique<msvc::SystemRng>();
}

json matrix_to_json(const FieldMatrix& f) {
  json entries = json::array();
  for (std::size_t r = 0; r < f.rows(); ++r)
    for (std::size_t c = 0; c < f.cols(); ++c)
      entries.push_back(f.at(r, c).canonical().to_decimal());
  return json{{"q", f.modulus().value().to_decimal()},
              {"rows", f.rows()},
              {"cols", f.cols()},
              {"entries", std::move(entries)}};
}

FieldMatrix matrix_from_json(const FieldModulus& mod, const json& j) {
  if (U256::from_decimal(j.at("q").get<std::string>()) != mod.value())
    throw std::invalid_argument("matrix file was written for another modulus");
  std::size_t rows = j.at("rows").get<std::size_t>();
  std::size_t cols = j.at("cols").get<std::size_t>();
  const auto& entries = j.at("entries");
  if (entries.size() != rows * cols)
    throw std::invalid_argument("matrix file entry count mismatch");
  FieldMatrix f(mod, rows, cols);
  for (std::size_t i = 0; i < entries.size(); ++i)
    f.set(i / cols, i % cols,
          parse_element(mod, entries[i].get<std::string>()));
  return f;
}

// 31-byte big-endian chunks, zero-padded at the tail; each chunk must land
// below the modulus
std::vector<FieldElement> chunk_bytes(const FieldModulus& mod,
                                      const std::vector<std::uint8_t>& blob) {
  if (blob.empty()) throw std::invalid_argument("database file is empty");
  std::vector<FieldElement> out;
  for (std::size_t off = 0; off < blob.size(); off += 31) {
    std::uint8_t buf[32] = {0};
    std::size_t n = std::min<std::size_t>(31, blob.size() - off);
    std::copy(blob.begin() + static_cast<std::ptrdiff_t>(off),
              blob.begin() + static_cast<std::ptrdiff_t>(off + n), buf + 1);
    U256 v = U256::from_bytes_be(std::span<const std::uint8_t, 32>(buf, 32));
    if (!mod.is_canonical(v))
      throw std::invalid_argument("database chunk exceeds the modulus");
    out.push_back(FieldElement(mod, v));
  }
  return out;
}

// ---- defaults pulled from an optional JSON config file; explicit flags win

struct Defaults {
  std::string scheme = "pi_s";
  std::string q = FieldModulus::default_prime().to_decimal();
  std::size_t m = 4;
  std::size_t d = 4;
  std::optional<std::uint64_t> seed;
  std::string endpoints;
  std::string out;
};

Defaults load_defaults(int argc, char** argv) {
  Defaults def;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) != "--config") continue;
    json cfg = read_json(argv[i + 1]);
    if (cfg.contains("scheme")) def.scheme = cfg["scheme"].get<std::string>();
    if (cfg.contains("q")) def.q = cfg["q"].get<std::string>();
    if (cfg.contains("m")) def.m = cfg["m"].get<std::size_t>();
    if (cfg.contains("d")) def.d = cfg["d"].get<std::size_t>();
    if (cfg.contains("seed")) def.seed = cfg["seed"].get<std::uint64_t>();
    if (cfg.contains("out")) def.out = cfg["out"].get<std::string>();
    if (cfg.contains("endpoints")) {
      std::string joined;
      for (const auto& ep : cfg["endpoints"]) {
        if (!joined.empty()) joined += ",";
        joined += ep.get<std::string>();
      }
      def.endpoints = joined;
    }
  }
  return def;
}

// ---- transcripts: the verifier-side record of one delegation

void write_transcript(const std::string& path,
                      const std::vector<std::vector<std::uint8_t>>& frames,
                      const msvc::InputKey& ik) {
  std::vector<std::uint8_t> out;
  const char magic[8] = {'M', 'S', 'V', 'C', 'T', 'R', 'S', '1'};
  out.insert(out.end(), magic, magic + 8);
  msvc::detail::put_u32(out, static_cast<std::uint32_t>(frames.size()));
  for (const auto& f : frames) {
    msvc::detail::put_u32(out, static_cast<std::uint32_t>(f.size()));
    out.insert(out.end(), f.begin(), f.end());
  }
  msvc::detail::put_u32(out, static_cast<std::uint32_t>(ik.x.size()));
  for (const FieldVector& share : ik.x) msvc::detail::put_vector(out, share);
  write_binary(path, out, true);
}

struct Transcript {
  std::vector<msvc::Results> results;
  msvc::InputKey ik;
};

Transcript read_transcript(const std::string& path, const FieldModulus& mod) {
  std::vector<std::uint8_t> bytes = read_binary(path);
  static constexpr char magic[8] = {'M', 'S', 'V', 'C', 'T', 'R', 'S', '1'};
  if (bytes.size() < 12 || !std::equal(magic, magic + 8, bytes.begin()))
    throw std::runtime_error("not a transcript file: " + path);
  std::size_t off = 8;
  auto take_u32 = [&bytes, &off]() {
    if (off + 4 > bytes.size())
      throw std::runtime_error("truncated transcript");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes[off++];
    return v;
  };
  Transcript t;
  std::uint32_t k = take_u32();
  for (std::uint32_t l = 0; l < k; ++l) {
    std::uint32_t len = take_u32();
    if (off + len > bytes.size())
      throw std::runtime_error("truncated transcript");
    msvc::WireMessage msg = msvc::decode_message(
        std::span<const std::uint8_t>(bytes.data() + off, len));
    off += len;
    auto* res = std::get_if<msvc::Results>(&msg);
    if (!res) throw std::runtime_error("transcript holds a non-result frame");
    if (res->modulus->value() != mod.value())
      throw std::runtime_error("transcript modulus differs from the key file");
    msvc::Results rebound{res->session_id, res->request_id,
                          msvc::borrow_modulus(mod), {}};
    for (const auto& [pair, y] : res->outputs)
      rebound.outputs.emplace(pair, msvc::detail::rebind_vector(y, mod));
    t.results.push_back(std::move(rebound));
  }
  msvc::detail::ByteReader r(
      std::span<const std::uint8_t>(bytes.data() + off, bytes.size() - off));
  std::uint32_t b = r.u32();
  for (std::uint32_t v = 0; v < b; ++v)
    t.ik.x.push_back(msvc::detail::read_vector(r, mod));
  if (!r.done()) throw std::runtime_error("trailing bytes in transcript");
  return t;
}

// ---- subcommands

int cmd_keygen(const std::string& scheme_name, const std::string& q,
               std::size_t m, std::size_t d,
               const std::optional<std::uint64_t>& seed,
               const std::string& session, const std::string& out_dir,
               const std::string& matrix_in, const std::string& matrix_out) {
  CoveringScheme scheme = parse_scheme(scheme_name);
  FieldModulus mod{U256::from_decimal(q)};
  auto rng = make_rng(seed);
  FieldMatrix f = matrix_in.empty()
                      ? msvc::random_matrix(mod, m, d, *rng)
                      : matrix_from_json(mod, read_json(matrix_in));
  msvc::FunctionKey fk = msvc::key_gen(f, scheme, *rng);
  std::filesystem::create_directories(out_dir);
  const std::uint64_t digest = msvc::scheme_digest(scheme);
  for (int l = 1; l <= scheme.k; ++l) {
    msvc::SetupShares msg{session,
                          l,
                          digest,
                          msvc::slice_for(scheme, l),
                          msvc::borrow_modulus(mod),
                          fk.rho[static_cast<std::size_t>(l - 1)]};
    std::string path =
        out_dir + "/server-" + std::to_string(l) + ".setup";
    write_binary(path, msvc::encode_message(msg));
    std::cout << "wrote " << path << "\n";
  }
  write_binary(out_dir + "/client.key",
               msvc::encode_client_keys(session, scheme, mod, fk.vk), true);
  std::cout << "wrote " << out_dir << "/client.key\n";
  if (!matrix_out.empty()) {
    std::ofstream mo(matrix_out);
    mo << matrix_to_json(f).dump(2) << "\n";
    std::cout << "wrote " << matrix_out << "\n";
  }
  return kExitOk;
}

int cmd_serve(const std::string& state_dir, std::uint16_t port, bool tamper) {
  msvc::ServerConfig cfg;
  cfg.state_dir = state_dir;
  cfg.tamper = tamper;
  msvc::Server server(cfg);
  server.start(port);
  std::cout << "listening on 127.0.0.1:" << server.port() << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) ::pause();
  server.stop();
  return kExitOk;
}

void push_share_files(const std::vector<msvc::Endpoint>& endpoints,
                      const std::string& shares_dir, int k) {
  for (int l = 1; l <= k; ++l) {
    auto frame = read_binary(shares_dir + "/server-" + std::to_string(l) +
                             ".setup");
    msvc::Connection conn(endpoints[static_cast<std::size_t>(l - 1)]);
    conn.send_raw(frame);
    msvc::WireMessage reply = conn.receive();
    if (auto* err = std::get_if<msvc::ErrorReply>(&reply)) {
      if (err->code == msvc::ErrorCode::dup_setup) continue;
      throw msvc::RemoteError(err->code, err->detail);
    }
  }
}

int cmd_delegate(const std::string& keys_path, const std::string& shares_dir,
                 const std::string& endpoints_csv, const std::string& x_csv,
                 const std::optional<std::uint64_t>& seed,
                 const std::string& transcript_out) {
  msvc::ClientKeys keys = msvc::decode_client_keys(read_binary(keys_path));
  const FieldModulus& mod = *keys.modulus;
  std::vector<msvc::Endpoint> endpoints = parse_endpoints(endpoints_csv);
  if (endpoints.size() != static_cast<std::size_t>(keys.scheme.k))
    throw std::invalid_argument("need exactly one endpoint per server");
  if (!shares_dir.empty())
    push_share_files(endpoints, shares_dir, keys.scheme.k);

  const std::size_t d = keys.vk.s[0].dim();
  auto rng = make_rng(seed);
  FieldVector x(mod, d);
  if (x_csv.empty()) {
    x = msvc::random_vector(mod, d, *rng);
    std::cout << "x: " << vector_to_csv(x) << "\n";
  } else {
    auto elems = parse_elements(mod, x_csv);
    if (elems.size() != d)
      throw std::invalid_argument("input must have " + std::to_string(d) +
                                  " entries");
    x = vector_from_elements(mod, elems);
  }

  auto [sigma, ik] = msvc::prob_gen(x, keys.scheme, *rng);
  std::vector<msvc::ServerOutput> outputs(
      static_cast<std::size_t>(keys.scheme.k));
  std::vector<std::vector<std::uint8_t>> frames;
  for (int l = 1; l <= keys.scheme.k; ++l) {
    msvc::Connection conn(endpoints[static_cast<std::size_t>(l - 1)]);
    msvc::InputShares msg{keys.session_id, 1, msvc::borrow_modulus(mod),
                          sigma[static_cast<std::size_t>(l - 1)]};
    msvc::WireMessage reply = conn.round_trip(msg);
    if (auto* err = std::get_if<msvc::ErrorReply>(&reply))
      throw msvc::RemoteError(err->code, err->detail);
    auto* res = std::get_if<msvc::Results>(&reply);
    if (!res) throw msvc::TransportError("server sent a non-result reply");
    if (res->modulus->value() != mod.value())
      throw msvc::TransportError("reply under a different modulus");
    frames.push_back(msvc::encode_message(reply));
    for (const auto& [pair, y] : res->outputs)
      outputs[static_cast<std::size_t>(l - 1)].emplace(
          pair, msvc::detail::rebind_vector(y, mod));
  }
  if (!transcript_out.empty()) {
    write_transcript(transcript_out, frames, ik);
    std::cout << "wrote " << transcript_out << "\n";
  }
  msvc::VerifyOutcome out = msvc::verify(keys.vk, ik, outputs, keys.scheme);
  if (!out.ok()) {
    auto [u, v] = out.rejection();
    std::cerr << "cheating detected at pair (" << u << "," << v << ")\n";
    return kExitReject;
  }
  std::cout << "y: " << vector_to_csv(out.value()) << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& keys_path, const std::string& transcript) {
  msvc::ClientKeys keys = msvc::decode_client_keys(read_binary(keys_path));
  Transcript t = read_transcript(transcript, *keys.modulus);
  if (t.results.size() != static_cast<std::size_t>(keys.scheme.k))
    throw std::runtime_error("transcript does not cover every server");
  std::vector<msvc::ServerOutput> outputs;
  for (const msvc::Results& res : t.results) outputs.push_back(res.outputs);
  msvc::VerifyOutcome out =
      msvc::verify(keys.vk, t.ik, outputs, keys.scheme);
  if (!out.ok()) {
    auto [u, v] = out.rejection();
    std::cerr << "reject at pair (" << u << "," << v << ")\n";
    return kExitReject;
  }
  std::cout << "accept\n";
  std::cout << "y: " << vector_to_csv(out.value()) << "\n";
  return kExitOk;
}

double median_ms(std::vector<double>& samples) {
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

int cmd_bench(const std::string& scheme_name, const std::string& q,
              const std::string& sizes_csv, int runs,
              const std::optional<std::uint64_t>& seed,
              const std::string& out_path) {
  CoveringScheme scheme = parse_scheme(scheme_name);
  FieldModulus mod{U256::from_decimal(q)};
  auto rng = make_rng(seed);
  if (runs < 5) throw std::invalid_argument("need at least 5 runs");

  std::ostringstream csv;
  csv << "m,d,scheme,t_naive_ms,t_client_ms,t_server_max_ms,keygen_muls,"
         "probgen_muls,compute_muls,verify_muls\n";
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0)
        .count();
  };
  for (const std::string& size : split_csv(sizes_csv)) {
    const std::size_t n = std::stoul(size);
    if (n == 0) throw std::invalid_argument("sizes must be positive");
    FieldMatrix f = msvc::random_matrix(mod, n, n, *rng);
    msvc::OpCountScope keygen_scope;
    msvc::FunctionKey fk = msvc::key_gen(f, scheme, *rng);
    const std::uint64_t keygen_muls = keygen_scope.muls();
    std::uint64_t probgen_muls = 0, compute_muls = 0, verify_muls = 0;
    std::vector<double> naive, client, server;
    for (int run = -1; run < runs; ++run) {  // run -1 warms caches, untimed
      FieldVector x = msvc::random_vector(mod, n, *rng);
      auto t0 = clock::now();
      FieldVector direct = mat_vec_mul(f, x);
      double t_naive = ms_since(t0);

      msvc::OpCountScope probgen_scope;
      t0 = clock::now();
      auto [sigma, ik] = msvc::prob_gen(x, scheme, *rng);
      double t_probgen = ms_since(t0);
      probgen_muls = probgen_scope.muls();

      msvc::OpCountScope compute_scope;
      double t_server_max = 0;
      std::vector<msvc::ServerOutput> outs;
      for (int l = 0; l < scheme.k; ++l) {
        t0 = clock::now();
        outs.push_back(msvc::compute(fk.rho[static_cast<std::size_t>(l)],
                                     sigma[static_cast<std::size_t>(l)],
                                     scheme.C[static_cast<std::size_t>(l)]));
        t_server_max = std::max(t_server_max, ms_since(t0));
      }
      compute_muls = compute_scope.muls();

      msvc::OpCountScope verify_scope;
      t0 = clock::now();
      msvc::VerifyOutcome out = msvc::verify(fk.vk, ik, outs, scheme);
      double t_verify = ms_since(t0);
      verify_muls = verify_scope.muls();
      if (!out.ok() || !(out.value() == direct))
        throw std::runtime_error("benchmark round failed verification");
      if (run < 0) continue;
      naive.push_back(t_naive);
      client.push_back(t_probgen + t_verify);
      server.push_back(t_server_max);
    }
    csv << n << ',' << n << ',' << scheme_label(scheme_name) << ','
        << std::fixed << std::setprecision(3) << median_ms(naive) << ','
        << median_ms(client) << ',' << median_ms(server) << ','
        << keygen_muls << ',' << probgen_muls << ',' << compute_muls << ','
        << verify_muls << "\n";
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path);
    out << csv.str();
    std::cout << "wrote " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_attack_sim(const std::string& scheme_name, const std::string& q,
                   std::size_t m, std::size_t d, int trials, int p,
                   const std::optional<std::uint64_t>& seed, bool honest) {
  CoveringScheme scheme = parse_scheme(scheme_name);
  FieldModulus mod{U256::from_decimal(q)};
  if (trials < 1 || p < 1)
    throw std::invalid_argument("trials and p must be positive");
  auto rng = make_rng(seed);
  FieldMatrix f = msvc::random_matrix(mod, m, d, *rng);
  std::unique_ptr<msvc::Adversary> adv;
  if (honest)
    adv = std::make_unique<msvc::HonestAdversary>(*rng);
  else
    adv = std::make_unique<msvc::RandomTamperAdversary>(*rng);
  long successes = 0;
  for (int t = 0; t < trials; ++t)
    successes += msvc::run_security_experiment(f, p, *adv, scheme, *rng);
  const double ab = static_cast<double>(scheme.a) * scheme.b;
  const double qd = std::stod(q);
  const double bound = static_cast<double>(p) * ab / (qd - p * ab);
  std::cout << "adversary: " << (honest ? "honest" : "random-tamper") << "\n"
            << "trials: " << trials << "\n"
            << "successes: " << successes << "\n"
            << "rate: " << std::setprecision(6)
            << static_cast<double>(successes) / trials << "\n"
            << "bound: " << bound << "\n";
  return kExitOk;
}

int cmd_pir(const std::string& db_path, bool raw, const std::string& q,
            std::size_t index, const std::string& scheme_name,
            const std::optional<std::uint64_t>& seed,
            const std::string& endpoints_csv, const std::string& session) {
  CoveringScheme scheme = parse_scheme(scheme_name);
  auto rng = make_rng(seed);
  std::vector<FieldElement> entries;
  std::unique_ptr<FieldModulus> owned;
  const FieldModulus* mod = nullptr;
  if (raw) {
    owned = std::make_unique<FieldModulus>(U256::from_decimal(q));
    mod = owned.get();
    entries = chunk_bytes(*mod, read_binary(db_path));
  } else {
    json j = read_json(db_path);
    owned = std::make_unique<FieldModulus>(
        U256::from_decimal(j.at("q").get<std::string>()));
    mod = owned.get();
    for (const auto& e : j.at("entries"))
      entries.push_back(parse_element(*mod, e.get<std::string>()));
  }
  msvc::PirDatabase db = msvc::build_database(entries);

  if (endpoints_csv.empty()) {
    auto got = msvc::pir_retrieve(db, index, scheme, *rng);
    if (!got) {
      std::cerr << "cheating detected\n";
      return kExitReject;
    }
    std::cout << "value: " << got->canonical().to_decimal() << "\n";
    return kExitOk;
  }

  std::vector<msvc::Endpoint> endpoints = parse_endpoints(endpoints_csv);
  msvc::FunctionKey fk = msvc::key_gen(db.matrix, scheme, *rng);
  try {
    msvc::push_function_shares(endpoints, session, scheme, *mod, fk, 5000,
                               false);
  } catch (const msvc::RemoteError& e) {
    if (e.code == msvc::ErrorCode::dup_setup)
      throw std::invalid_argument(
          "session already exists on the servers; pick a fresh --session");
    throw;
  }
  msvc::PirQuery query = msvc::make_query(index, db.n, *mod);
  auto [sigma, ik] = msvc::prob_gen(query.x, scheme, *rng);
  auto column = msvc::delegate_remote_prepared(endpoints, session, *mod, sigma,
                                               ik, fk.vk, scheme);
  if (!column) {
    std::cerr << "cheating detected\n";
    return kExitReject;
  }
  std::cout << "value: " << column->at(query.row - 1).canonical().to_decimal()
            << "\n";
  return kExitOk;
}

int cmd_poly(const std::string& family, const std::string& coeffs_csv,
             const std::string& point_csv, std::size_t vars, int degree,
             const std::string& q, const std::string& scheme_name,
             const std::optional<std::uint64_t>& seed) {
  CoveringScheme scheme = parse_scheme(scheme_name);
  FieldModulus mod{U256::from_decimal(q)};
  auto rng = make_rng(seed);
  std::vector<FieldElement> coeffs = parse_elements(mod, coeffs_csv);
  std::optional<msvc::TwoStageDecomposition> decomp;
  if (family == "univariate") {
    decomp = msvc::decompose_univariate(coeffs);
  } else if (family == "bivariate" || family == "quadratic") {
    std::size_t n = 1;
    while (n * n < coeffs.size()) ++n;
    if (n * n != coeffs.size())
      throw std::invalid_argument(family +
                                  " needs a square number of coefficients");
    std::vector<std::vector<FieldElement>> grid;
    for (std::size_t i = 0; i < n; ++i)
      grid.emplace_back(coeffs.begin() + static_cast<std::ptrdiff_t>(i * n),
                        coeffs.begin() +
                            static_cast<std::ptrdiff_t>((i + 1) * n));
    decomp = family == "bivariate" ? msvc::decompose_bivariate(grid)
                                   : msvc::decompose_quadratic_form(grid);
  } else if (family == "multivariate") {
    decomp = msvc::decompose_multivariate(coeffs, vars, degree);
  } else {
    throw std::invalid_argument("unknown family: " + family);
  }
  std::vector<FieldElement> point = parse_elements(mod, point_csv);
  auto got = msvc::evaluate_delegated(*decomp, point, scheme, *rng);
  if (!got) {
    std::cerr << "cheating detected\n";
    return kExitReject;
  }
  std::cout << "value: " << got->canonical().to_decimal() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"information-theoretically secure verifiable delegation of "
               "matrix-vector multiplication across multiple servers"};
  app.require_subcommand(1);

  Defaults def;
  try {
    def = load_defaults(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON file with default values for the common flags");

  std::string scheme = def.scheme, q = def.q, out = def.out,
              endpoints = def.endpoints;
  std::size_t m = def.m, d = def.d;
  std::optional<std::uint64_t> seed = def.seed;
  std::string session = "default", shares_dir, keys_path, x_csv, matrix_in,
              matrix_out, transcript, db_path, coeffs, point,
              family = "univariate", sizes = "64,128,256", state_dir;
  std::uint16_t port = 0;
  bool tamper = false, honest = false, raw = false;
  int runs = 5, trials = 10000, p = 1;
  std::size_t index = 1, vars = 2;
  int degree = 2;

  auto add_common = [&](CLI::App* sub, bool with_dims) {
    sub->add_option("--scheme", scheme, "pi_s, pi_w, or a scheme JSON file");
    sub->add_option("--q", q, "prime modulus, decimal");
    sub->add_option("--seed", seed, "deterministic randomness seed");
    if (with_dims) {
      sub->add_option("--m", m, "matrix rows");
      sub->add_option("--d", d, "matrix columns");
    }
    sub->add_option("--config", config_path,
                    "JSON file with default values for the common flags");
  };

  CLI::App* keygen = app.add_subcommand(
      "keygen", "split a matrix into per-server share files and a client key");
  add_common(keygen, true);
  keygen->add_option("--session", session, "session name for the servers");
  keygen->add_option("--out", out, "output directory")->required();
  keygen->add_option("--matrix-in", matrix_in, "load the matrix from JSON");
  keygen->add_option("--matrix-out", matrix_out, "save the matrix as JSON");

  CLI::App* serve = app.add_subcommand("serve", "run one share-holding daemon");
  serve->add_option("--state-dir", state_dir, "per-daemon state directory")
      ->required();
  serve->add_option("--port", port, "TCP port (0 picks one)");
  serve->add_flag("--tamper", tamper,
                  "corrupt every answer, for detection drills");

  CLI::App* delegate = app.add_subcommand(
      "delegate", "send input shares to the daemons and verify the answer");
  add_common(delegate, false);
  delegate->add_option("--keys", keys_path, "client key file from keygen")
      ->required();
  delegate->add_option("--shares", shares_dir,
                       "push server-N.setup files from this directory first");
  delegate->add_option("--endpoints", endpoints, "host:port, comma separated");
  delegate->add_option("--x", x_csv, "input vector, comma separated decimals");
  delegate->add_option("--transcript-out", transcript,
                       "save results and input key for later verify");

  CLI::App* verify = app.add_subcommand(
      "verify", "re-verify a saved transcript against a client key");
  verify->add_option("--keys", keys_path, "client key file")->required();
  verify->add_option("--transcript", transcript, "transcript file")
      ->required();

  CLI::App* bench = app.add_subcommand(
      "bench", "time naive multiplication against the delegated protocol");
  add_common(bench, false);
  bench->add_option("--sizes", sizes, "comma separated square sizes");
  bench->add_option("--runs", runs, "timed runs per point, median reported");
  bench->add_option("--out", out, "write CSV here instead of stdout");

  CLI::App* attack = app.add_subcommand(
      "attack-sim", "measure the forgery rate of a tampering adversary");
  add_common(attack, true);
  attack->add_option("--trials", trials, "experiment repetitions");
  attack->add_option("--p", p, "verification rounds per experiment");
  attack->add_flag("--honest", honest, "run the honest baseline instead");

  CLI::App* pir = app.add_subcommand(
      "pir", "retrieve one database entry without revealing which");
  add_common(pir, false);
  pir->add_option("--db", db_path, "database file (JSON, or raw with --raw)")
      ->required();
  pir->add_flag("--raw", raw, "treat --db as raw bytes, 31-byte chunks");
  pir->add_option("--index", index, "1-based entry index")->required();
  pir->add_option("--endpoints", endpoints,
                  "use live daemons instead of in-process servers");
  pir->add_option("--session", session, "session name for remote retrieval");

  CLI::App* poly = app.add_subcommand(
      "poly", "evaluate a polynomial through the delegated protocol");
  add_common(poly, false);
  poly->add_option("--family", family,
                   "univariate, bivariate, quadratic, or multivariate");
  poly->add_option("--coeffs", coeffs, "coefficients, comma separated")
      ->required();
  poly->add_option("--point", point, "evaluation point, comma separated")
      ->required();
  poly->add_option("--vars", vars, "variable count (multivariate)");
  poly->add_option("--degree", degree, "per-variable degree (multivariate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*keygen)
      return cmd_keygen(scheme, q, m, d, seed, session, out, matrix_in,
                        matrix_out);
    if (*serve) return cmd_serve(state_dir, port, tamper);
    if (*delegate)
      return cmd_delegate(keys_path, shares_dir, endpoints, x_csv, seed,
                          transcript);
    if (*verify) return cmd_verify(keys_path, transcript);
    if (*bench) return cmd_bench(scheme, q, sizes, runs, seed, out);
    if (*attack)
      return cmd_attack_sim(scheme, q, m, d, trials, p, seed, honest);
    if (*pir)
      return cmd_pir(db_path, raw, q, index, scheme, seed, endpoints,
                     pir->count("--session") ? session : fresh_session_id());
    if (*poly)
      return cmd_poly(family, coeffs, point, vars, degree, q, scheme, seed);
  } catch (const msvc::TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
