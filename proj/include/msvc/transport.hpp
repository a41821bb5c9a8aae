#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "msvc/covering.hpp"
#include "msvc/field.hpp"
#include "msvc/protocol.hpp"
#include "msvc/rng.hpp"
#include "msvc/wire.hpp"

namespace msvc {

// Process topology: k independent daemons, each holding one server's function
// shares, and a client that fans input shares out, joins the k result sets,
// and verifies.  A network fault surfaces as TransportError (or TimeoutError),
// never as a verification reject — cheating and downtime stay distinguishable.

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TimeoutError : TransportError {
  using TransportError::TransportError;
};

/// An Error reply from a daemon, carried back to the caller.
struct RemoteError : TransportError {
  RemoteError(ErrorCode c, const std::string& detail)
      : TransportError(std::string(error_code_name(c)) + ": " + detail),
        code(c) {}
  ErrorCode code;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

inline Endpoint parse_endpoint(const std::string& text) {
  std::size_t colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw std::invalid_argument("endpoint must look like host:port: " + text);
  unsigned long port = 0;
  try {
    port = std::stoul(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in endpoint: " + text);
  }
  if (port == 0 || port > 65535)
    throw std::invalid_argument("bad port in endpoint: " + text);
  return Endpoint{text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

constexpr std::size_t default_max_frame = std::size_t{256} << 20;

inline std::string default_state_dir() {
  if (const char* env = std::getenv("MSVC_STATE_DIR")) return env;
  return "msvc-state";
}

namespace detail {

class UniqueFd {
 public:
  UniqueFd() = default;
  explicit UniqueFd(int fd) : fd_(fd) {}
  UniqueFd(UniqueFd&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  UniqueFd& operator=(UniqueFd&& o) noexcept {
    reset();
    std::swap(fd_, o.fd_);
    return *this;
  }
  UniqueFd(const UniqueFd&) = delete;
  UniqueFd& operator=(const UniqueFd&) = delete;
  ~UniqueFd() { reset(); }

  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
};

inline void set_io_timeout(int fd, int ms) {
  timeval tv{};
  tv.tv_sec = ms / 1000;
  tv.tv_usec = (ms % 1000) * 1000;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

inline UniqueFd connect_endpoint(const Endpoint& ep, int timeout_ms) {
  UniqueFd fd(::socket(AF_INET, SOCK_STREAM, 0));
  if (!fd.valid()) throw TransportError("socket: " + std::string(strerror(errno)));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw TransportError("cannot parse host address: " + ep.host);
  // non-blocking connect so a dead host observes the timeout, not TCP's
  int flags = ::fcntl(fd.get(), F_GETFL, 0);
  ::fcntl(fd.get(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr),
                     sizeof(addr));
  if (rc < 0) {
    if (errno != EINPROGRESS)
      throw TransportError("connect: " + std::string(strerror(errno)));
    pollfd pfd{fd.get(), POLLOUT, 0};
    int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready == 0) throw TimeoutError("connect timed out");
    if (ready < 0) throw TransportError("poll: " + std::string(strerror(errno)));
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) throw TransportError("connect: " + std::string(strerror(err)));
  }
  ::fcntl(fd.get(), F_SETFL, flags);
  set_io_timeout(fd.get(), timeout_ms);
  return fd;
}

inline void send_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent,
                       MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK)
        throw TimeoutError("send timed out");
      throw TransportError("send: " + std::string(strerror(errno)));
    }
    sent += static_cast<std::size_t>(n);
  }
}

/// false only on a clean close before the first byte (and only if permitted).
inline bool read_exact(int fd, std::uint8_t* dst, std::size_t n,
                       bool eof_ok_at_start) {
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::recv(fd, dst + got, n - got, 0);
    if (r == 0) {
      if (got == 0 && eof_ok_at_start) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK)
        throw TimeoutError("receive timed out");
      throw TransportError("recv: " + std::string(strerror(errno)));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

inline std::vector<std::uint8_t> recv_frame(int fd, std::size_t max_frame) {
  std::uint8_t header[4];
  read_exact(fd, header, 4, false);
  std::uint32_t len = frame_body_length(std::span<const std::uint8_t, 4>(header, 4));
  if (len > max_frame) throw TransportError("oversized frame announced");
  std::vector<std::uint8_t> frame(4 + len);
  std::memcpy(frame.data(), header, 4);
  read_exact(fd, frame.data() + 4, len, false);
  return frame;
}

inline FieldVector rebind_vector(const FieldVector& v, const FieldModulus& mod) {
  FieldVector out(mod, v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i)
    out.set(i, FieldElement(mod, v.at(i).canonical()));
  return out;
}

}  // namespace detail

/// One client socket; sends frames and reads single replies with a timeout.
class Connection {
 public:
  Connection(const Endpoint& ep, int timeout_ms = 5000)
      : fd_(detail::connect_endpoint(ep, timeout_ms)) {}

  void send_message(const WireMessage& m) { send_raw(encode_message(m)); }
  void send_raw(std::span<const std::uint8_t> bytes) {
    detail::send_all(fd_.get(), bytes);
  }

  WireMessage receive(std::size_t max_frame = default_max_frame) {
    return decode_message(detail::recv_frame(fd_.get(), max_frame));
  }

  WireMessage round_trip(const WireMessage& m) {
    send_message(m);
    return receive();
  }

 private:
  detail::UniqueFd fd_;
};

struct ServerConfig {
  std::string state_dir = default_state_dir();  // one directory per daemon
  std::size_t max_frame_bytes = default_max_frame;
  int io_timeout_ms = 30000;
  // Drill switch: corrupt every result vector with an independent nonzero
  // offset before replying, to exercise the client's rejection path.
  bool tamper = false;
};

/// A daemon holding function shares for any number of sessions.  Sessions are
/// write-once and survive restarts through the state directory.
class Server {
 public:
  explicit Server(ServerConfig cfg = {}) : cfg_(std::move(cfg)) {
    std::filesystem::create_directories(cfg_.state_dir);
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  ~Server() { stop(); }

  void start(std::uint16_t port = 0) {
    if (running_) throw std::logic_error("server already running");
    listen_fd_ = make_listener(port);
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    stopping_ = false;
    running_ = true;
    accept_thread_ = std::thread(&Server::accept_loop, this);
  }

  void stop() {
    if (!running_) return;
    stopping_ = true;
    ::shutdown(listen_fd_.get(), SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    listen_fd_.reset();
    std::vector<std::thread> workers;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (int fd : conns_) ::shutdown(fd, SHUT_RDWR);
      workers.swap(workers_);
    }
    for (std::thread& t : workers)
      if (t.joinable()) t.join();
    running_ = false;
  }

  std::uint16_t port() const { return port_; }
  Endpoint endpoint() const { return Endpoint{"127.0.0.1", port_}; }

 private:
  struct Session {
    SetupShares setup;
  };

  static detail::UniqueFd make_listener(std::uint16_t port) {
    detail::UniqueFd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd.valid())
      throw TransportError("socket: " + std::string(strerror(errno)));
    int opt = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &opt, sizeof(opt));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
      throw TransportError("bind: " + std::string(strerror(errno)));
    if (::listen(fd.get(), 64) < 0)
      throw TransportError("listen: " + std::string(strerror(errno)));
    return fd;
  }

  void accept_loop() {
    while (true) {
      int cfd = ::accept(listen_fd_.get(), nullptr, nullptr);
      if (cfd < 0) {
        if (errno == EINTR && !stopping_) continue;
        break;
      }
      detail::set_io_timeout(cfd, cfg_.io_timeout_ms);
      std::lock_guard<std::mutex> lock(mu_);
      conns_.insert(cfd);
      workers_.emplace_back(&Server::serve_connection, this, cfd);
    }
  }

  void serve_connection(int raw_fd) {
    detail::UniqueFd fd(raw_fd);
    SystemRng rng;
    try {
      for (;;) {
        std::uint8_t header[4];
        if (!detail::read_exact(fd.get(), header, 4, true)) break;
        std::uint32_t len = frame_body_length(
            std::span<const std::uint8_t, 4>(header, 4));
        if (len > cfg_.max_frame_bytes) {
          detail::send_all(fd.get(),
                           encode_message(ErrorReply{
                               ErrorCode::malformed, "frame too large"}));
          break;
        }
        std::vector<std::uint8_t> frame(4 + len);
        std::memcpy(frame.data(), header, 4);
        detail::read_exact(fd.get(), frame.data() + 4, len, false);
        detail::send_all(fd.get(), handle_frame(frame, rng));
      }
    } catch (const TransportError&) {
      // peer went away or stalled; nothing to answer
    }
    std::lock_guard<std::mutex> lock(mu_);
    conns_.erase(raw_fd);
  }

  std::vector<std::uint8_t> handle_frame(
      const std::vector<std::uint8_t>& frame, SystemRng& rng) {
    WireMessage reply;
    try {
      WireMessage msg = decode_message(frame);
      if (auto* setup = std::get_if<SetupShares>(&msg))
        reply = handle_setup(*setup, frame);
      else if (auto* input = std::get_if<InputShares>(&msg))
        reply = handle_input(*input, rng);
      else
        reply = ErrorReply{ErrorCode::malformed, "unexpected message type"};
    } catch (const WireError& e) {
      reply = ErrorReply{ErrorCode::malformed, e.what()};
    } catch (const std::exception& e) {
      reply = ErrorReply{ErrorCode::internal, e.what()};
    }
    return encode_message(reply);
  }

  std::filesystem::path session_path(const std::string& id) const {
    return std::filesystem::path(cfg_.state_dir) / (id + ".setup");
  }

  WireMessage handle_setup(const SetupShares& m,
                           const std::vector<std::uint8_t>& frame) {
    if (m.server_index != m.slice.server_index)
      return ErrorReply{ErrorCode::malformed,
                        "server index disagrees with slice"};
    std::vector<int> keys;
    for (const auto& [u, share] : m.function_shares) keys.push_back(u);
    if (keys != m.slice.A)
      return ErrorReply{ErrorCode::bad_dims,
                        "function shares must cover exactly the slice rows"};
    const FieldMatrix& first = m.function_shares.begin()->second;
    for (const auto& [u, share] : m.function_shares)
      if (share.rows() != first.rows() || share.cols() != first.cols())
        return ErrorReply{ErrorCode::bad_dims, "ragged function shares"};
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (sessions_.count(m.session_id) ||
          std::filesystem::exists(session_path(m.session_id)))
        return ErrorReply{ErrorCode::dup_setup,
                          "session already established: " + m.session_id};
    }
    auto path = session_path(m.session_id);
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(frame.data()),
                static_cast<std::streamsize>(frame.size()));
      if (!out) throw std::runtime_error("cannot persist session state");
    }
    std::filesystem::rename(tmp, path);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!sessions_.emplace(m.session_id, std::make_shared<Session>(Session{m}))
               .second)
        return ErrorReply{ErrorCode::dup_setup,
                          "session already established: " + m.session_id};
    }
    return Results{m.session_id, 0, m.modulus, {}};
  }

  std::shared_ptr<const Session> find_session(const std::string& id) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = sessions_.find(id);
      if (it != sessions_.end()) return it->second;
    }
    // fall back to a setup persisted by an earlier run
    std::ifstream in(session_path(id), std::ios::binary);
    if (!in) return nullptr;
    std::vector<std::uint8_t> bytes(
        (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    WireMessage msg = decode_message(bytes);  // WireError → MALFORMED upstream
    auto* setup = std::get_if<SetupShares>(&msg);
    if (!setup || setup->session_id != id)
      throw std::runtime_error("state file does not hold this session");
    auto session = std::make_shared<Session>(Session{std::move(*setup)});
    std::lock_guard<std::mutex> lock(mu_);
    return sessions_.emplace(id, std::move(session)).first->second;
  }

  WireMessage handle_input(const InputShares& m, SystemRng& rng) {
    auto session = find_session(m.session_id);
    if (!session)
      return ErrorReply{ErrorCode::unknown_session, m.session_id};
    const SetupShares& setup = session->setup;
    if (m.modulus->value() != setup.modulus->value())
      return ErrorReply{ErrorCode::bad_dims, "modulus differs from session"};
    std::vector<int> keys;
    for (const auto& [v, share] : m.input_shares) keys.push_back(v);
    if (keys != setup.slice.B)
      return ErrorReply{ErrorCode::bad_dims,
                        "input shares must cover exactly the slice columns"};
    const std::size_t want = setup.function_shares.begin()->second.cols();
    for (const auto& [v, share] : m.input_shares)
      if (share.dim() != want)
        return ErrorReply{ErrorCode::bad_dims, "input share length mismatch"};
    ServerOutput outputs =
        compute(setup.function_shares, m.input_shares, setup.slice.C);
    if (cfg_.tamper)
      for (auto& [pair, y] : outputs)
        y = vec_add(y, nonzero_offset(*setup.modulus, y.dim(), rng));
    return Results{m.session_id, m.request_id, setup.modulus,
                   std::move(outputs)};
  }

  static FieldVector nonzero_offset(const FieldModulus& mod, std::size_t dim,
                                    RandomSource& rng) {
    for (;;) {
      FieldVector delta = random_vector(mod, dim, rng);
      for (std::size_t i = 0; i < dim; ++i)
        if (!(delta.at(i).canonical() == U256{0})) return delta;
    }
  }

  ServerConfig cfg_;
  detail::UniqueFd listen_fd_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  bool running_ = false;
  std::thread accept_thread_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::set<int> conns_;
  std::vector<std::thread> workers_;
};

/// Hands each daemon its slice of a freshly generated function key.
inline void push_function_shares(const std::vector<Endpoint>& endpoints,
                                 const std::string& session_id,
                                 const CoveringScheme& scheme,
                                 const FieldModulus& mod, const FunctionKey& fk,
                                 int timeout_ms = 5000,
                                 bool tolerate_existing = true) {
  if (endpoints.size() != static_cast<std::size_t>(scheme.k))
    throw std::invalid_argument("need exactly one endpoint per server");
  const std::uint64_t digest = scheme_digest(scheme);
  for (int l = 1; l <= scheme.k; ++l) {
    SetupShares msg{session_id,
                    l,
                    digest,
                    slice_for(scheme, l),
                    borrow_modulus(mod),
                    fk.rho[static_cast<std::size_t>(l - 1)]};
    Connection conn(endpoints[static_cast<std::size_t>(l - 1)], timeout_ms);
    WireMessage reply = conn.round_trip(msg);
    if (auto* err = std::get_if<ErrorReply>(&reply)) {
      if (err->code == ErrorCode::dup_setup && tolerate_existing) continue;
      throw RemoteError(err->code, err->detail);
    }
    auto* ack = std::get_if<Results>(&reply);
    if (!ack || ack->session_id != session_id || !ack->outputs.empty())
      throw TransportError("unexpected reply to setup");
  }
}

struct DelegateOptions {
  int timeout_ms = 5000;
  std::uint64_t request_id = 1;
  std::size_t max_frame_bytes = default_max_frame;
};

/// Computing phase against live daemons with shares prepared by the caller;
/// nullopt means the verifier caught an inconsistent answer.
inline std::optional<FieldVector> delegate_remote_prepared(
    const std::vector<Endpoint>& endpoints, const std::string& session_id,
    const FieldModulus& mod, const InputSharesPerServer& sigma,
    const InputKey& ik, const VerificationKey& vk,
    const CoveringScheme& scheme, const DelegateOptions& opts = {}) {
  const auto k = static_cast<std::size_t>(scheme.k);
  if (endpoints.size() != k)
    throw std::invalid_argument("need exactly one endpoint per server");
  if (sigma.size() != k)
    throw std::invalid_argument("need input shares for every server");
  std::vector<ServerOutput> outputs(k);
  std::vector<std::exception_ptr> failures(k);
  std::vector<std::thread> fanout;
  fanout.reserve(k);
  for (std::size_t l = 0; l < k; ++l) {
    fanout.emplace_back([&, l] {
      try {
        Connection conn(endpoints[l], opts.timeout_ms);
        InputShares msg{session_id, opts.request_id, borrow_modulus(mod),
                        sigma[l]};
        WireMessage reply = conn.round_trip(msg);
        if (auto* err = std::get_if<ErrorReply>(&reply))
          throw RemoteError(err->code, err->detail);
        auto* res = std::get_if<Results>(&reply);
        if (!res) throw TransportError("server sent a non-result reply");
        if (res->session_id != session_id ||
            res->request_id != opts.request_id)
          throw TransportError("reply belongs to a different request");
        if (res->modulus->value() != mod.value())
          throw TransportError("reply under a different modulus");
        for (const auto& [pair, y] : res->outputs)
          outputs[l].emplace(pair, detail::rebind_vector(y, mod));
      } catch (...) {
        failures[l] = std::current_exception();
      }
    });
  }
  for (std::thread& t : fanout) t.join();
  for (std::size_t l = 0; l < k; ++l)
    if (failures[l]) std::rethrow_exception(failures[l]);
  VerifyOutcome out = verify(vk, ik, outputs, scheme);
  if (!out.ok()) return std::nullopt;
  return out.value();
}

inline std::optional<FieldVector> delegate_remote(
    const std::vector<Endpoint>& endpoints, const std::string& session_id,
    const FieldVector& x, const VerificationKey& vk,
    const CoveringScheme& scheme, RandomSource& rng,
    const DelegateOptions& opts = {}) {
  auto [sigma, ik] = prob_gen(x, scheme, rng);
  return delegate_remote_prepared(endpoints, session_id, x.modulus(), sigma,
                                  ik, vk, scheme, opts);
}

}  // namespace msvc
