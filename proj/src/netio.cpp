#include "etmpc/netio.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <sstream>

namespace etmpc::net {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

bool known_kind(std::uint8_t k) {
  switch (static_cast<FrameKind>(k)) {
    case FrameKind::request:
    case FrameKind::reply_a1:
    case FrameKind::reply_a2:
    case FrameKind::reply_a3:
    case FrameKind::reply_a4:
    case FrameKind::error:
      return true;
  }
  return false;
}

Variant variant_of(FrameKind kind) {
  switch (kind) {
    case FrameKind::reply_a1: return Variant::A1;
    case FrameKind::reply_a2: return Variant::A2;
    case FrameKind::reply_a3: return Variant::A3;
    case FrameKind::reply_a4: return Variant::A4;
    default: break;
  }
  throw Error(Errc::framing_error, "frame is not a reply");
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

/// Waits for `events` on fd. Returns false on timeout.
bool wait_for(int fd, short events, int timeout_ms) {
  pollfd p{fd, events, 0};
  for (;;) {
    const int r = ::poll(&p, 1, timeout_ms);
    if (r > 0) return true;
    if (r == 0) return false;
    if (errno != EINTR) throw Error(Errc::connection_lost, errno_text("poll"));
  }
}

enum class IoResult { ok, closed, timed_out };

/// Reads exactly out.size() bytes unless the peer closes or the deadline passes.
IoResult read_exact(int fd, std::span<std::uint8_t> out, int timeout_ms) {
  std::size_t got = 0;
  while (got < out.size()) {
    if (!wait_for(fd, POLLIN, timeout_ms)) return IoResult::timed_out;
    const ssize_t r = ::recv(fd, out.data() + got, out.size() - got, 0);
    if (r == 0) return IoResult::closed;
    if (r < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      return IoResult::closed;
    }
    got += static_cast<std::size_t>(r);
  }
  return IoResult::ok;
}

bool write_all(int fd, std::span<const std::uint8_t> data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t r = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string h = host.empty() ? "127.0.0.1" : host;
  if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    throw Error(Errc::invalid_argument, "cannot resolve host '" + h + "'");
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

}  // namespace

FrameKind reply_kind(Variant v) noexcept {
  switch (v) {
    case Variant::A1: return FrameKind::reply_a1;
    case Variant::A2: return FrameKind::reply_a2;
    case Variant::A3: return FrameKind::reply_a3;
    case Variant::A4: return FrameKind::reply_a4;
  }
  return FrameKind::error;
}

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) throw Error(Errc::framing_error, "payload exceeds the frame size limit");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + frame.payload.size());
  out.push_back(kMagic[0]);
  out.push_back(kMagic[1]);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(frame.kind));
  put_u16(out, frame.node_id);
  put_u32(out, static_cast<std::uint32_t>(frame.payload.size()));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

FrameHeader parse_header(std::span<const std::uint8_t> h) {
  if (h.size() < kHeaderSize) throw Error(Errc::framing_error, "frame shorter than its header");
  if (h[0] != kMagic[0] || h[1] != kMagic[1]) throw Error(Errc::framing_error, "bad frame magic");
  if (h[2] != kVersion) throw Error(Errc::framing_error, "unsupported frame version " + std::to_string(h[2]));
  if (!known_kind(h[3])) throw Error(Errc::framing_error, "unknown frame kind " + std::to_string(h[3]));
  FrameHeader out{static_cast<FrameKind>(h[3]), static_cast<std::uint16_t>((h[4] << 8) | h[5]),
                  (std::uint32_t{h[6]} << 24) | (std::uint32_t{h[7]} << 16) | (std::uint32_t{h[8]} << 8) | h[9]};
  if (out.payload_len > kMaxPayload) throw Error(Errc::framing_error, "payload length exceeds the frame size limit");
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  const FrameHeader h = parse_header(bytes);
  if (bytes.size() != kHeaderSize + h.payload_len) {
    std::ostringstream os;
    os << "frame declares " << h.payload_len << " payload bytes but carries " << bytes.size() - kHeaderSize;
    throw Error(Errc::framing_error, os.str());
  }
  return Frame{h.kind, h.node_id, std::vector<std::uint8_t>(bytes.begin() + kHeaderSize, bytes.end())};
}

std::vector<std::uint8_t> encode_state(const Vector& x) {
  std::vector<std::uint8_t> out;
  out.reserve(8 * static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(x(i));
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
  }
  return out;
}

Vector decode_state(std::span<const std::uint8_t> payload, Eigen::Index n) {
  if (payload.size() != 8 * static_cast<std::size_t>(n)) {
    std::ostringstream os;
    os << "state payload has " << payload.size() << " bytes, expected " << 8 * n;
    throw Error(Errc::framing_error, os.str());
  }
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits = (bits << 8) | payload[static_cast<std::size_t>(8 * i + b)];
    x(i) = std::bit_cast<double>(bits);
  }
  return x;
}

Frame make_error_frame(std::uint16_t node_id, Errc code, const std::string& message) {
  Frame f{FrameKind::error, node_id, {}};
  f.payload.push_back(static_cast<std::uint8_t>(code));
  f.payload.insert(f.payload.end(), message.begin(), message.end());
  return f;
}

void CentralNode::register_node(std::uint16_t node_id, NodeConfig config) {
  if (!config.qp) throw Error(Errc::invalid_argument, "node registered without a QP");
  std::unique_lock lock(mutex_);
  nodes_[node_id] = std::move(config);
}

Frame CentralNode::reply(const Frame& request) const {
  if (request.kind != FrameKind::request) throw Error(Errc::framing_error, "central node only accepts requests");
  NodeConfig cfg;
  {
    std::shared_lock lock(mutex_);
    const auto it = nodes_.find(request.node_id);
    if (it == nodes_.end()) throw Error(Errc::invalid_argument, "unknown node " + std::to_string(request.node_id));
    cfg = it->second;
  }
  const CondensedQp& qp = *cfg.qp;
  const Vector x = decode_state(request.payload, qp.n());
  const QpSolution sol = solve_qp(qp, x, cfg.qp_options);
  WireMessage msg;
  switch (cfg.variant) {
    case Variant::A1: msg = encode_a1(sol.active); break;
    case Variant::A2: msg = encode_a2(sol.active, compute_phi(qp, sol.active), cfg.codec); break;
    case Variant::A3: msg = encode_a3(sol.u_star, cfg.codec); break;
    case Variant::A4: msg = encode_a4(build_region(qp, sol.active, BackendKind::lu_pivoted), cfg.codec); break;
  }
  return Frame{reply_kind(cfg.variant), request.node_id, std::move(msg.payload)};
}

Frame CentralNode::handle(const Frame& request) const noexcept {
  try {
    Frame out = reply(request);
    served_.fetch_add(1);
    return out;
  } catch (const Error& e) {
    try {
      return make_error_frame(request.node_id, e.code(), e.what());
    } catch (...) {
    }
  } catch (const std::exception& e) {
    try {
      return make_error_frame(request.node_id, Errc::server_error, e.what());
    } catch (...) {
    }
  } catch (...) {
  }
  return Frame{FrameKind::error, request.node_id, {static_cast<std::uint8_t>(Errc::server_error)}};
}

std::vector<std::uint8_t> CentralNode::handle_bytes(std::span<const std::uint8_t> request) const noexcept {
  try {
    Frame in;
    try {
      in = decode_frame(request);
    } catch (const Error& e) {
      const std::uint16_t node = request.size() >= 6 ? static_cast<std::uint16_t>((request[4] << 8) | request[5]) : 0;
      return encode_frame(make_error_frame(node, e.code(), e.what()));
    }
    return encode_frame(handle(in));
  } catch (...) {
    return {};
  }
}

std::vector<std::uint8_t> LoopbackTransport::exchange(std::span<const std::uint8_t> request) {
  ++sent_;
  std::vector<std::uint8_t> reply = central_.handle_bytes(request);
  if (reply.empty()) throw Error(Errc::connection_lost, "loopback central node produced no reply");
  ++received_;
  return reply;
}

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::invalid_argument, "address '" + address + "' lacks ':port'");
  const std::string port_text = address.substr(colon + 1);
  try {
    std::size_t used = 0;
    const unsigned long port = std::stoul(port_text, &used);
    if (used != port_text.size() || port > 65535) throw std::out_of_range("port");
    return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
  } catch (const std::logic_error&) {
    throw Error(Errc::invalid_argument, "bad port in address '" + address + "'");
  }
}

TcpTransport::TcpTransport(const std::string& address, std::chrono::milliseconds timeout) : timeout_(timeout) {
  std::tie(host_, port_) = parse_address(address);
  connect_socket();
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::connect_socket() {
  const sockaddr_in addr = resolve(host_, port_);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error(Errc::connection_lost, errno_text("socket"));
  if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string msg = errno_text("connect");
    ::close(fd_);
    fd_ = -1;
    throw Error(Errc::connection_lost, msg);
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

std::vector<std::uint8_t> TcpTransport::exchange(std::span<const std::uint8_t> request) {
  if (fd_ < 0) connect_socket();
  if (!write_all(fd_, request)) {
    ::close(fd_);
    fd_ = -1;
    throw Error(Errc::connection_lost, "connection lost while sending");
  }
  ++sent_;
  const int ms = static_cast<int>(timeout_.count());
  std::vector<std::uint8_t> reply(kHeaderSize);
  auto fail = [&](IoResult r) {
    ::close(fd_);
    fd_ = -1;
    if (r == IoResult::timed_out) throw Error(Errc::timeout, "no reply within " + std::to_string(ms) + " ms");
    throw Error(Errc::connection_lost, "connection lost while receiving");
  };
  if (auto r = read_exact(fd_, reply, ms); r != IoResult::ok) fail(r);
  const FrameHeader h = parse_header(reply);
  reply.resize(kHeaderSize + h.payload_len);
  if (auto r = read_exact(fd_, std::span(reply).subspan(kHeaderSize), ms); r != IoResult::ok) fail(r);
  ++received_;
  return reply;
}

TcpServer::TcpServer(const CentralNode& central, const std::string& address) : central_(central) {
  const auto [host, port] = parse_address(address);
  const sockaddr_in addr = resolve(host, port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(Errc::connection_lost, errno_text("socket"));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
    const std::string msg = errno_text("bind/listen");
    ::close(listen_fd_);
    throw Error(Errc::connection_lost, msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::start() {
  acceptor_ = std::thread([this] { run(); });
}

void TcpServer::run() {
  while (!stopping_.load()) {
    if (!wait_for(listen_fd_, POLLIN, 100)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void TcpServer::serve_connection(int fd) {
  std::vector<std::uint8_t> buf(kHeaderSize);
  while (!stopping_.load()) {
    buf.resize(kHeaderSize);
    const IoResult r = read_exact(fd, std::span(buf).first(kHeaderSize), 100);
    if (r == IoResult::timed_out) continue;
    if (r == IoResult::closed) break;
    FrameHeader h;
    try {
      h = parse_header(buf);
    } catch (const Error& e) {
      // The stream cannot be resynchronized after a bad header.
      const std::uint16_t node = static_cast<std::uint16_t>((buf[4] << 8) | buf[5]);
      write_all(fd, encode_frame(make_error_frame(node, e.code(), e.what())));
      break;
    }
    buf.resize(kHeaderSize + h.payload_len);
    if (read_exact(fd, std::span(buf).subspan(kHeaderSize), 1000) != IoResult::ok) break;
    const std::vector<std::uint8_t> reply = central_.handle_bytes(buf);
    if (reply.empty() || !write_all(fd, reply)) break;
  }
  ::close(fd);
}

void TcpServer::stop() {
  stopping_.store(true);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mutex_);
    workers.swap(workers_);
  }
  for (auto& t : workers)
    if (t.joinable()) t.join();
}

LocalClient::LocalClient(Transport& transport, std::uint16_t node_id, QpDims dims, Variant variant, RealCodec codec)
    : transport_(transport), node_id_(node_id), dims_(dims), variant_(variant), codec_(codec) {}

LawReply LocalClient::request_law(const Vector& x_next) {
  if (x_next.size() != dims_.n) throw Error(Errc::dimension_mismatch, "request state has the wrong length");
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::uint8_t> bytes =
      transport_.exchange(encode_frame(Frame{FrameKind::request, node_id_, encode_state(x_next)}));
  Frame frame = decode_frame(bytes);
  LawReply out;
  out.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.frame_bytes = bytes.size();
  if (frame.node_id != node_id_) throw Error(Errc::framing_error, "reply addressed to another node");
  if (frame.kind == FrameKind::error) {
    const Errc code = frame.payload.empty() ? Errc::server_error : static_cast<Errc>(frame.payload[0]);
    const std::string text = frame.payload.size() > 1 ? std::string(frame.payload.begin() + 1, frame.payload.end()) : "";
    switch (code) {
      case Errc::infeasible: throw Error(Errc::central_infeasible, "central node: " + text);
      case Errc::degenerate_active_set:
      case Errc::rank_deficient:
      case Errc::range_error:
        throw Error(code, "central node: " + text);
      default: throw Error(Errc::server_error, "central node (" + std::string(errc_name(code)) + "): " + text);
    }
  }
  const Variant v = variant_of(frame.kind);
  if (v != variant_) throw Error(Errc::framing_error, "reply variant does not match the node configuration");
  out.message = WireMessage{v, codec_, std::move(frame.payload), 0};
  const auto q = static_cast<std::size_t>(dims_.q);
  out.received_bits = received_bits(out.message, q);
  switch (v) {
    case Variant::A1: out.active = decode_a1(out.message, q); break;
    case Variant::A2: {
      auto d = decode_a2(out.message, q);
      out.active = std::move(d.active);
      out.phi = std::move(d.phi);
      break;
    }
    case Variant::A3: out.u_star = decode_a3(out.message, static_cast<std::size_t>(dims_.mN())); break;
    case Variant::A4:
      out.region = decode_a4(out.message, static_cast<std::size_t>(dims_.m), static_cast<std::size_t>(dims_.n), q);
      break;
  }
  out.message.bit_length = out.received_bits;
  return out;
}

}  // namespace etmpc::net
