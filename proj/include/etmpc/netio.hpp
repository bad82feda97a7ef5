#pragma once

// Star-topology transport between local nodes and the central node.
//
// Frame layout (big-endian):
//   0  magic    2 bytes  0x45 0x54 ("ET")
//   2  version  1 byte   1
//   3  kind     1 byte   request 0x01, reply A1..A4 0x11..0x14, error 0x7F
//   4  node_id  2 bytes
//   6  length   4 bytes  payload length
//  10  payload
//
// A request carries the predicted state as n binary64 values. A reply carries
// the WireMessage payload of its variant; the real codec is agreed per node at
// registration. An error carries one Errc byte followed by a UTF-8 message.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "etmpc/error.hpp"
#include "etmpc/protocol.hpp"
#include "etmpc/qp.hpp"
#include "etmpc/region.hpp"

namespace etmpc::net {

inline constexpr std::array<std::uint8_t, 2> kMagic{0x45, 0x54};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::uint32_t kMaxPayload = 1u << 24;

enum class FrameKind : std::uint8_t {
  request = 0x01,
  reply_a1 = 0x11,
  reply_a2 = 0x12,
  reply_a3 = 0x13,
  reply_a4 = 0x14,
  error = 0x7F,
};

FrameKind reply_kind(Variant v) noexcept;

struct Frame {
  FrameKind kind = FrameKind::request;
  std::uint16_t node_id = 0;
  std::vector<std::uint8_t> payload;
};

struct FrameHeader {
  FrameKind kind;
  std::uint16_t node_id;
  std::uint32_t payload_len;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);
/// Throws Error(framing_error) on bad magic, version, kind or an oversized length.
FrameHeader parse_header(std::span<const std::uint8_t> header);
/// Header plus exactly payload_len bytes; anything else is a framing error.
Frame decode_frame(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_state(const Vector& x);
Vector decode_state(std::span<const std::uint8_t> payload, Eigen::Index n);

Frame make_error_frame(std::uint16_t node_id, Errc code, const std::string& message);

struct NodeConfig {
  std::shared_ptr<const CondensedQp> qp;
  Variant variant = Variant::A1;
  RealCodec codec = RealCodec::binary16;
  QpOptions qp_options;
};

/// QP solver plus node registry. handle() is safe to call concurrently.
class CentralNode {
 public:
  void register_node(std::uint16_t node_id, NodeConfig config);

  /// Never throws: every failure becomes an error frame.
  Frame handle(const Frame& request) const noexcept;
  std::vector<std::uint8_t> handle_bytes(std::span<const std::uint8_t> request) const noexcept;

  std::uint64_t requests_served() const noexcept { return served_.load(); }

 private:
  Frame reply(const Frame& request) const;

  mutable std::shared_mutex mutex_;
  std::unordered_map<std::uint16_t, NodeConfig> nodes_;
  mutable std::atomic<std::uint64_t> served_{0};
};

/// Client side of one request/reply exchange.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Sends one encoded frame and returns the encoded reply frame.
  virtual std::vector<std::uint8_t> exchange(std::span<const std::uint8_t> request) = 0;

  std::uint64_t frames_sent() const noexcept { return sent_; }
  std::uint64_t frames_received() const noexcept { return received_; }

 protected:
  std::uint64_t sent_ = 0;
  std::uint64_t received_ = 0;
};

/// In-process transport; the exchange takes zero simulated time.
class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(const CentralNode& central) : central_(central) {}
  std::vector<std::uint8_t> exchange(std::span<const std::uint8_t> request) override;

 private:
  const CentralNode& central_;
};

/// "host:port" split; throws Error(invalid_argument).
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

/// Stream-socket client. Throws Error(timeout) when a reply takes longer than
/// the timeout and Error(connection_lost) when the peer goes away; both are retriable.
class TcpTransport final : public Transport {
 public:
  TcpTransport(const std::string& address, std::chrono::milliseconds timeout = std::chrono::milliseconds(1000));
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  std::vector<std::uint8_t> exchange(std::span<const std::uint8_t> request) override;

 private:
  void connect_socket();

  std::string host_;
  std::uint16_t port_;
  std::chrono::milliseconds timeout_;
  int fd_ = -1;
};

/// Accepts connections and serves each one on its own thread.
class TcpServer {
 public:
  /// Binds immediately; port 0 picks an ephemeral port.
  TcpServer(const CentralNode& central, const std::string& address);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void start();  ///< accept loop on a background thread
  void run();    ///< accept loop on the calling thread until stop()
  void stop();

 private:
  void serve_connection(int fd);

  const CentralNode& central_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
};

/// What a local node gets back for one event.
struct LawReply {
  WireMessage message;
  std::int64_t received_bits = 0;
  std::size_t frame_bytes = 0;  ///< reply frame size including the header
  double latency_seconds = 0.0;
  ActiveSet active;  ///< A1, A2
  Matrix phi;        ///< A2
  Vector u_star;     ///< A3
  Region region;     ///< A4
};

class LocalClient {
 public:
  LocalClient(Transport& transport, std::uint16_t node_id, QpDims dims, Variant variant, RealCodec codec);

  /// Throws Error(central_infeasible) if the central node found no feasible
  /// input sequence, Error(degenerate_active_set) / Error(rank_deficient) if it
  /// could not produce a regular active set, Error(server_error) otherwise.
  LawReply request_law(const Vector& x_next);

  Transport& transport() noexcept { return transport_; }
  Variant variant() const noexcept { return variant_; }
  RealCodec codec() const noexcept { return codec_; }

 private:
  Transport& transport_;
  std::uint16_t node_id_;
  QpDims dims_;
  Variant variant_;
  RealCodec codec_;
};

}  // namespace etmpc::net
