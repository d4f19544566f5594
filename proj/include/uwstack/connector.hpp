#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <termios.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

#include "uwstack/packet.hpp"
#include "uwstack/time.hpp"

namespace uwstack {

class ConnectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Endpoint grammar:
//   tcp://host:port           TCP client (3 connect attempts, 250/500/1000 ms)
//   tcps://bind:port          TCP server, accepts one client
//   udp://host:port[?bind=p]  UDP; empty host = listener replying to last peer
//   serial://path?baud=115200 serial device (termios raw mode)
//   pipe://name               in-process duplex byte channel, pairs two opens
struct Endpoint {
  enum class Kind { TcpClient, TcpServer, Udp, Serial, Pipe };

  Kind kind = Kind::TcpClient;
  std::string host;
  std::uint16_t port = 0;
  std::uint16_t bind_port = 0;  // udp only; 0 = ephemeral
  std::string path;             // serial device or pipe name
  int baud = 115200;

  static Endpoint parse(const std::string& uri) {
    Endpoint ep;
    auto scheme_end = uri.find("://");
    if (scheme_end == std::string::npos)
      throw std::invalid_argument("endpoint missing scheme: " + uri);
    std::string scheme = uri.substr(0, scheme_end);
    std::string rest = uri.substr(scheme_end + 3);

    if (scheme == "serial") {
      ep.kind = Kind::Serial;
      auto q = rest.find('?');
      ep.path = rest.substr(0, q);
      if (q != std::string::npos) {
        std::string query = rest.substr(q + 1);
        if (query.rfind("baud=", 0) == 0)
          ep.baud = std::stoi(query.substr(5));
      }
      if (ep.path.empty()) throw std::invalid_argument("serial needs a path");
      if (ep.baud <= 0) throw std::invalid_argument("baud must be > 0");
      return ep;
    }
    if (scheme == "pipe") {
      ep.kind = Kind::Pipe;
      ep.path = rest;
      if (ep.path.empty()) throw std::invalid_argument("pipe needs a name");
      return ep;
    }

    if (scheme == "tcp")
      ep.kind = Kind::TcpClient;
    else if (scheme == "tcps")
      ep.kind = Kind::TcpServer;
    else if (scheme == "udp")
      ep.kind = Kind::Udp;
    else
      throw std::invalid_argument("unknown endpoint scheme: " + scheme);

    std::string addr = rest;
    auto q = addr.find('?');
    std::string query;
    if (q != std::string::npos) {
      query = addr.substr(q + 1);
      addr = addr.substr(0, q);
    }
    auto colon = addr.rfind(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("endpoint missing port: " + uri);
    ep.host = addr.substr(0, colon);
    long port = std::stol(addr.substr(colon + 1));
    if (port < 1 || port > 65535)
      throw std::invalid_argument("port out of range: " + uri);
    ep.port = static_cast<std::uint16_t>(port);
    if (!query.empty() && query.rfind("bind=", 0) == 0)
      ep.bind_port = static_cast<std::uint16_t>(std::stoi(query.substr(5)));
    return ep;
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::TcpClient: return "tcp://" + host + ":" + std::to_string(port);
      case Kind::TcpServer: return "tcps://" + host + ":" + std::to_string(port);
      case Kind::Udp: return "udp://" + host + ":" + std::to_string(port);
      case Kind::Serial:
        return "serial://" + path + "?baud=" + std::to_string(baud);
      case Kind::Pipe: return "pipe://" + path;
    }
    return "?";
  }
};

struct ConnectorStats {
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  TimePoint opened_at{};
};

// One reader context and one writer context may use a handle concurrently.
class Connection {
 public:
  virtual ~Connection() = default;

  // Writes everything or throws; partial writes are retried internally.
  virtual std::size_t write_bytes(const std::uint8_t* data, std::size_t n) = 0;

  std::size_t write_bytes(const Bytes& data) {
    return write_bytes(data.data(), data.size());
  }

  // Non-blocking. nullopt = end-of-stream, empty vector = nothing buffered.
  virtual std::optional<Bytes> read_available(std::size_t max) = 0;

  virtual void close() = 0;  // idempotent

  const ConnectorStats& stats() const { return stats_; }

 protected:
  ConnectorStats stats_;
};

namespace detail {

inline void set_nonblocking(int fd) {
  int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

// TCP / UDP / serial share the fd read-write path.
class FdConnection : public Connection {
 public:
  FdConnection(int fd, bool stream) : fd_(fd), stream_(stream) {
    stats_.opened_at = now();
  }

  ~FdConnection() override { close(); }

  std::size_t write_bytes(const std::uint8_t* data, std::size_t n) override {
    std::lock_guard lk(wr_mu_);
    if (fd_ < 0) throw ConnectorError("write on closed connection");
    if (n == 0) return 0;
    if (!stream_) {  // one datagram per call
      ssize_t w = ::send(fd_, data, n, MSG_NOSIGNAL);
      if (w < 0) throw ConnectorError(std::string("send: ") + std::strerror(errno));
      stats_.bytes_out += static_cast<std::uint64_t>(w);
      return static_cast<std::size_t>(w);
    }
    std::size_t off = 0;
    while (off < n) {
      ssize_t w = ::send(fd_, data + off, n - off, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
          struct pollfd pfd{fd_, POLLOUT, 0};
          ::poll(&pfd, 1, 100);
          continue;
        }
        throw ConnectorError(std::string("write: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(w);
    }
    stats_.bytes_out += n;
    return n;
  }

  std::optional<Bytes> read_available(std::size_t max) override {
    std::lock_guard lk(rd_mu_);
    if (fd_ < 0) return std::nullopt;
    Bytes buf(max);
    ssize_t r = ::recv(fd_, buf.data(), max, 0);
    if (r < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK) return Bytes{};
      return std::nullopt;
    }
    if (r == 0 && stream_) return std::nullopt;  // orderly shutdown
    buf.resize(static_cast<std::size_t>(r));
    stats_.bytes_in += static_cast<std::uint64_t>(r);
    return buf;
  }

  void close() override {
    std::scoped_lock lk(rd_mu_, wr_mu_);
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 protected:
  int fd_;
  bool stream_;
  std::mutex rd_mu_, wr_mu_;
};

// Serial uses plain read/write instead of the socket calls.
class SerialConnection : public FdConnection {
 public:
  using FdConnection::FdConnection;

  std::size_t write_bytes(const std::uint8_t* data, std::size_t n) override {
    std::lock_guard lk(wr_mu_);
    if (fd_ < 0) throw ConnectorError("write on closed connection");
    std::size_t off = 0;
    while (off < n) {
      ssize_t w = ::write(fd_, data + off, n - off);
      if (w < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
          struct pollfd pfd{fd_, POLLOUT, 0};
          ::poll(&pfd, 1, 100);
          continue;
        }
        throw ConnectorError(std::string("serial write: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(w);
    }
    stats_.bytes_out += n;
    return n;
  }

  std::optional<Bytes> read_available(std::size_t max) override {
    std::lock_guard lk(rd_mu_);
    if (fd_ < 0) return std::nullopt;
    Bytes buf(max);
    ssize_t r = ::read(fd_, buf.data(), max);
    if (r < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK) return Bytes{};
      return std::nullopt;
    }
    if (r == 0) return Bytes{};  // no data; a pty never reports EOF this way
    buf.resize(static_cast<std::size_t>(r));
    stats_.bytes_in += static_cast<std::uint64_t>(r);
    return buf;
  }
};

inline speed_t baud_constant(int baud) {
  switch (baud) {
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    case 230400: return B230400;
    default: throw std::invalid_argument("unsupported baud " + std::to_string(baud));
  }
}

// In-process duplex byte channel; two opens of the same name become peers.
class PipeHub {
 public:
  struct Side {
    std::mutex mu;
    std::deque<std::uint8_t> buf;
    bool closed = false;
  };
  struct Pair {
    Side a_to_b, b_to_a;
    bool a_taken = false, b_taken = false;
  };

  static PipeHub& instance() {
    static PipeHub hub;
    return hub;
  }

  // Returns (pair, is_side_a)
  std::pair<std::shared_ptr<Pair>, bool> attach(const std::string& name) {
    std::lock_guard lk(mu_);
    auto& slot = pairs_[name];
    if (!slot || (slot->a_taken && slot->b_taken)) slot = std::make_shared<Pair>();
    if (!slot->a_taken) {
      slot->a_taken = true;
      return {slot, true};
    }
    slot->b_taken = true;
    auto p = slot;
    return {p, false};
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Pair>> pairs_;
};

class PipeConnection : public Connection {
 public:
  PipeConnection(std::shared_ptr<PipeHub::Pair> pair, bool side_a)
      : pair_(std::move(pair)), side_a_(side_a) {
    stats_.opened_at = now();
  }

  ~PipeConnection() override { close(); }

  std::size_t write_bytes(const std::uint8_t* data, std::size_t n) override {
    if (closed_) throw ConnectorError("write on closed connection");
    auto& out = side_a_ ? pair_->a_to_b : pair_->b_to_a;
    std::lock_guard lk(out.mu);
    if (out.closed) throw ConnectorError("write to closed pipe");
    out.buf.insert(out.buf.end(), data, data + n);
    stats_.bytes_out += n;
    return n;
  }

  std::optional<Bytes> read_available(std::size_t max) override {
    if (closed_) return std::nullopt;
    auto& in = side_a_ ? pair_->b_to_a : pair_->a_to_b;
    std::lock_guard lk(in.mu);
    if (in.buf.empty()) {
      if (in.closed) return std::nullopt;
      return Bytes{};
    }
    std::size_t n = std::min(max, in.buf.size());
    Bytes out(in.buf.begin(), in.buf.begin() + static_cast<long>(n));
    in.buf.erase(in.buf.begin(), in.buf.begin() + static_cast<long>(n));
    stats_.bytes_in += n;
    return out;
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    auto& out = side_a_ ? pair_->a_to_b : pair_->b_to_a;
    std::lock_guard lk(out.mu);
    out.closed = true;  // peer sees end-of-stream after draining
  }

 private:
  std::shared_ptr<PipeHub::Pair> pair_;
  bool side_a_;
  std::atomic<bool> closed_{false};
};

inline sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  std::string h = host.empty() ? "0.0.0.0" : host;
  if (::inet_pton(AF_INET, h.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw ConnectorError("cannot resolve host: " + host);
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return sa;
}

inline std::unique_ptr<Connection> open_tcp_client(const Endpoint& ep) {
  const int backoff_ms[3] = {250, 500, 1000};
  sockaddr_in sa = resolve(ep.host, ep.port);
  std::string last_err;
  for (int attempt = 0; attempt < 3; ++attempt) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConnectorError("socket: " + std::string(std::strerror(errno)));
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      set_nonblocking(fd);
      return std::make_unique<FdConnection>(fd, true);
    }
    last_err = std::strerror(errno);
    ::close(fd);
    std::this_thread::sleep_for(Millis(backoff_ms[attempt]));
  }
  throw ConnectorError("open failed for " + ep.to_string() + ": " + last_err);
}

inline std::unique_ptr<Connection> open_tcp_server(const Endpoint& ep,
                                                   Millis accept_timeout) {
  int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (lfd < 0) throw ConnectorError("socket: " + std::string(std::strerror(errno)));
  int one = 1;
  ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa = resolve(ep.host, ep.port);
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    std::string err = std::strerror(errno);
    ::close(lfd);
    throw ConnectorError("bind failed for " + ep.to_string() + ": " + err);
  }
  ::listen(lfd, 1);
  struct pollfd pfd{lfd, POLLIN, 0};
  int rc = ::poll(&pfd, 1, static_cast<int>(accept_timeout.count()));
  if (rc <= 0) {
    ::close(lfd);
    throw ConnectorError("accept timeout on " + ep.to_string());
  }
  int fd = ::accept(lfd, nullptr, nullptr);
  ::close(lfd);
  if (fd < 0) throw ConnectorError("accept: " + std::string(std::strerror(errno)));
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  set_nonblocking(fd);
  return std::make_unique<FdConnection>(fd, true);
}

// A UDP "connection": bound socket; with a host it is peer-locked, without
// one it answers whoever sent the last datagram.
class UdpConnection : public FdConnection {
 public:
  UdpConnection(int fd, bool connected) : FdConnection(fd, false), connected_(connected) {}

  std::size_t write_bytes(const std::uint8_t* data, std::size_t n) override {
    if (connected_) return FdConnection::write_bytes(data, n);
    std::lock_guard lk(wr_mu_);
    if (fd_ < 0) throw ConnectorError("write on closed connection");
    std::lock_guard plk(peer_mu_);
    if (!have_peer_) throw ConnectorError("udp listener has no peer yet");
    ssize_t w = ::sendto(fd_, data, n, MSG_NOSIGNAL,
                         reinterpret_cast<const sockaddr*>(&peer_), sizeof(peer_));
    if (w < 0) throw ConnectorError(std::string("sendto: ") + std::strerror(errno));
    stats_.bytes_out += static_cast<std::uint64_t>(w);
    return static_cast<std::size_t>(w);
  }

  std::optional<Bytes> read_available(std::size_t max) override {
    if (connected_) return FdConnection::read_available(max);
    std::lock_guard lk(rd_mu_);
    if (fd_ < 0) return std::nullopt;
    Bytes buf(max);
    sockaddr_in from{};
    socklen_t fromlen = sizeof(from);
    ssize_t r = ::recvfrom(fd_, buf.data(), max, 0,
                           reinterpret_cast<sockaddr*>(&from), &fromlen);
    if (r < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK) return Bytes{};
      return std::nullopt;
    }
    {
      std::lock_guard plk(peer_mu_);
      peer_ = from;
      have_peer_ = true;
    }
    buf.resize(static_cast<std::size_t>(r));
    stats_.bytes_in += static_cast<std::uint64_t>(r);
    return buf;
  }

 private:
  bool connected_;
  std::mutex peer_mu_;
  sockaddr_in peer_{};
  bool have_peer_ = false;
};

inline std::unique_ptr<Connection> open_udp(const Endpoint& ep) {
  int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) throw ConnectorError("socket: " + std::string(std::strerror(errno)));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  bool listener = ep.host.empty();
  sockaddr_in local{};
  local.sin_family = AF_INET;
  local.sin_addr.s_addr = INADDR_ANY;
  local.sin_port = htons(listener ? ep.port : ep.bind_port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&local), sizeof(local)) != 0) {
    std::string err = std::strerror(errno);
    ::close(fd);
    throw ConnectorError("bind failed for " + ep.to_string() + ": " + err);
  }
  if (!listener) {
    sockaddr_in sa = resolve(ep.host, ep.port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      std::string err = std::strerror(errno);
      ::close(fd);
      throw ConnectorError("open failed for " + ep.to_string() + ": " + err);
    }
  }
  set_nonblocking(fd);
  // larger buffers help the high-rate datagram benchmarks
  int sz = 4 * 1024 * 1024;
  ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &sz, sizeof(sz));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &sz, sizeof(sz));
  return std::make_unique<UdpConnection>(fd, !listener);
}

inline std::unique_ptr<Connection> open_serial(const Endpoint& ep) {
  int fd = ::open(ep.path.c_str(), O_RDWR | O_NOCTTY | O_NONBLOCK);
  if (fd < 0)
    throw ConnectorError("open failed for " + ep.to_string() + ": " +
                         std::strerror(errno));
  termios tio{};
  if (::tcgetattr(fd, &tio) == 0) {
    ::cfmakeraw(&tio);
    speed_t sp = baud_constant(ep.baud);
    ::cfsetispeed(&tio, sp);
    ::cfsetospeed(&tio, sp);
    tio.c_cc[VMIN] = 0;
    tio.c_cc[VTIME] = 0;
    ::tcsetattr(fd, TCSANOW, &tio);
  }
  return std::make_unique<SerialConnection>(fd, true);
}

}  // namespace detail

inline std::unique_ptr<Connection> open_endpoint(
    const Endpoint& ep, Millis accept_timeout = Millis(30000)) {
  switch (ep.kind) {
    case Endpoint::Kind::TcpClient: return detail::open_tcp_client(ep);
    case Endpoint::Kind::TcpServer: return detail::open_tcp_server(ep, accept_timeout);
    case Endpoint::Kind::Udp: return detail::open_udp(ep);
    case Endpoint::Kind::Serial: return detail::open_serial(ep);
    case Endpoint::Kind::Pipe: {
      auto [pair, side_a] = detail::PipeHub::instance().attach(ep.path);
      return std::make_unique<detail::PipeConnection>(pair, side_a);
    }
  }
  throw std::invalid_argument("bad endpoint kind");
}

inline std::unique_ptr<Connection> open_endpoint(const std::string& uri) {
  return open_endpoint(Endpoint::parse(uri));
}

}  // namespace uwstack
