#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "uwstack/connector.hpp"
#include "uwstack/emu/channel.hpp"

namespace uwstack {

// Cross-process medium coordination over TCP. One hub process owns the
// virtual medium; emulators in other processes attach through RemoteMedium.
//
// Line protocol, newline-terminated, payloads hex-encoded:
//   up:   A <addr>                                        attach
//         D <addr>                                        detach
//         T <src> <dst> <plen> <cls> <confirm> <ack> <tag> <hex>
//         C <src> <dst> <hex>                             control frame
//   down: R <rcvr> <src> <dst> <cls> <ack> <hex>          reception
//         F <src> <dst> <cls> <delivered> <tag>           confirmation

namespace detail_bridge {

inline std::string to_hex(const Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2 + 1);
  for (auto v : b) {
    s.push_back(digits[v >> 4]);
    s.push_back(digits[v & 0xF]);
  }
  if (s.empty()) s = "-";  // keep the field present for empty payloads
  return s;
}

inline Bytes from_hex(const std::string& s) {
  Bytes b;
  if (s == "-") return b;
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  for (std::size_t i = 0; i + 1 < s.size(); i += 2) {
    int hi = nib(s[i]), lo = nib(s[i + 1]);
    if (hi < 0 || lo < 0) return {};
    b.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return b;
}

inline TrafficClass cls_of(int v) {
  switch (v) {
    case 1: return TrafficClass::BURST;
    case 2: return TrafficClass::DATAGRAM;
    default: return TrafficClass::IM;
  }
}

inline int cls_id(TrafficClass c) {
  switch (c) {
    case TrafficClass::BURST: return 1;
    case TrafficClass::DATAGRAM: return 2;
    default: return 0;
  }
}

// Accumulates stream bytes and yields complete lines.
class LineBuffer {
 public:
  std::vector<std::string> feed(const Bytes& data) {
    buf_.append(data.begin(), data.end());
    std::vector<std::string> lines;
    std::size_t start = 0;
    for (std::size_t i = 0; i < buf_.size(); ++i) {
      if (buf_[i] == '\n') {
        lines.push_back(buf_.substr(start, i - start));
        start = i + 1;
      }
    }
    buf_.erase(0, start);
    return lines;
  }

 private:
  std::string buf_;
};

}  // namespace detail_bridge

// Serves one VirtualMedium to any number of TCP peers.
class MediumHub {
 public:
  MediumHub(const std::string& listen, ChannelConfig cfg, std::uint32_t seed = 1)
      : listen_(Endpoint::parse(listen)),
        medium_(std::make_shared<VirtualMedium>(cfg, seed)) {}

  ~MediumHub() { stop(); }

  void start() {
    if (running_.exchange(true)) return;
    lfd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (lfd_ < 0) throw ConnectorError("socket: " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(lfd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa = detail::resolve(listen_.host.empty() ? "0.0.0.0" : listen_.host,
                                     listen_.port);
    if (::bind(lfd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      std::string err = std::strerror(errno);
      ::close(lfd_);
      throw ConnectorError("bind failed for hub: " + err);
    }
    ::listen(lfd_, 16);
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (!running_.exchange(false)) return;
    if (lfd_ >= 0) ::close(lfd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::shared_ptr<Session>> sessions;
    {
      std::lock_guard lk(mu_);
      sessions = sessions_;
    }
    for (auto& s : sessions) s->close();
    for (auto& s : sessions)
      if (s->thread.joinable()) s->thread.join();
  }

  std::shared_ptr<VirtualMedium> medium() { return medium_; }

 private:
  // One connected peer; may attach several addresses.
  struct Session {
    MediumHub* hub = nullptr;
    std::unique_ptr<Connection> conn;
    std::mutex wmu;
    std::thread thread;
    std::vector<NodeAddress> attached;

    void send_line(const std::string& line) {
      std::lock_guard lk(wmu);
      if (!conn) return;
      try {
        conn->write_bytes(to_bytes(line + "\n"));
      } catch (const ConnectorError&) {
      }
    }

    void close() {
      std::lock_guard lk(wmu);
      if (conn) conn->close();
    }
  };

  // Per-address proxy so receptions carry the hearing address.
  struct AddrProxy : MediumClient {
    Session* session = nullptr;
    NodeAddress addr = 0;

    void on_medium_receive(NodeAddress src, NodeAddress dst, const Bytes& data,
                           TrafficClass cls, bool ack_flag) override {
      std::ostringstream os;
      os << "R " << addr << " " << src << " " << dst << " "
         << detail_bridge::cls_id(cls) << " " << (ack_flag ? 1 : 0) << " "
         << detail_bridge::to_hex(data);
      session->send_line(os.str());
    }

    void on_medium_confirm(NodeAddress dst, TrafficClass cls, bool delivered,
                           std::uint64_t tag) override {
      std::ostringstream os;
      os << "F " << addr << " " << dst << " " << detail_bridge::cls_id(cls) << " "
         << (delivered ? 1 : 0) << " " << tag;
      session->send_line(os.str());
    }
  };

  void accept_loop() {
    while (running_.load()) {
      struct pollfd pfd{lfd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, 200);
      if (!running_.load()) break;
      if (rc <= 0) continue;
      int fd = ::accept(lfd_, nullptr, nullptr);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      detail::set_nonblocking(fd);
      auto session = std::make_shared<Session>();
      session->hub = this;
      session->conn = std::make_unique<detail::FdConnection>(fd, true);
      {
        std::lock_guard lk(mu_);
        sessions_.push_back(session);
      }
      session->thread = std::thread([this, session] { serve(session); });
    }
  }

  void serve(std::shared_ptr<Session> s) {
    detail_bridge::LineBuffer lines;
    while (running_.load()) {
      auto data = s->conn->read_available(4096);
      if (!data) break;
      if (data->empty()) {
        std::this_thread::sleep_for(Millis(1));
        continue;
      }
      for (auto& line : lines.feed(*data)) handle_line(s.get(), line);
    }
    // drop every address this peer attached
    std::lock_guard lk(mu_);
    for (NodeAddress a : s->attached) {
      auto it = proxies_.find(a);
      if (it != proxies_.end() && it->second->session == s.get()) {
        medium_->detach(a);
        proxies_.erase(it);
      }
    }
    s->attached.clear();
  }

  void handle_line(Session* s, const std::string& line) {
    std::istringstream in(line);
    std::string op;
    in >> op;
    if (op == "A") {
      unsigned addr;
      if (!(in >> addr)) return;
      auto proxy = std::make_unique<AddrProxy>();
      proxy->session = s;
      proxy->addr = static_cast<NodeAddress>(addr);
      try {
        medium_->attach(proxy->addr, proxy.get());
      } catch (const std::exception& e) {
        s->send_line(std::string("E ") + e.what());
        return;
      }
      std::lock_guard lk(mu_);
      s->attached.push_back(proxy->addr);
      proxies_[proxy->addr] = std::move(proxy);
    } else if (op == "D") {
      unsigned addr;
      if (!(in >> addr)) return;
      std::lock_guard lk(mu_);
      auto it = proxies_.find(static_cast<NodeAddress>(addr));
      if (it != proxies_.end() && it->second->session == s) {
        medium_->detach(it->first);
        proxies_.erase(it);
      }
    } else if (op == "T") {
      unsigned src, dst, ack;
      std::size_t plen;
      int cls, confirm;
      std::uint64_t tag;
      std::string hex;
      if (!(in >> src >> dst >> plen >> cls >> confirm >> ack >> tag >> hex)) return;
      MediumTx tx;
      tx.src = static_cast<NodeAddress>(src);
      tx.dst = static_cast<NodeAddress>(dst);
      tx.payload_len = plen;
      tx.cls = detail_bridge::cls_of(cls);
      tx.confirm = static_cast<ConfirmPolicy>(confirm);
      tx.ack_flag = ack != 0;
      tx.tag = tag;
      tx.data = detail_bridge::from_hex(hex);
      medium_->transmit(tx);
    } else if (op == "C") {
      unsigned src, dst;
      std::string hex;
      if (!(in >> src >> dst >> hex)) return;
      medium_->send_control(static_cast<NodeAddress>(src),
                            static_cast<NodeAddress>(dst),
                            detail_bridge::from_hex(hex));
    }
  }

  Endpoint listen_;
  std::shared_ptr<VirtualMedium> medium_;
  std::atomic<bool> running_{false};
  int lfd_ = -1;
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::shared_ptr<Session>> sessions_;
  std::map<NodeAddress, std::unique_ptr<AddrProxy>> proxies_;
};

// Medium implementation backed by a remote hub.
class RemoteMedium : public Medium {
 public:
  explicit RemoteMedium(const std::string& hub_endpoint) {
    conn_ = open_endpoint(Endpoint::parse(hub_endpoint));
    running_.store(true);
    reader_ = std::thread([this] { read_loop(); });
  }

  ~RemoteMedium() override {
    running_.store(false);
    if (conn_) conn_->close();
    if (reader_.joinable()) reader_.join();
  }

  void attach(NodeAddress addr, MediumClient* client) override {
    {
      std::lock_guard lk(mu_);
      clients_[addr] = client;
    }
    send_line("A " + std::to_string(addr));
  }

  void detach(NodeAddress addr) override {
    send_line("D " + std::to_string(addr));
    std::lock_guard lk(mu_);
    clients_.erase(addr);
  }

  void transmit(const MediumTx& tx) override {
    std::ostringstream os;
    os << "T " << tx.src << " " << tx.dst << " "
       << (tx.payload_len ? tx.payload_len : tx.data.size()) << " "
       << detail_bridge::cls_id(tx.cls) << " " << static_cast<int>(tx.confirm)
       << " " << (tx.ack_flag ? 1 : 0) << " " << tx.tag << " "
       << detail_bridge::to_hex(tx.data);
    send_line(os.str());
  }

  void send_control(NodeAddress src, NodeAddress dst, Bytes data) override {
    std::ostringstream os;
    os << "C " << src << " " << dst << " " << detail_bridge::to_hex(data);
    send_line(os.str());
  }

 private:
  void send_line(const std::string& line) {
    std::lock_guard lk(wmu_);
    try {
      conn_->write_bytes(to_bytes(line + "\n"));
    } catch (const ConnectorError&) {
    }
  }

  void read_loop() {
    detail_bridge::LineBuffer lines;
    while (running_.load()) {
      auto data = conn_->read_available(4096);
      if (!data) break;
      if (data->empty()) {
        std::this_thread::sleep_for(Millis(1));
        continue;
      }
      for (auto& line : lines.feed(*data)) handle_line(line);
    }
  }

  void handle_line(const std::string& line) {
    std::istringstream in(line);
    std::string op;
    in >> op;
    if (op == "R") {
      unsigned rcvr, src, dst, ack;
      int cls;
      std::string hex;
      if (!(in >> rcvr >> src >> dst >> cls >> ack >> hex)) return;
      if (MediumClient* c = client_of(static_cast<NodeAddress>(rcvr)))
        c->on_medium_receive(static_cast<NodeAddress>(src),
                             static_cast<NodeAddress>(dst),
                             detail_bridge::from_hex(hex),
                             detail_bridge::cls_of(cls), ack != 0);
    } else if (op == "F") {
      unsigned src, dst, delivered;
      int cls;
      std::uint64_t tag;
      if (!(in >> src >> dst >> cls >> delivered >> tag)) return;
      if (MediumClient* c = client_of(static_cast<NodeAddress>(src)))
        c->on_medium_confirm(static_cast<NodeAddress>(dst),
                             detail_bridge::cls_of(cls), delivered != 0, tag);
    }
  }

  MediumClient* client_of(NodeAddress addr) {
    std::lock_guard lk(mu_);
    auto it = clients_.find(addr);
    return it == clients_.end() ? nullptr : it->second;
  }

  std::unique_ptr<Connection> conn_;
  std::atomic<bool> running_{false};
  std::thread reader_;
  std::mutex wmu_;
  std::mutex mu_;
  std::map<NodeAddress, MediumClient*> clients_;
};

// shm://name -> in-process registry; tcp://host:port -> remote hub.
inline std::shared_ptr<Medium> open_medium(const std::string& uri,
                                           ChannelConfig defaults = {}) {
  if (uri.rfind("shm://", 0) == 0)
    return MediumRegistry::instance().get_or_create(uri.substr(6), defaults);
  if (uri.rfind("tcp://", 0) == 0) return std::make_shared<RemoteMedium>(uri);
  throw std::invalid_argument("medium must be shm://name or tcp://host:port");
}

}  // namespace uwstack
