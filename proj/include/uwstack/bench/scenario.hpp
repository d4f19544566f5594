#pragma once

#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "uwstack/bench/metrics.hpp"
#include "uwstack/emu/ahoi_emulator.hpp"
#include "uwstack/emu/channel.hpp"
#include "uwstack/emu/s2c_emulator.hpp"
#include "uwstack/net/node.hpp"

namespace uwstack {

// Analytic stop-and-wait predictor for one emulated link. One cycle is
// command processing, airtime, propagation out, propagation back, the
// confirmation turnaround, and half a polling period of dispatch lag.
struct StopAndWaitModel {
  std::size_t payload = 64;
  std::size_t overhead = 16;
  double bitrate = 976.0;
  double distance = 5.0;
  double sound_speed = 1500.0;
  double proc_delay_s = 0.340;
  double confirm_delay_s = 0.030;
  double to_rx_s = 0.010;

  double tx_s() const { return tx_duration_s(payload, overhead, bitrate); }
  double prop_s() const { return prop_delay_s(distance, sound_speed); }
  double one_way_s() const { return proc_delay_s + tx_s() + prop_s(); }
  double cycle_s() const {
    return one_way_s() + prop_s() + confirm_delay_s + to_rx_s / 2.0;
  }
  double rrx_bps() const {
    return static_cast<double>(payload) * 8.0 / cycle_s();
  }
};

// One benchmark scenario: a point-to-point (or two-hop relayed) link over
// one modem kind, a paced stop-and-wait sender, and a fixed packet count.
struct ScenarioSpec {
  std::string name = "scenario";
  std::string kind = "s2c";    // s2c | ahoi | csa-udp | csa-tcp
  std::string traffic = "im";  // im | burst | datagram
  int packets = 20;
  std::size_t payload = 64;
  int runs = 5;
  std::uint32_t seed = 1;
  bool relay = false;
  double timeout_s = 150.0;
  ChannelConfig channel;
  SchedulerConfig sched;
  ConfigDoc::Table driver;  // extra stack parameters, passed through

  static ScenarioSpec from_doc(const ConfigDoc& doc) {
    ScenarioSpec s;
    if (const auto* t = doc.table("scenario")) {
      s.name = ConfigDoc::get_str(*t, "name", s.name);
      s.kind = ConfigDoc::get_str(*t, "kind", s.kind);
      s.traffic = ConfigDoc::get_str(*t, "traffic", s.traffic);
      s.packets = static_cast<int>(ConfigDoc::get_int(*t, "packets", s.packets));
      s.payload = static_cast<std::size_t>(
          ConfigDoc::get_int(*t, "payload", static_cast<long>(s.payload)));
      s.runs = static_cast<int>(ConfigDoc::get_int(*t, "runs", s.runs));
      s.seed = static_cast<std::uint32_t>(ConfigDoc::get_int(*t, "seed", s.seed));
      s.relay = ConfigDoc::get_bool(*t, "relay", s.relay);
      s.timeout_s = ConfigDoc::get_double(*t, "timeout_s", s.timeout_s);
      long to_rx = ConfigDoc::get_int(*t, "to_rx_ms", 0);
      if (to_rx > 0) s.sched.to_rx = Millis(to_rx);
    }
    if (const auto* t = doc.table("channel")) {
      s.channel.bitrate_im =
          ConfigDoc::get_double(*t, "bitrate_im", s.channel.bitrate_im);
      s.channel.bitrate_burst =
          ConfigDoc::get_double(*t, "bitrate_burst", s.channel.bitrate_burst);
      s.channel.distance = ConfigDoc::get_double(*t, "distance", s.channel.distance);
      s.channel.sound_speed =
          ConfigDoc::get_double(*t, "sound_speed", s.channel.sound_speed);
      s.channel.loss_prob = ConfigDoc::get_double(*t, "loss", s.channel.loss_prob);
      s.channel.per_packet_overhead = static_cast<std::size_t>(ConfigDoc::get_int(
          *t, "overhead", static_cast<long>(s.channel.per_packet_overhead)));
      s.channel.proc_delay_ms =
          ConfigDoc::get_double(*t, "proc_delay_ms", s.channel.proc_delay_ms);
      s.channel.confirm_delay_ms =
          ConfigDoc::get_double(*t, "confirm_delay_ms", s.channel.confirm_delay_ms);
    }
    if (const auto* t = doc.table("driver")) s.driver = *t;
    s.channel.validate();
    return s;
  }

  static ScenarioSpec from_file(const std::string& path) {
    return from_doc(ConfigDoc::parse_file(path));
  }

  TrafficClass traffic_class() const {
    if (traffic == "burst") return TrafficClass::BURST;
    if (traffic == "datagram") return TrafficClass::DATAGRAM;
    return TrafficClass::IM;
  }

  StopAndWaitModel model() const {
    StopAndWaitModel m;
    m.payload = payload;
    m.overhead = channel.per_packet_overhead;
    m.bitrate = channel.bitrate_for(traffic_class());
    m.distance = channel.distance;
    m.sound_speed = channel.sound_speed;
    m.proc_delay_s = channel.proc_delay_ms / 1e3;
    m.confirm_delay_s = channel.confirm_delay_ms / 1e3;
    m.to_rx_s = to_s(Duration(sched.to_rx));
    return m;
  }
};

struct RunResult {
  double r_rx = 0;   // bit/s, 0 when unmeasurable
  double p_dd = 0;   // s
  double loss = 0;   // fraction of enqueued packets never delivered
  TimePoint origin{};
  std::vector<TxRxRecord> records;
};

struct ScenarioResult {
  std::string name;
  std::string mode;  // stack | direct
  double r_rx = 0;
  double p_dd = 0;
  double loss = 0;
  int runs = 0;
  std::vector<RunResult> per_run;
};

namespace detail_bench {

inline int pick_port() {
  static std::atomic<int> counter{0};
  int base = 21000 + static_cast<int>(::getpid() % 5000) * 4;
  return 1024 + (base + counter.fetch_add(1)) % 40000;
}

inline std::string pick_pipe(const char* tag) {
  static std::atomic<int> counter{0};
  return std::string(tag) + "-" + std::to_string(::getpid()) + "-" +
         std::to_string(counter.fetch_add(1));
}

// The packet id rides in the first four payload bytes: not every modem
// dialect carries a sequence number, and the receiver must match deliveries
// to enqueue times.
inline Bytes test_payload(std::size_t len, std::uint32_t idx) {
  Bytes b(len);
  for (std::size_t j = 0; j < len; ++j)
    b[j] = static_cast<std::uint8_t>((idx * 131 + j * 7 + 11) & 0xFF);
  if (len >= 4) {
    b.clear();
    detail::put_u32(b, idx);
    b.resize(len);
    for (std::size_t j = 4; j < len; ++j)
      b[j] = static_cast<std::uint8_t>((idx * 131 + j * 7 + 11) & 0xFF);
  }
  return b;
}

inline std::uint32_t payload_id(const Packet& p) {
  if (p.payload.size() >= 4) return detail::get_u32(p.payload.data());
  return p.seq;
}

struct Pacer {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<TxRxRecord> records;
  int total = 0;
  int sent = 0;
  int confirmed = 0;
  int failed = 0;
  int delivered = 0;
};

inline void finish_run(RunResult& rr, Pacer& st) {
  std::lock_guard lk(st.mu);
  rr.records = st.records;
  try {
    rr.r_rx = compute_rrx(rr.records);
  } catch (const MetricsError&) {
    rr.r_rx = 0;
  }
  try {
    rr.p_dd = compute_pdd(rr.records);
  } catch (const MetricsError&) {
    rr.p_dd = 0;
  }
  rr.loss = rr.records.empty() ? 0.0 : 1.0 - delivered_fraction(rr.records);
}

}  // namespace detail_bench

// One measured run through the full stack: scheduler-polled drivers on both
// ends, the next packet enqueued when the previous confirmation is
// dispatched.
inline RunResult run_stack_once(const ScenarioSpec& spec, std::uint32_t seed) {
  using detail_bench::Pacer;
  const TrafficClass cls = spec.traffic_class();
  if (spec.relay && spec.kind != "ahoi")
    throw std::invalid_argument("the relay topology is defined for the ahoi kind");

  std::shared_ptr<VirtualMedium> medium;
  std::vector<std::unique_ptr<S2cEmulator>> s2c_emus;
  std::vector<std::unique_ptr<AhoiEmulator>> ahoi_emus;
  std::vector<std::unique_ptr<Node>> nodes;

  auto make_node = [&](NodeAddress addr, const std::string& endpoint) {
    NodeConfig nc;
    nc.address = addr;
    nc.sched = spec.sched;
    StackSpec ss;
    ss.id = "m0";
    ss.kind = spec.kind;
    ss.endpoint = endpoint;
    ss.params = spec.driver;
    if (spec.kind == "s2c") {
      if (!ss.params.count("im_max"))
        ss.params["im_max"] = std::to_string(std::max<std::size_t>(64, spec.payload));
      if (!ss.params.count("burst_max"))
        ss.params["burst_max"] =
            std::to_string(std::max<std::size_t>(512, spec.payload));
    } else if (spec.kind == "ahoi") {
      if (!ss.params.count("max_payload"))
        ss.params["max_payload"] =
            std::to_string(std::max<std::size_t>(32, spec.payload));
      if (!ss.params.count("bitrate"))
        ss.params["bitrate"] = std::to_string(spec.channel.bitrate_im);
      if (!ss.params.count("distance"))
        ss.params["distance"] = std::to_string(spec.channel.distance);
      if (!ss.params.count("sound_speed"))
        ss.params["sound_speed"] = std::to_string(spec.channel.sound_speed);
    }
    nc.stacks.push_back(std::move(ss));
    nc.routes.push_back(RouteRule{true, 0, 0, "m0"});
    return std::make_unique<Node>(std::move(nc));
  };

  if (spec.relay) {
    // two-hop multimodal chain: sender =acoustic= relay =csa/tcp= receiver
    medium = std::make_shared<VirtualMedium>(spec.channel, seed);
    std::string pipes[2];
    for (int i = 0; i < 2; ++i) {
      pipes[i] = detail_bench::pick_pipe("ahoi");
      AhoiEmulatorConfig ec;
      ec.listen = "pipe://" + pipes[i];
      ec.addr = static_cast<NodeAddress>(i + 1);
      ec.max_payload = std::max<std::size_t>(32, spec.payload);
      ahoi_emus.push_back(std::make_unique<AhoiEmulator>(ec, medium));
      ahoi_emus.back()->start();
    }
    int port = detail_bench::pick_port();
    nodes.push_back(make_node(1, "pipe://" + pipes[0]));  // sender

    NodeConfig relay;  // two stacks, one per medium
    relay.address = 2;
    relay.sched = spec.sched;
    StackSpec up;
    up.id = "m0";
    up.kind = "ahoi";
    up.endpoint = "pipe://" + pipes[1];
    up.params = spec.driver;
    if (!up.params.count("max_payload"))
      up.params["max_payload"] = std::to_string(std::max<std::size_t>(32, spec.payload));
    if (!up.params.count("bitrate"))
      up.params["bitrate"] = std::to_string(spec.channel.bitrate_im);
    StackSpec down;
    down.id = "m1";
    down.kind = "csa-tcp";
    down.endpoint = "tcps://127.0.0.1:" + std::to_string(port);
    relay.stacks.push_back(up);
    relay.stacks.push_back(down);
    relay.routes.push_back(RouteRule{false, 3, 0xFFFE, "m1"});
    relay.routes.push_back(RouteRule{true, 0, 0, "m0"});
    nodes.push_back(std::make_unique<Node>(std::move(relay)));

    NodeConfig rx;
    rx.address = 3;
    rx.sched = spec.sched;
    StackSpec link;
    link.id = "m1";
    link.kind = "csa-tcp";
    link.endpoint = "tcp://127.0.0.1:" + std::to_string(port);
    rx.stacks.push_back(link);
    rx.routes.push_back(RouteRule{true, 0, 0, "m1"});
    nodes.push_back(std::make_unique<Node>(std::move(rx)));

    std::thread server([&] { nodes[1]->start(); });  // tcps blocks on accept
    std::this_thread::sleep_for(Millis(50));
    nodes[2]->start();
    server.join();
    nodes[0]->start();
  } else if (spec.kind == "s2c" || spec.kind == "ahoi") {
    medium = std::make_shared<VirtualMedium>(spec.channel, seed);
    for (int i = 1; i <= 2; ++i) {
      auto addr = static_cast<NodeAddress>(i);
      if (spec.kind == "s2c") {
        int port = detail_bench::pick_port();
        S2cEmulatorConfig ec;
        ec.listen = "tcps://127.0.0.1:" + std::to_string(port);
        ec.addr = addr;
        ec.im_max = std::max<std::size_t>(64, spec.payload);
        ec.burst_max = std::max<std::size_t>(512, spec.payload);
        s2c_emus.push_back(std::make_unique<S2cEmulator>(ec, medium));
        s2c_emus.back()->start();
        nodes.push_back(make_node(addr, "tcp://127.0.0.1:" + std::to_string(port)));
      } else {
        std::string pipe = detail_bench::pick_pipe("ahoi");
        AhoiEmulatorConfig ec;
        ec.listen = "pipe://" + pipe;
        ec.addr = addr;
        ec.max_payload = std::max<std::size_t>(32, spec.payload);
        ahoi_emus.push_back(std::make_unique<AhoiEmulator>(ec, medium));
        ahoi_emus.back()->start();
        nodes.push_back(make_node(addr, "pipe://" + pipe));
      }
    }
    for (auto& n : nodes) n->start();
  } else if (spec.kind == "csa-udp") {
    int pa = detail_bench::pick_port();
    int pb = detail_bench::pick_port();
    nodes.push_back(make_node(1, "udp://127.0.0.1:" + std::to_string(pb) +
                                     "?bind=" + std::to_string(pa)));
    nodes.push_back(make_node(2, "udp://127.0.0.1:" + std::to_string(pa) +
                                     "?bind=" + std::to_string(pb)));
    for (auto& n : nodes) n->start();
  } else if (spec.kind == "csa-tcp") {
    int port = detail_bench::pick_port();
    nodes.push_back(make_node(1, "tcp://127.0.0.1:" + std::to_string(port)));
    nodes.push_back(make_node(2, "tcps://127.0.0.1:" + std::to_string(port)));
    // the server-side open blocks until the client connects
    std::thread server([&] { nodes[1]->start(); });
    std::this_thread::sleep_for(Millis(50));
    nodes[0]->start();
    server.join();
  } else {
    throw std::invalid_argument("unknown scenario kind: " + spec.kind);
  }

  auto st = std::make_shared<Pacer>();
  st->total = spec.packets;
  Node* sender = nodes.front().get();
  Node* receiver = nodes.back().get();
  const NodeAddress dst = receiver->address();

  auto send_one = [st, sender, dst, cls, payload = spec.payload] {
    int idx;
    {
      std::lock_guard lk(st->mu);
      if (st->sent >= st->total) return;
      idx = st->sent++;
    }
    Packet p;
    p.src = sender->address();
    p.dst = dst;
    p.seq = static_cast<std::uint32_t>(idx);
    p.tclass = cls;
    p.payload = detail_bench::test_payload(payload, p.seq);
    TxRxRecord rec;
    rec.id = static_cast<std::uint64_t>(idx);
    rec.payload_bits = payload * 8;
    rec.t_enqueued = now();
    {
      std::lock_guard lk(st->mu);
      st->records.push_back(rec);
    }
    sender->send(std::move(p));
  };

  sender->on_tx_result = [st, send_one](const Packet& p, bool ok,
                                        const std::string&) {
    {
      std::lock_guard lk(st->mu);
      if (p.seq < st->records.size() && p.t_sent)
        st->records[p.seq].t_sent = p.t_sent;
      ++st->confirmed;
      if (!ok) ++st->failed;
    }
    st->cv.notify_all();
    send_one();  // pace: next packet once this one is confirmed
  };

  receiver->on_packet = [st](const Packet& p, const std::string&) {
    std::uint32_t id = detail_bench::payload_id(p);
    {
      std::lock_guard lk(st->mu);
      if (id < st->records.size() && !st->records[id].t_delivered) {
        st->records[id].t_delivered = p.t_delivered ? *p.t_delivered : now();
        ++st->delivered;
      }
    }
    st->cv.notify_all();
  };

  RunResult rr;
  rr.origin = now();
  send_one();
  {
    std::unique_lock lk(st->mu);
    st->cv.wait_until(lk, rr.origin + from_s(spec.timeout_s),
                      [&] { return st->confirmed >= st->total; });
    TimePoint grace = now() + from_s(2.0);
    st->cv.wait_until(lk, grace, [&] {
      return st->delivered + st->failed >= st->total;
    });
  }
  for (auto& n : nodes) n->stop();
  detail_bench::finish_run(rr, *st);
  return rr;
}

// Direct-interface baseline: the benchmark speaks the command dialect to the
// emulated device itself. Instant messages are paced on their delivery
// notification; burst traffic is handed over back-to-back so the device's
// internal buffer keeps the channel saturated.
inline RunResult run_direct_once(const ScenarioSpec& spec, std::uint32_t seed) {
  if (spec.kind != "s2c")
    throw std::invalid_argument("direct mode is defined for the s2c kind");
  const bool burst = spec.traffic_class() == TrafficClass::BURST;

  auto medium = std::make_shared<VirtualMedium>(spec.channel, seed);
  int p1 = detail_bench::pick_port();
  int p2 = detail_bench::pick_port();
  auto make_emu = [&](int port, NodeAddress addr) {
    S2cEmulatorConfig ec;
    ec.listen = "tcps://127.0.0.1:" + std::to_string(port);
    ec.addr = addr;
    ec.im_max = std::max<std::size_t>(64, spec.payload);
    ec.burst_max = std::max<std::size_t>(512, spec.payload);
    auto e = std::make_unique<S2cEmulator>(ec, medium);
    e->start();
    return e;
  };
  auto emu1 = make_emu(p1, 1);
  auto emu2 = make_emu(p2, 2);
  auto c1 = open_endpoint(Endpoint::parse("tcp://127.0.0.1:" + std::to_string(p1)));
  auto c2 = open_endpoint(Endpoint::parse("tcp://127.0.0.1:" + std::to_string(p2)));

  std::mutex mu;
  std::condition_variable cv;
  std::vector<TxRxRecord> records;
  int received = 0;
  std::atomic<bool> stop_reader{false};

  std::thread reader([&] {
    S2cParser parser;
    while (!stop_reader.load()) {
      auto data = c2->read_available(4096);
      if (!data) break;
      if (data->empty()) {
        std::this_thread::sleep_for(Millis(1));
        continue;
      }
      for (auto& n : parser.feed(*data)) {
        if (n.type != S2cNotification::Type::RecvIm &&
            n.type != S2cNotification::Type::Recv)
          continue;
        std::lock_guard lk(mu);
        // in-order link: the k-th reception is the k-th command
        if (received < static_cast<int>(records.size()))
          records[static_cast<std::size_t>(received)].t_delivered = now();
        ++received;
        cv.notify_all();
      }
    }
  });

  S2cParser ctrl;
  TimePoint deadline = now() + from_s(spec.timeout_s);
  auto wait_ctrl = [&](auto pred) {
    while (now() < deadline) {
      auto data = c1->read_available(4096);
      if (!data) throw ConnectorError("device connection closed");
      if (data->empty()) {
        std::this_thread::sleep_for(Millis(1));
        continue;
      }
      for (auto& n : ctrl.feed(*data))
        if (pred(n)) return true;
    }
    return false;
  };

  RunResult rr;
  rr.origin = now();
  for (int i = 0; i < spec.packets; ++i) {
    Packet p;
    p.dst = 2;
    p.seq = static_cast<std::uint32_t>(i);
    p.payload = detail_bench::test_payload(spec.payload, p.seq);
    TxRxRecord rec;
    rec.id = static_cast<std::uint64_t>(i);
    rec.payload_bits = spec.payload * 8;
    rec.t_enqueued = now();
    {
      std::lock_guard lk(mu);
      records.push_back(rec);
    }
    S2cLimits lim{std::max<std::size_t>(64, spec.payload),
                  std::max<std::size_t>(512, spec.payload)};
    c1->write_bytes(
        s2c_format(p, burst ? S2cMode::Burst : S2cMode::ImAck, lim));
    wait_ctrl([](const S2cNotification& n) {
      return n.type == S2cNotification::Type::Ok ||
             n.type == S2cNotification::Type::Error;
    });
    if (!burst) {
      wait_ctrl([](const S2cNotification& n) {
        return n.type == S2cNotification::Type::DeliveredIm ||
               n.type == S2cNotification::Type::FailedIm;
      });
    }
  }
  {
    std::unique_lock lk(mu);
    cv.wait_until(lk, deadline, [&] { return received >= spec.packets; });
  }
  stop_reader.store(true);
  c2->close();
  c1->close();
  reader.join();

  {
    std::lock_guard lk(mu);
    rr.records = records;
  }
  try {
    rr.r_rx = compute_rrx(rr.records);
  } catch (const MetricsError&) {
    rr.r_rx = 0;
  }
  try {
    rr.p_dd = compute_pdd(rr.records);
  } catch (const MetricsError&) {
    rr.p_dd = 0;
  }
  rr.loss = rr.records.empty() ? 0.0 : 1.0 - delivered_fraction(rr.records);
  return rr;
}

// Repeats a scenario and averages the measurable runs. An optional log
// prefix writes one JSONL packet log per run.
inline ScenarioResult run_scenario(const ScenarioSpec& spec,
                                   const std::string& mode = "stack",
                                   const std::string& log_prefix = "") {
  ScenarioResult res;
  res.name = spec.name;
  res.mode = mode;
  double r_sum = 0, d_sum = 0, l_sum = 0;
  int r_n = 0, d_n = 0;
  for (int k = 0; k < spec.runs; ++k) {
    std::uint32_t seed = spec.seed + static_cast<std::uint32_t>(k);
    RunResult rr =
        mode == "direct" ? run_direct_once(spec, seed) : run_stack_once(spec, seed);
    if (!log_prefix.empty())
      write_jsonl(log_prefix + "-run" + std::to_string(k) + ".jsonl", rr.records,
                  rr.origin);
    if (rr.r_rx > 0) {
      r_sum += rr.r_rx;
      ++r_n;
    }
    if (rr.p_dd > 0) {
      d_sum += rr.p_dd;
      ++d_n;
    }
    l_sum += rr.loss;
    res.per_run.push_back(std::move(rr));
  }
  res.runs = spec.runs;
  if (r_n) res.r_rx = r_sum / r_n;
  if (d_n) res.p_dd = d_sum / d_n;
  if (spec.runs) res.loss = l_sum / spec.runs;
  return res;
}

struct CompareResult {
  ScenarioResult stack_result;
  ScenarioResult direct_result;
  double ratio = 0;  // stack throughput over direct throughput
};

inline CompareResult compare_direct(const ScenarioSpec& spec) {
  CompareResult c;
  c.stack_result = run_scenario(spec, "stack");
  c.direct_result = run_scenario(spec, "direct");
  if (c.direct_result.r_rx > 0) c.ratio = c.stack_result.r_rx / c.direct_result.r_rx;
  return c;
}

inline std::string csv_header() { return "scenario,mode,r_rx_bps,p_dd_s,loss,runs"; }

inline std::string csv_row(const ScenarioResult& s) {
  std::ostringstream out;
  out.precision(6);
  out << s.name << "," << s.mode << "," << s.r_rx << "," << s.p_dd << ","
      << s.loss << "," << s.runs;
  return out.str();
}

}  // namespace uwstack
