#pragma once

// Runs the same protocol body on both parties over an in-process link.

#include <exception>
#include <thread>
#include <utility>

#include "redring/dealer.hpp"
#include "redring/protocol.hpp"
#include "redring/transport.hpp"

namespace redring::testing {

template <typename T>
struct PartyResults {
  T out[2];
  MeterSnapshot meter[2];
  TripleDemand consumed[2];
  std::vector<TraceEntry> trace[2];
};

// body(ProtocolSession&, int party) -> T
template <typename Body>
auto run_two_party(const TripleDemand& demand, std::uint64_t seed, Body&& body,
                   FixedPointConfig fp = {}) {
  using T = decltype(body(std::declval<ProtocolSession&>(), 0));
  auto [l0, l1] = make_local_link_pair();
  auto [t0, t1] = provision(demand, seed);
  Endpoint e0(0, std::move(l0));
  Endpoint e1(1, std::move(l1));
  e0.meter().set_tracing(true);
  e1.meter().set_tracing(true);
  PartyResults<T> r;
  std::exception_ptr err[2];
  auto run = [&](int p, Endpoint& ep, TripleStore& ts) {
    try {
      ProtocolSession s(ep, ts, fp);
      r.out[p] = body(s, p);
    } catch (...) {
      err[p] = std::current_exception();
      ep.close();
    }
  };
  {
    std::thread th(run, 1, std::ref(e1), std::ref(t1));
    run(0, e0, t0);
    th.join();
  }
  for (auto& e : err) {
    if (e) std::rethrow_exception(e);
  }
  r.meter[0] = e0.meter().snapshot();
  r.meter[1] = e1.meter().snapshot();
  r.consumed[0] = t0.consumption();
  r.consumed[1] = t1.consumption();
  r.trace[0] = e0.meter().trace();
  r.trace[1] = e1.meter().trace();
  return r;
}

}  // namespace redring::testing
