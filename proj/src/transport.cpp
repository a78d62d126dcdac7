#include "redring/transport.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>

#include "redring/errors.hpp"
#include "redring/ring.hpp"

namespace redring {

std::string_view tag_name(Tag tag) {
  switch (tag) {
    case Tag::Circuit: return "Circuit";
    case Tag::Mult: return "Mult";
    case Tag::B2A: return "B2A";
    case Tag::Other: return "Other";
  }
  return "Other";
}

Tag tag_from_name(std::string_view name) {
  for (Tag t : kAllTags) {
    if (tag_name(t) == name) return t;
  }
  throw FormatError("unknown meter tag '" + std::string(name) + "'");
}

TagCounters& TagCounters::operator+=(const TagCounters& o) {
  bytes_sent += o.bytes_sent;
  bytes_received += o.bytes_received;
  rounds += o.rounds;
  return *this;
}

TagCounters operator-(TagCounters a, const TagCounters& b) {
  a.bytes_sent -= b.bytes_sent;
  a.bytes_received -= b.bytes_received;
  a.rounds -= b.rounds;
  return a;
}

TagCounters MeterSnapshot::total() const {
  TagCounters sum;
  for (const auto& t : tags) sum += t;
  return sum;
}

MeterSnapshot MeterSnapshot::operator-(const MeterSnapshot& earlier) const {
  MeterSnapshot d;
  for (std::size_t i = 0; i < kTagCount; ++i) d.tags[i] = tags[i] - earlier.tags[i];
  return d;
}

nlohmann::json MeterSnapshot::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (Tag t : kAllTags) {
    const auto& c = at(t);
    j[std::string(tag_name(t))] = {
        {"bytes", c.bytes_sent}, {"bytes_received", c.bytes_received}, {"rounds", c.rounds}};
  }
  return j;
}

MeterSnapshot MeterSnapshot::from_json(const nlohmann::json& j) {
  MeterSnapshot s;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto& c = s.tags[static_cast<std::size_t>(tag_from_name(it.key()))];
    c.bytes_sent = it->at("bytes").get<std::uint64_t>();
    c.bytes_received = it->value("bytes_received", std::uint64_t{0});
    c.rounds = it->at("rounds").get<std::uint64_t>();
  }
  return s;
}

void Meter::record(std::size_t sent, std::size_t received) {
  auto& c = counters_.tags[static_cast<std::size_t>(active())];
  c.bytes_sent += sent;
  c.bytes_received += received;
  c.rounds += 1;
  if (tracing_) trace_.push_back({active(), sent});
}

void Meter::pop() {
  if (stack_.empty()) throw Error("meter tag stack underflow");
  stack_.pop_back();
}

// ---------------------------------------------------------------------------
// In-process link pair

namespace {

struct LocalChannelState {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> queues[2];  // queues[p] holds messages for party p
  bool closed[2] = {false, false};
};

class LocalLink final : public Link {
 public:
  LocalLink(std::shared_ptr<LocalChannelState> state, int side)
      : state_(std::move(state)), side_(side) {}

  ~LocalLink() override { close(); }

  void close() override {
    {
      std::lock_guard lock(state_->mu);
      state_->closed[side_] = true;
    }
    state_->cv.notify_all();
  }

  std::vector<std::uint8_t> swap(std::span<const std::uint8_t> payload) override {
    const int peer = 1 - side_;
    std::unique_lock lock(state_->mu);
    if (state_->closed[side_]) throw TransportError("link closed");
    if (!state_->closed[peer]) state_->queues[peer].emplace_back(payload.begin(), payload.end());
    state_->cv.notify_all();
    state_->cv.wait(lock, [&] { return !state_->queues[side_].empty() || state_->closed[peer]; });
    if (state_->queues[side_].empty()) throw TransportError("peer disconnected");
    auto msg = std::move(state_->queues[side_].front());
    state_->queues[side_].pop_front();
    return msg;
  }

 private:
  std::shared_ptr<LocalChannelState> state_;
  int side_;
};

}  // namespace

std::pair<std::unique_ptr<Link>, std::unique_ptr<Link>> make_local_link_pair() {
  auto state = std::make_shared<LocalChannelState>();
  return {std::make_unique<LocalLink>(state, 0), std::make_unique<LocalLink>(state, 1)};
}

// ---------------------------------------------------------------------------

Endpoint::Endpoint(int party, std::unique_ptr<Link> link) : party_(party), link_(std::move(link)) {
  if (party != 0 && party != 1) throw ConfigError("party id must be 0 or 1");
  if (!link_) throw TransportError("endpoint without link");
}

std::vector<std::uint8_t> Endpoint::exchange(std::span<const std::uint8_t> payload) {
  auto reply = link_->swap(payload);
  meter_.record(payload.size(), reply.size());
  return reply;
}

// ---------------------------------------------------------------------------
// Bit packing

std::size_t packed_size_bytes(std::size_t count, int width) {
  const std::size_t bits = count * static_cast<std::size_t>(width);
  return 8 * ((bits + 63) / 64);
}

std::vector<std::uint8_t> pack_words(std::span<const std::uint64_t> values, int width) {
  if (width < 1 || width > 64) throw RangeError("pack width outside 1..64");
  const std::size_t nwords = packed_size_bytes(values.size(), width) / 8;
  std::vector<std::uint64_t> words(nwords, 0);
  const std::uint64_t mask = ring_mask(width);
  std::size_t bitpos = 0;
  for (std::uint64_t v : values) {
    v &= mask;
    const std::size_t word = bitpos / 64;
    const unsigned offset = static_cast<unsigned>(bitpos % 64);
    words[word] |= v << offset;
    if (offset + static_cast<unsigned>(width) > 64) words[word + 1] |= v >> (64 - offset);
    bitpos += static_cast<std::size_t>(width);
  }
  std::vector<std::uint8_t> bytes(nwords * 8);
  for (std::size_t i = 0; i < nwords; ++i) {
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(words[i] >> (8 * b));
  }
  return bytes;
}

std::vector<std::uint64_t> unpack_words(std::span<const std::uint8_t> bytes, int width,
                                        std::size_t count) {
  if (width < 1 || width > 64) throw RangeError("pack width outside 1..64");
  if (bytes.size() != packed_size_bytes(count, width)) {
    throw FormatError("packed payload of " + std::to_string(bytes.size()) +
                      " bytes does not hold " + std::to_string(count) + " values of width " +
                      std::to_string(width));
  }
  const std::size_t nwords = bytes.size() / 8;
  std::vector<std::uint64_t> words(nwords, 0);
  for (std::size_t i = 0; i < nwords; ++i) {
    std::uint64_t w = 0;
    for (int b = 7; b >= 0; --b) w = (w << 8) | bytes[i * 8 + static_cast<std::size_t>(b)];
    words[i] = w;
  }
  std::vector<std::uint64_t> values(count);
  const std::uint64_t mask = ring_mask(width);
  std::size_t bitpos = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t word = bitpos / 64;
    const unsigned offset = static_cast<unsigned>(bitpos % 64);
    std::uint64_t v = words[word] >> offset;
    if (offset + static_cast<unsigned>(width) > 64) v |= words[word + 1] << (64 - offset);
    values[i] = v & mask;
    bitpos += static_cast<std::size_t>(width);
  }
  return values;
}

std::vector<std::uint64_t> exchange_words(Endpoint& ep, std::span<const std::uint64_t> values,
                                          int width) {
  const auto payload = pack_words(values, width);
  const auto reply = ep.exchange(payload);
  return unpack_words(reply, width, values.size());
}

}  // namespace redring
