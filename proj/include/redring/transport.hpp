#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace redring {

// Communication categories of a ReLU evaluation. Untagged traffic is Other.
enum class Tag : int { Circuit = 0, Mult = 1, B2A = 2, Other = 3 };
inline constexpr std::size_t kTagCount = 4;
inline constexpr std::array<Tag, kTagCount> kAllTags = {Tag::Circuit, Tag::Mult, Tag::B2A,
                                                        Tag::Other};

std::string_view tag_name(Tag tag);
Tag tag_from_name(std::string_view name);

struct TagCounters {
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t rounds = 0;

  TagCounters& operator+=(const TagCounters& o);
  friend TagCounters operator-(TagCounters a, const TagCounters& b);
  friend bool operator==(const TagCounters&, const TagCounters&) = default;
};

struct MeterSnapshot {
  std::array<TagCounters, kTagCount> tags{};

  const TagCounters& at(Tag t) const { return tags[static_cast<std::size_t>(t)]; }
  TagCounters total() const;
  MeterSnapshot operator-(const MeterSnapshot& earlier) const;
  nlohmann::json to_json() const;
  static MeterSnapshot from_json(const nlohmann::json& j);

  friend bool operator==(const MeterSnapshot&, const MeterSnapshot&) = default;
};

struct TraceEntry {
  Tag tag;
  std::size_t bytes;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

/// Per-session ledger of bytes and rounds, with a stack of active tags.
class Meter {
 public:
  void record(std::size_t sent, std::size_t received);

  void push(Tag tag) { stack_.push_back(tag); }
  void pop();
  Tag active() const noexcept { return stack_.empty() ? Tag::Other : stack_.back(); }

  const TagCounters& at(Tag t) const { return counters_.tags[static_cast<std::size_t>(t)]; }
  TagCounters total() const { return counters_.total(); }
  const MeterSnapshot& snapshot() const noexcept { return counters_; }

  // Payload-length log, used to check that traffic does not depend on data.
  void set_tracing(bool on) { tracing_ = on; }
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }

 private:
  MeterSnapshot counters_;
  std::vector<Tag> stack_;
  bool tracing_ = false;
  std::vector<TraceEntry> trace_;
};

/// A bidirectional FIFO link to the peer. swap() sends our payload and returns
/// the peer's payload of the same round.
class Link {
 public:
  virtual ~Link() = default;
  virtual std::vector<std::uint8_t> swap(std::span<const std::uint8_t> payload) = 0;
  // Wakes a peer blocked in swap(); later swaps fail.
  virtual void close() {}
};

std::pair<std::unique_ptr<Link>, std::unique_ptr<Link>> make_local_link_pair();

// TCP frames are a 4-byte little-endian length followed by the payload.
std::unique_ptr<Link> tcp_listen(const std::string& host, std::uint16_t port);
std::unique_ptr<Link> tcp_connect(const std::string& host, std::uint16_t port,
                                  int timeout_ms = 10000);
// "host:port" -> (host, port); throws ConfigError.
std::pair<std::string, std::uint16_t> parse_host_port(const std::string& spec);

class Endpoint {
 public:
  Endpoint(int party, std::unique_ptr<Link> link);

  int party() const noexcept { return party_; }
  Meter& meter() noexcept { return meter_; }
  const Meter& meter() const noexcept { return meter_; }

  // One round: rounds += 1 and bytes_sent += payload size under the active tag.
  std::vector<std::uint8_t> exchange(std::span<const std::uint8_t> payload);
  void close() { link_->close(); }

 private:
  int party_;
  std::unique_ptr<Link> link_;
  Meter meter_;
};

class TagScope {
 public:
  TagScope(Endpoint& ep, Tag tag) : meter_(ep.meter()) { meter_.push(tag); }
  ~TagScope() { meter_.pop(); }
  TagScope(const TagScope&) = delete;
  TagScope& operator=(const TagScope&) = delete;

 private:
  Meter& meter_;
};

template <typename Body>
decltype(auto) with_tag(Endpoint& ep, Tag tag, Body&& body) {
  TagScope scope(ep, tag);
  return std::forward<Body>(body)();
}

// Low `width` bits of each value, LSB-first, into little-endian 64-bit words.
std::size_t packed_size_bytes(std::size_t count, int width);
std::vector<std::uint8_t> pack_words(std::span<const std::uint64_t> values, int width);
std::vector<std::uint64_t> unpack_words(std::span<const std::uint8_t> bytes, int width,
                                        std::size_t count);

// Packs, swaps and unpacks a symmetric word vector.
std::vector<std::uint64_t> exchange_words(Endpoint& ep, std::span<const std::uint64_t> values,
                                          int width);

}  // namespace redring
