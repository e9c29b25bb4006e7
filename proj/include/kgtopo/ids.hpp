#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace kgtopo {

// Dense ids. 32 bits covers every graph we target (the largest has ~2.7M
// entities); build with -DKGTOPO_WIDE_IDS=ON for 64-bit ids.
#ifdef KGTOPO_WIDE_IDS
using EntityId = std::uint64_t;
using RelationId = std::uint64_t;
#else
using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
#endif

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t x = static_cast<std::uint64_t>(t.head) * 0x9E3779B97F4A7C15ULL;
    x ^= (static_cast<std::uint64_t>(t.relation) + 0x632BE59BD9B4E019ULL) * 0xBF58476D1CE4E5B9ULL;
    x ^= (static_cast<std::uint64_t>(t.tail) + 0x94D049BB133111EBULL) * 0xD6E8FEB86659FD93ULL;
    x ^= x >> 31;
    return static_cast<std::size_t>(x);
  }
};

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed or unreadable input file.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Precondition violated by the caller (bad id, bad config value, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace kgtopo
