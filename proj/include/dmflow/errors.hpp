#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dmflow {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : Error {
  ParseError(std::size_t line, const std::string& what)
      : Error("parse error at line " + std::to_string(line) + ": " + what),
        line(line) {}
  std::size_t line;
};

struct DuplicateTxId : Error {
  explicit DuplicateTxId(const std::string& tx_id)
      : Error("duplicate tx_id: " + tx_id), tx_id(tx_id) {}
  std::string tx_id;
};

struct ValidationError : Error {
  using Error::Error;
};

struct OutOfRangeTimestamp : Error {
  using Error::Error;
};

struct OutOfRange : Error {
  using Error::Error;
};

struct UnknownMarket : Error {
  explicit UnknownMarket(const std::string& name)
      : Error("unknown market: " + name) {}
};

struct UnknownAddress : Error {
  explicit UnknownAddress(const std::string& addr)
      : Error("unknown address: " + addr) {}
};

struct SeedConflict : Error {
  SeedConflict(const std::string& tag1, const std::string& tag2)
      : Error("conflicting seeds on one entity: " + tag1 + " vs " + tag2) {}
};

struct EmptySample : Error {
  EmptySample() : Error("empty sample") {}
};

struct EmptySeries : Error {
  EmptySeries() : Error("empty series") {}
};

struct EmptyGroup : Error {
  EmptyGroup() : Error("empty comparison group") {}
};

struct NoCoexistingMarkets : Error {
  explicit NoCoexistingMarkets(const std::string& market)
      : Error("no coexisting markets at closure of " + market) {}
};

struct NoMigrants : Error {
  NoMigrants() : Error("no migrants in window") {}
};

struct InsufficientHistory : Error {
  using Error::Error;
};

struct InvalidConfig : Error {
  using Error::Error;
};

struct BadConfig : Error {
  using Error::Error;
};

struct MissingInput : Error {
  explicit MissingInput(const std::string& path)
      : Error("missing input: " + path), path(path) {}
  std::string path;
};

}  // namespace dmflow
