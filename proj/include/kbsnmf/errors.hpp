#pragma once

#include <stdexcept>
#include <string>

namespace kbsnmf {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct DegenerateSignal : Error {
  using Error::Error;
};

struct InvalidRank : Error {
  using Error::Error;
};

struct InvalidTheta : Error {
  using Error::Error;
};

struct InvalidConfig : Error {
  using Error::Error;
};

struct InvalidSpec : Error {
  using Error::Error;
};

struct LibraryTooSmall : Error {
  using Error::Error;
};

struct RankTooLarge : Error {
  using Error::Error;
};

struct SvdFailure : Error {
  using Error::Error;
};

struct ZeroVector : Error {
  using Error::Error;
};

struct BadMagic : Error {
  using Error::Error;
};

struct TruncatedFile : Error {
  using Error::Error;
};

struct NonFiniteValue : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct RaggedRows : Error {
  using Error::Error;
};

struct WriteFailure : Error {
  using Error::Error;
};

}  // namespace kbsnmf
