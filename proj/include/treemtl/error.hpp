// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace treemtl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs that are well-formed on disk but violate a precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written, or its syntax is broken.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace treemtl
