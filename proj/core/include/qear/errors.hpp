// Copyright 2026 The qear Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef QEAR_ERRORS_HPP_
#define QEAR_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace qear {

/// Base class of all qear errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed arguments that can never work (CLI exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Input data is missing, malformed or inconsistent (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numeric procedure failed: divergence, degenerate input, failed
/// factorization (CLI exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Audio container errors, reported distinctly so callers can tell a broken
// header from an unsupported encoding or a short file.
class AudioIoError : public DataError {
 public:
  using DataError::DataError;
};

class MalformedHeaderError : public AudioIoError {
 public:
  using AudioIoError::AudioIoError;
};

class UnsupportedCodecError : public AudioIoError {
 public:
  using AudioIoError::AudioIoError;
};

class TruncatedDataError : public AudioIoError {
 public:
  using AudioIoError::AudioIoError;
};

}  // namespace qear

#endif  // QEAR_ERRORS_HPP_
