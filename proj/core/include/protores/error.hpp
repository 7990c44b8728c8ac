// Copyright 2026 The protores Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace protores {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Zero-length or parallel input to a rotation conversion.
class DegenerateRotation : public Error {
 public:
  DegenerateRotation(const std::string& what, double norm) : Error(what), norm_(norm) {}
  double norm() const { return norm_; }

 private:
  double norm_;
};

class DegenerateLookAt : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SkeletonError : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered in a loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed file whose contents violate data invariants.
class DataError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

/// Invalid client request; `field()` is a JSON-pointer-like path to the offending field.
class BadRequest : public Error {
 public:
  BadRequest(const std::string& what, std::string field) : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace protores
