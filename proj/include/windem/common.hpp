// Copyright 2026 The Windem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace windem {

using VecXd = Eigen::VectorXd;
using MatXd = Eigen::MatrixXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Covariance factorization failed (matrix not positive definite).
class FactorizationError : public Error {
 public:
  FactorizationError(const std::string& what, int component)
      : Error(what), component(component) {}
  int component;
};

/// A mixture component lost all responsibility mass during an M-step.
class ComponentCollapseError : public Error {
 public:
  ComponentCollapseError(const std::string& what, int component)
      : Error(what), component(component) {}
  int component;
};

/// Iterative procedure exceeded its round budget; carries the residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

class NotConnectedError : public Error {
 public:
  using Error::Error;
};

/// Fixed-point value outside the range budget of the codec.
class CodecOverflowError : public Error {
 public:
  using Error::Error;
};

/// Ciphertext or key used under the wrong public key.
class KeyMismatchError : public Error {
 public:
  using Error::Error;
};

/// Integer payload failed the post-consensus rounding guard.
class BroadcastIntegrityError : public Error {
 public:
  BroadcastIntegrityError(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

/// Gram estimate too noisy to form a usable covariance; advises a larger
/// signature length.
class HashBudgetError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace windem
