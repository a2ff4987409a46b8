// Copyright 2026 The bbmlab Authors
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
#include <utility>
#include <string>

namespace bbmlab {

/// Invalid numeric parameter (non-positive rate, bad step, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Query outside the region where an object is defined.
class DomainError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A particle left the realized trap-field box.
class EnvironmentTooSmall : public std::runtime_error {
 public:
  EnvironmentTooSmall(double reached, double required_half_width)
      : std::runtime_error("environment too small: particle reached |x|_inf=" + std::to_string(reached) +
                           "; rerun with box half-width >= " + std::to_string(required_half_width)),
        reached_(reached),
        required_half_width_(required_half_width) {}

  [[nodiscard]] double reached() const noexcept { return reached_; }
  [[nodiscard]] double required_half_width() const noexcept { return required_half_width_; }

 private:
  double reached_;
  double required_half_width_;
};

/// Invalid experiment configuration; `path()` names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::invalid_argument(path + ": " + what), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Checkpoint written by a run with a different configuration.
class ConfigHashMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bbmlab
