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

#include <cmath>
#include <string>

#include "bbmlab/errors.hpp"
#include "bbmlab/geometry.hpp"

namespace bbmlab {

/// Expanding-ball schedule r(t).
class RadiusFunction {
 public:
  enum class Form { power, log_power, constant };

  /// r(t) = c t^alpha, sub-diffusive: 0 < alpha < 1/2.
  static RadiusFunction power(double c, double alpha) {
    if (!(c > 0.0)) throw ParameterError("radius: c must be positive");
    if (!(alpha > 0.0 && alpha < 0.5)) throw ParameterError("radius: power form needs 0 < alpha < 1/2");
    return RadiusFunction(Form::power, c, alpha, 1);
  }

  /// r(t) = c (log t)^{1/d}, defined for t > 1.
  static RadiusFunction log_power(double c, int dim) {
    if (!(c > 0.0)) throw ParameterError("radius: c must be positive");
    check_dim(dim);
    return RadiusFunction(Form::log_power, c, 0.0, dim);
  }

  static RadiusFunction constant(double r0) {
    if (!(r0 > 0.0)) throw ParameterError("radius: r0 must be positive");
    return RadiusFunction(Form::constant, r0, 0.0, 1);
  }

  double operator()(double t) const {
    switch (form_) {
      case Form::power:
        if (!(t > 0.0)) throw ParameterError("radius: t must be positive");
        return c_ * std::pow(t, alpha_);
      case Form::log_power:
        if (!(t > 1.0)) throw ParameterError("radius: log_power form needs t > 1");
        return c_ * std::pow(std::log(t), 1.0 / dim_);
      case Form::constant:
        return c_;
    }
    return c_;
  }

  [[nodiscard]] Form form() const noexcept { return form_; }
  [[nodiscard]] double c() const noexcept { return c_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] int dim() const noexcept { return dim_; }

 private:
  RadiusFunction(Form f, double c, double alpha, int dim) : form_(f), c_(c), alpha_(alpha), dim_(dim) {}

  Form form_;
  double c_;
  double alpha_;
  int dim_;
};

}  // namespace bbmlab
