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

#include "bbmlab/engine.hpp"
#include "bbmlab/environment.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/experiments/config.hpp"
#include "bbmlab/experiments/estimators.hpp"
#include "bbmlab/experiments/harness.hpp"
#include "bbmlab/geometry.hpp"
#include "bbmlab/kernels.hpp"
#include "bbmlab/numfmt.hpp"
#include "bbmlab/radius.hpp"
#include "bbmlab/rng.hpp"
#include "bbmlab/stats.hpp"
#include "bbmlab/theory.hpp"
