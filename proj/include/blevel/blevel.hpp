// Copyright 2026 The blevel Authors
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

#include "blevel/aug_lagrangian.hpp"
#include "blevel/core.hpp"
#include "blevel/diagnostics.hpp"
#include "blevel/oracles.hpp"
#include "blevel/penalty.hpp"
#include "blevel/problems.hpp"
#include "blevel/reference.hpp"
#include "blevel/rng.hpp"
#include "blevel/salm.hpp"
#include "blevel/salvf.hpp"
#include "blevel/salvf_vr.hpp"
