// Copyright 2026 The georet Authors.
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

// Umbrella header for the core library (bundle.hpp, which needs OpenSSL, is
// included separately).

#pragma once

#include "georet/benchkit.hpp"
#include "georet/compress.hpp"
#include "georet/error.hpp"
#include "georet/evalkit.hpp"
#include "georet/index.hpp"
#include "georet/io.hpp"
#include "georet/metrics.hpp"
#include "georet/vecstore.hpp"
