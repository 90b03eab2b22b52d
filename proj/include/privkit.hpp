// Copyright 2026 The PrivKit Authors
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


// Umbrella header.

#pragma once

#include "privkit/backends.hpp"
#include "privkit/dataset.hpp"
#include "privkit/embedding_cache.hpp"
#include "privkit/error.hpp"
#include "privkit/gradient_check.hpp"
#include "privkit/hyperparameters.hpp"
#include "privkit/image.hpp"
#include "privkit/metrics.hpp"
#include "privkit/optimizer.hpp"
#include "privkit/parallel.hpp"
#include "privkit/png_io.hpp"
#include "privkit/privacy_loss.hpp"
#include "privkit/registry.hpp"
#include "privkit/report.hpp"
#include "privkit/run_config.hpp"
#include "privkit/synthetic.hpp"
#include "privkit/target_selection.hpp"
#include "privkit/toy_backends.hpp"
#include "privkit/transfer_eval.hpp"
