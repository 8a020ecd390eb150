// Copyright 2026 The RecMind Authors.
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

#include "recmind/dataset.hpp"
#include "recmind/embed.hpp"
#include "recmind/eval.hpp"
#include "recmind/graph.hpp"
#include "recmind/io.hpp"
#include "recmind/loss.hpp"
#include "recmind/model.hpp"
#include "recmind/queue.hpp"
#include "recmind/sampling.hpp"
#include "recmind/synthetic.hpp"
#include "recmind/training.hpp"
