// Copyright 2026 The nfield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "nfield/checkpoint.hpp"
#include "nfield/config.hpp"
#include "nfield/crf.hpp"
#include "nfield/dataset.hpp"
#include "nfield/error.hpp"
#include "nfield/evaluator.hpp"
#include "nfield/experiment.hpp"
#include "nfield/features.hpp"
#include "nfield/io.hpp"
#include "nfield/oracle.hpp"
#include "nfield/pipeline.hpp"
#include "nfield/raster.hpp"
#include "nfield/segment.hpp"
#include "nfield/synth.hpp"
#include "nfield/trainer.hpp"
#include "nfield/unary.hpp"
