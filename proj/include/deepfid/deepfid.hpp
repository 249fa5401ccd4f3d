/*
 * Copyright 2026 DeepFid Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Umbrella header.

#pragma once

#include "deepfid/attacks.hpp"
#include "deepfid/audit.hpp"
#include "deepfid/checkpoint.hpp"
#include "deepfid/config.hpp"
#include "deepfid/dataset.hpp"
#include "deepfid/digits.hpp"
#include "deepfid/embed.hpp"
#include "deepfid/idx.hpp"
#include "deepfid/losses.hpp"
#include "deepfid/net.hpp"
#include "deepfid/optim.hpp"
#include "deepfid/prototypes.hpp"
#include "deepfid/rng.hpp"
#include "deepfid/tensor.hpp"
#include "deepfid/textio.hpp"
#include "deepfid/triggers.hpp"
