// Copyright 2026 The convcode Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "convcode/backend.hpp"
#include "convcode/csv.hpp"
#include "convcode/evaluation.hpp"
#include "convcode/io.hpp"
#include "convcode/mock_script.hpp"
#include "convcode/prompt.hpp"
#include "convcode/rng.hpp"
#include "convcode/runner.hpp"
#include "convcode/scheme.hpp"
#include "convcode/selection.hpp"
#include "convcode/text.hpp"
#include "convcode/transcript.hpp"
