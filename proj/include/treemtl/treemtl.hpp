// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "treemtl/costmodel.hpp"
#include "treemtl/enumerator.hpp"
#include "treemtl/error.hpp"
#include "treemtl/estimator.hpp"
#include "treemtl/graphdetect.hpp"
#include "treemtl/layout.hpp"
#include "treemtl/recommender.hpp"
