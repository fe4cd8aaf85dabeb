// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "vspc/core/io.hpp"
#include "vspc/core/packing.hpp"
#include "vspc/core/quantize.hpp"
#include "vspc/core/rng.hpp"
#include "vspc/core/synthetic.hpp"
#include "vspc/core/types.hpp"
#include "vspc/features/compute.hpp"
#include "vspc/features/gemm.hpp"
#include "vspc/features/weights.hpp"
#include "vspc/kmap/builders.hpp"
#include "vspc/kmap/dataflow_plan.hpp"
#include "vspc/kmap/kernel_map.hpp"
#include "vspc/kmap/offsets.hpp"
#include "vspc/kmap/post_process.hpp"
#include "vspc/kmap/sort.hpp"
#include "vspc/network/density.hpp"
#include "vspc/network/indexing.hpp"
#include "vspc/network/runner.hpp"
#include "vspc/network/spec.hpp"
#include "vspc/network/tuner.hpp"
#include "vspc/oracle/dense_grid.hpp"
#include "vspc/oracle/direct.hpp"
