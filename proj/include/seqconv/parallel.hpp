// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <cstddef>
#include <functional>

namespace seqconv {

/// Worker threads used inside ops. Defaults to the hardware concurrency,
/// capped by the SEQCONV_THREADS environment variable; 1 in deterministic mode.
int worker_threads();
void set_worker_threads(int n);

/// Deterministic mode serializes all intra-op work.
bool deterministic();
void set_deterministic(bool on);

/// Run fn(i) for i in [0, n) across the worker pool. Iterations must write
/// disjoint memory; the split never affects results.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace seqconv
