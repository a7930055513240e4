// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>

namespace sepkit::pipeline {

// Worker count: SEPKIT_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
int WorkerThreads();

// Runs fn(i) for i in [0, n) on up to `threads` workers. The first exception
// thrown by any task is rethrown after all workers stop. Results must not
// depend on scheduling; callers write into per-index slots.
void ParallelFor(size_t n, int threads, const std::function<void(size_t)>& fn);

}  // namespace sepkit::pipeline
