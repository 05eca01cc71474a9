// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace refground
{

/// Runs `fn(i)` for i in [0, count) on up to `jobs` threads. The first exception is rethrown
/// after all workers stop.
void parallelFor(std::size_t count, int jobs, std::function<void(std::size_t)> const& fn);

} // namespace refground
