#pragma once

namespace w2gn {

/// Keeps freed heap memory around instead of returning it to the OS.
///
/// Batched passes allocate and release many activation matrices of a few
/// hundred kilobytes per step. With default glibc settings those sit near the
/// mmap and heap-trim thresholds, so every step pays for fresh page faults.
/// Safe to call repeatedly; a no-op on other C libraries.
void tune_allocator();

}  // namespace w2gn
