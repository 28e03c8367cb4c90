#pragma once

#include <cstdint>
#include <filesystem>

namespace mjnd {

/// Writes a procedurally generated 10-class archive in the CIFAR-10 binary
/// layout (five 10,000-record training files plus test_batch.bin). Class k is
/// a fixed shape family (disk, ring, square, frame, triangle, diamond, plus,
/// cross, horizontal bars, vertical bars) drawn at a random position, size and
/// colour pair over a noisy gradient background. Classes are balanced per
/// file. Output is a pure function of `seed`.
void write_synthetic_archive(const std::filesystem::path& dir, std::uint64_t seed);

/// True when `dir` already holds all six batch files with the right sizes.
bool archive_complete(const std::filesystem::path& dir);

}  // namespace mjnd
