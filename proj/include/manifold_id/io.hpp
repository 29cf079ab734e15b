#pragma once

#include <filesystem>
#include <vector>

#include "manifold_id/data.hpp"

namespace manifold_id {

// EMB1 layout: magic "EMB1" (0x45 0x4D 0x42 0x31), then u32-le row count m,
// u32-le dim p, then m*p float32-le values in row-major order.

// Reads an embedding file. Files that start with the EMB1 magic are parsed as
// binary; everything else as headerless CSV (one row per line). FormatError
// messages carry the byte offset (binary) or line number (CSV).
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

// Writes EMB1. Values are quantized to float32; doubles that are exactly
// representable (in particular anything read_embeddings produced) round-trip
// bit-for-bit.
void write_embeddings(const EmbeddingMatrix& Z, const std::filesystem::path& path);

// Newline-delimited non-negative integers, one per sample.
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::vector<int>& labels, const std::filesystem::path& path);

} // namespace manifold_id
