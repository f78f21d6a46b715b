#pragma once

// Relabeling-invariant graph digests and an exact isomorphism test for small
// encodings.

#include <array>
#include <cstdint>
#include <string>

#include "cpgraph/encoder.hpp"

namespace cpg {

using Digest = std::array<std::uint8_t, 32>;

std::string to_hex(const Digest& d);

// Features are compared after rounding to this many decimals.
inline constexpr int kFeatureQuantizationDecimals = 6;

// SHA-256 over the stable coloring reached by color refinement seeded with
// (vertex type, quantized features). Equal for graphs that are equal up to a
// type-preserving relabeling.
Digest canonical_hash(const EncodedGraph& g);

inline constexpr std::uint32_t kIsomorphismVertexLimit = 24;

// Exact test for a type- and feature-preserving bijection that maps edges onto
// edges. Throws std::length_error when either graph exceeds the vertex limit.
bool isomorphic(const EncodedGraph& a, const EncodedGraph& b);

}  // namespace cpg
