#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace stra {

/// Canonical Huffman coding of signed integer symbols.
///
/// Stream layout: varint symbol count n, then n entries of
/// (zigzag delta from the previous symbol, code length byte) in ascending
/// symbol order, then the MSB-first code bits padded to a byte. A single
/// distinct symbol is stored with length 0 and no code bits.
std::vector<std::uint8_t> huffman_encode(std::span<const std::int64_t> symbols);

/// Decodes exactly `count` symbols; throws FormatError(Framing) on a malformed stream.
std::vector<std::int64_t> huffman_decode(std::span<const std::uint8_t> bytes, std::size_t count);

/// Code lengths for the given frequencies, limited to `max_length` bits.
std::vector<std::uint8_t> huffman_code_lengths(std::span<const std::uint64_t> freqs,
                                               unsigned max_length = 32);

}  // namespace stra
