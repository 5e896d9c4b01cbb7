#pragma once

#include <array>
#include <cstdint>

#include "dbn/bit_matrix.hpp"

namespace dbn {

/// One of the 16 two-input Boolean functions.
///
/// Code n encodes the truth table as its 4-bit binary expansion, bit 2a+b
/// (LSB first) giving f(a, b). Rows are therefore ordered (0,0), (0,1),
/// (1,0), (1,1). Examples: 0 = FALSE, 8 = AND, 6 = XOR, 14 = OR,
/// 12 = A, 10 = B, 15 = TRUE.
class GateTruthTable {
 public:
  static constexpr int kCount = 16;

  constexpr GateTruthTable() = default;
  constexpr explicit GateTruthTable(std::uint8_t code) : code_(code & 0xF) {}

  constexpr std::uint8_t code() const { return code_; }
  constexpr bool eval(bool a, bool b) const { return (code_ >> (2 * int(a) + int(b))) & 1U; }
  constexpr std::array<bool, 4> bits() const {
    return {eval(false, false), eval(false, true), eval(true, false), eval(true, true)};
  }

  constexpr bool depends_on_a() const { return ((code_ >> 2) & 0x3) != (code_ & 0x3); }
  constexpr bool depends_on_b() const { return ((code_ >> 1) & 0x5) != (code_ & 0x5); }
  constexpr bool is_constant() const { return code_ == 0 || code_ == 15; }
  // Pass-through of one input (a learned skip connection once hardened).
  constexpr bool is_projection() const { return code_ == kA || code_ == kB; }

  // Evaluate 64 samples at once.
  constexpr Word eval_words(Word a, Word b) const {
    Word out = 0;
    if (code_ & 1U) out |= ~a & ~b;
    if (code_ & 2U) out |= ~a & b;
    if (code_ & 4U) out |= a & ~b;
    if (code_ & 8U) out |= a & b;
    return out;
  }

  friend constexpr bool operator==(GateTruthTable, GateTruthTable) = default;

  static constexpr std::uint8_t kFalse = 0;
  static constexpr std::uint8_t kAnd = 8;
  static constexpr std::uint8_t kXor = 6;
  static constexpr std::uint8_t kXnor = 9;
  static constexpr std::uint8_t kOr = 14;
  static constexpr std::uint8_t kNotA = 3;
  static constexpr std::uint8_t kA = 12;
  static constexpr std::uint8_t kB = 10;
  static constexpr std::uint8_t kTrue = 15;

 private:
  std::uint8_t code_ = 0;
};

}  // namespace dbn
