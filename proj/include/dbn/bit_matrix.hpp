#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dbn {

using Word = std::uint64_t;
inline constexpr std::size_t kWordBits = 64;

inline constexpr std::size_t words_for(std::size_t bits) { return (bits + kWordBits - 1) / kWordBits; }

// Mask of the valid bits in the last word of a column of `bits` samples.
inline constexpr Word tail_mask(std::size_t bits) {
  const std::size_t r = bits % kWordBits;
  return r == 0 ? ~Word{0} : (Word{1} << r) - 1;
}

/// Bit-packed binary matrix of shape samples x signals.
///
/// Storage is one packed column per signal: column `s` occupies
/// `words_per_signal()` consecutive words, bit `b % 64` of word `b / 64`
/// holding sample `b`. Bits past `samples()` in the last word are always zero,
/// so popcounts over whole words are exact.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t samples, std::size_t signals)
      : samples_(samples), signals_(signals), wps_(words_for(samples)), words_(wps_ * signals, 0) {}

  std::size_t samples() const { return samples_; }
  std::size_t signals() const { return signals_; }
  std::size_t words_per_signal() const { return wps_; }

  bool get(std::size_t sample, std::size_t signal) const {
    return (words_[signal * wps_ + sample / kWordBits] >> (sample % kWordBits)) & 1U;
  }
  void set(std::size_t sample, std::size_t signal, bool value) {
    Word& w = words_[signal * wps_ + sample / kWordBits];
    const Word m = Word{1} << (sample % kWordBits);
    w = value ? (w | m) : (w & ~m);
  }

  std::span<const Word> column(std::size_t signal) const { return {words_.data() + signal * wps_, wps_}; }
  std::span<Word> column(std::size_t signal) { return {words_.data() + signal * wps_, wps_}; }

  std::size_t count_ones(std::size_t signal) const {
    std::size_t n = 0;
    for (Word w : column(signal)) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  // Re-zero padding bits after raw word writes.
  void clear_padding() {
    if (wps_ == 0) return;
    const Word m = tail_mask(samples_);
    for (std::size_t s = 0; s < signals_; ++s) words_[s * wps_ + wps_ - 1] &= m;
  }

  /// Rows [begin, end) as a new matrix.
  BitMatrix slice_samples(std::size_t begin, std::size_t end) const;
  /// Rows listed in `rows`, in order.
  BitMatrix gather_samples(std::span<const std::size_t> rows) const;

  std::span<const Word> words() const { return words_; }

  friend bool operator==(const BitMatrix&, const BitMatrix&) = default;

 private:
  std::size_t samples_ = 0;
  std::size_t signals_ = 0;
  std::size_t wps_ = 0;
  std::vector<Word> words_;
};

/// Stack row blocks (same signal count) into one matrix.
BitMatrix concat_samples(std::span<const BitMatrix> parts);

}  // namespace dbn
