#include "dbn/bit_matrix.hpp"

#include "dbn/errors.hpp"

namespace dbn {

BitMatrix BitMatrix::slice_samples(std::size_t begin, std::size_t end) const {
  if (begin > end || end > samples_) throw StructuralError("BitMatrix slice out of range");
  BitMatrix out(end - begin, signals_);
  if ((begin % kWordBits) == 0) {
    for (std::size_t s = 0; s < signals_; ++s) {
      auto src = column(s);
      auto dst = out.column(s);
      for (std::size_t w = 0; w < dst.size(); ++w) dst[w] = src[begin / kWordBits + w];
    }
    out.clear_padding();
    return out;
  }
  for (std::size_t s = 0; s < signals_; ++s)
    for (std::size_t b = begin; b < end; ++b)
      if (get(b, s)) out.set(b - begin, s, true);
  return out;
}

BitMatrix BitMatrix::gather_samples(std::span<const std::size_t> rows) const {
  BitMatrix out(rows.size(), signals_);
  for (std::size_t s = 0; s < signals_; ++s) {
    auto src = column(s);
    auto dst = out.column(s);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::size_t b = rows[r];
      if (b >= samples_) throw StructuralError("BitMatrix gather index out of range");
      dst[r / kWordBits] |= ((src[b / kWordBits] >> (b % kWordBits)) & 1U) << (r % kWordBits);
    }
  }
  return out;
}

BitMatrix concat_samples(std::span<const BitMatrix> parts) {
  if (parts.empty()) return {};
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.signals() != parts.front().signals()) throw StructuralError("concat_samples: signal count mismatch");
    total += p.samples();
  }
  BitMatrix out(total, parts.front().signals());
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t s = 0; s < p.signals(); ++s)
      for (std::size_t b = 0; b < p.samples(); ++b)
        if (p.get(b, s)) out.set(offset + b, s, true);
    offset += p.samples();
  }
  return out;
}

}  // namespace dbn
