#pragma once

#include <iosfwd>
#include <string>

#include "dbn/config.hpp"
#include "dbn/encoding.hpp"
#include "dbn/model.hpp"
#include "dbn/training.hpp"

namespace dbn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  ThermometerEncoder encoder;
  NetworkModel model;
  AdamState optimizer;
};

/// Binary blob: magic "DBNCKPT\0", version, config as INI text, encoder
/// thresholds, model tensors with frozen flags, Adam moments. Host byte order.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);  // IngestionError when malformed

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dbn
