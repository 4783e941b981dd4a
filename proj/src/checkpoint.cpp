// Copyright 2026 The MaIL Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <zlib.h>

#include "mail/harness.h"

namespace mail {
namespace {

constexpr char kCheckpointMagic[] = "MAILCK1";
constexpr std::size_t kMagicSize = sizeof kCheckpointMagic - 1;
constexpr std::size_t kPayloadStart = kMagicSize + 1;

std::uint32_t checksum(const std::uint8_t* data, std::size_t size) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(size)));
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.raw(kCheckpointMagic);
  w.u8(kCheckpointVersion);
  w.str(serialize_config(ckpt.config));
  w.u32(ckpt.epoch);
  w.str(ckpt.rng_state);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const NamedTensor& nt : ckpt.tensors) {
    w.str(nt.name);
    const Shape& shape = nt.tensor.shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) w.u32(static_cast<std::uint32_t>(e));
    for (double v : nt.tensor.data()) w.f64(v);
  }
  auto& bytes = w.bytes();
  const std::uint32_t crc = checksum(bytes.data() + kPayloadStart, bytes.size() - kPayloadStart);
  w.u32(crc);
  return std::move(bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader head(bytes.data(), bytes.size(), "checkpoint");
  if (head.raw(kMagicSize) != kCheckpointMagic) throw FormatError("checkpoint: bad magic, expected MAILCK1");
  const std::uint8_t version = head.u8();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < kPayloadStart + 4) throw FormatError("checkpoint: truncated before checksum");
  const std::size_t payload_end = bytes.size() - 4;
  ByteReader trailer(bytes.data() + payload_end, 4, "checkpoint trailer");
  const std::uint32_t stored = trailer.u32();
  const std::uint32_t actual = checksum(bytes.data() + kPayloadStart, payload_end - kPayloadStart);
  if (stored != actual) {
    throw ChecksumError("checkpoint: checksum mismatch (file truncated or corrupted)");
  }

  ByteReader r(bytes.data() + kPayloadStart, payload_end - kPayloadStart, "checkpoint");
  Checkpoint ckpt;
  try {
    ckpt.config = parse_config(r.str());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: embedded config: ") + e.what());
  }
  ckpt.epoch = r.u32();
  ckpt.rng_state = r.str();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint: tensor '" + nt.name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
      e = r.u32();
      n *= e;
    }
    if (n * 8 > r.remaining()) throw FormatError("checkpoint: tensor '" + nt.name + "' payload truncated");
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    nt.tensor = Tensor(shape, std::move(data));
    ckpt.tensors.push_back(std::move(nt));
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes after parameter table");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace mail
