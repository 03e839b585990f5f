#pragma once

#include <string>

#include "freqpriv/detector.hpp"

namespace freqpriv {

// Little-endian binary checkpoint:
//   magic "FPRV" | u32 version | model config block |
//   u32 group count | per group { u32 name_len, name, u32 ndims, u64 dims[],
//   u64 byte offset into data } | u64 data byte size | raw doubles.
// Round trips are bit-exact; corrupted or version-mismatched files raise
// IoError without constructing a partial model.
void save_checkpoint(const DetectorModel& m, const std::string& path);
DetectorModel load_checkpoint(const std::string& path);

// In-memory forms, used for byte-identity tests and hashing.
std::string checkpoint_bytes(const DetectorModel& m);
DetectorModel checkpoint_from_bytes(const std::string& bytes);

}  // namespace freqpriv
