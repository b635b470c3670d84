#ifndef W2A_NUMERICS_CHECKPOINT_H_
#define W2A_NUMERICS_CHECKPOINT_H_

#include <filesystem>
#include <string>
#include <string_view>

#include "w2a/numerics/parameters.h"

namespace w2a {

// Binary layout:
//   "W2ALAB01"                 8-byte magic
//   u32 little-endian          header length in bytes
//   JSON header                {"entries":[{"name","shape","dtype":"f32","offset"}...]}
//                              in lexicographic name order, offsets relative
//                              to the payload start
//   payload                    little-endian float32 values, concatenated
inline constexpr std::string_view kCheckpointMagic = "W2ALAB01";

std::string SerializeCheckpoint(const ParameterRecord& record);
ParameterRecord ParseCheckpoint(std::string_view bytes);

void SaveCheckpoint(const std::filesystem::path& path, const ParameterRecord& record);
ParameterRecord LoadCheckpoint(const std::filesystem::path& path);

// Rounds every value through float32, i.e. what a save/load cycle yields.
ParameterRecord RoundToFloat32(const ParameterRecord& record);

}  // namespace w2a

#endif  // W2A_NUMERICS_CHECKPOINT_H_
