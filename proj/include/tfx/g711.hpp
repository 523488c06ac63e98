#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tfx/common.hpp"

namespace tfx::media {

enum class G711Law { MU, A };

/// 8-bit G.711 code to 16-bit linear PCM.
std::int16_t decode_mulaw(std::uint8_t code);
std::int16_t decode_alaw(std::uint8_t code);

/// 16-bit linear PCM to G.711; inputs beyond the codec range are clipped.
std::uint8_t encode_mulaw(std::int16_t sample);
std::uint8_t encode_alaw(std::int16_t sample);

std::vector<std::int16_t> decode_g711(std::span<const std::uint8_t> payload, G711Law law);
Bytes encode_g711(std::span<const std::int16_t> samples, G711Law law);

}  // namespace tfx::media
