#include "tfx/g711.hpp"

#include <array>

namespace tfx::media {

namespace {

constexpr int kMuBias = 0x84;
constexpr int kMuClip = 8159;  // 14-bit magnitude limit

// Upper bounds of each segment, 14-bit (mu) and 13-bit (A) magnitudes.
constexpr std::array<int, 8> kMuSegEnd = {0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF, 0x1FFF};
constexpr std::array<int, 8> kASegEnd = {0x1F, 0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF};

int segment(int value, const std::array<int, 8>& ends) {
  for (int i = 0; i < 8; ++i)
    if (value <= ends[static_cast<std::size_t>(i)]) return i;
  return 8;
}

std::array<std::int16_t, 256> make_mu_table() {
  std::array<std::int16_t, 256> t{};
  for (int code = 0; code < 256; ++code) {
    const int u = ~code & 0xff;
    int mag = ((u & 0x0f) << 3) + kMuBias;
    mag <<= (u & 0x70) >> 4;
    t[static_cast<std::size_t>(code)] =
        static_cast<std::int16_t>((u & 0x80) ? (kMuBias - mag) : (mag - kMuBias));
  }
  return t;
}

std::array<std::int16_t, 256> make_a_table() {
  std::array<std::int16_t, 256> t{};
  for (int code = 0; code < 256; ++code) {
    const int a = code ^ 0x55;
    int mag = (a & 0x0f) << 4;
    const int seg = (a & 0x70) >> 4;
    if (seg == 0) mag += 8;
    else mag = (mag + 0x108) << (seg - 1);
    t[static_cast<std::size_t>(code)] = static_cast<std::int16_t>((a & 0x80) ? mag : -mag);
  }
  return t;
}

const std::array<std::int16_t, 256> kMuTable = make_mu_table();
const std::array<std::int16_t, 256> kATable = make_a_table();

}  // namespace

std::int16_t decode_mulaw(std::uint8_t code) { return kMuTable[code]; }
std::int16_t decode_alaw(std::uint8_t code) { return kATable[code]; }

std::uint8_t encode_mulaw(std::int16_t sample) {
  // Negative inputs use the one's complement, as the ITU reference coder does.
  int pcm = sample >> 2;
  int mask = 0xff;
  if (sample < 0) {
    pcm = (~sample) >> 2;
    mask = 0x7f;
  }
  if (pcm > kMuClip) pcm = kMuClip;
  pcm += kMuBias >> 2;
  const int seg = segment(pcm, kMuSegEnd);
  if (seg >= 8) return static_cast<std::uint8_t>(0x7f ^ mask);
  const int code = (seg << 4) | ((pcm >> (seg + 1)) & 0x0f);
  return static_cast<std::uint8_t>(code ^ mask);
}

std::uint8_t encode_alaw(std::int16_t sample) {
  int pcm = sample >> 3;
  int mask = 0xd5;
  if (pcm < 0) {
    mask = 0x55;
    pcm = -pcm - 1;
  }
  const int seg = segment(pcm, kASegEnd);
  if (seg >= 8) return static_cast<std::uint8_t>(0x7f ^ mask);
  int code = seg << 4;
  code |= seg < 2 ? (pcm >> 1) & 0x0f : (pcm >> seg) & 0x0f;
  return static_cast<std::uint8_t>(code ^ mask);
}

std::vector<std::int16_t> decode_g711(std::span<const std::uint8_t> payload, G711Law law) {
  const auto& table = law == G711Law::MU ? kMuTable : kATable;
  std::vector<std::int16_t> out;
  out.reserve(payload.size());
  for (std::uint8_t b : payload) out.push_back(table[b]);
  return out;
}

Bytes encode_g711(std::span<const std::int16_t> samples, G711Law law) {
  Bytes out;
  out.reserve(samples.size());
  for (std::int16_t s : samples)
    out.push_back(law == G711Law::MU ? encode_mulaw(s) : encode_alaw(s));
  return out;
}

}  // namespace tfx::media
