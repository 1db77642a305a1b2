#include "base64.h"

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>

#include "calibqa/error.h"

namespace calibqa::internal {

std::string base64_encode(std::span<const unsigned char> bytes) {
  if (bytes.empty()) return {};
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                      bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) {
    throw InputError("base64 payload length is not a multiple of 4");
  }
  std::vector<unsigned char> out(3 * (text.size() / 4));
  const int written =
      EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                      static_cast<int>(text.size()));
  if (written < 0) throw InputError("malformed base64 payload");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(written) - padding);
  return out;
}

std::string encode_floats(std::span<const float> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) {
      bytes[4 * i + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
    }
  }
  return base64_encode(bytes);
}

std::vector<float> decode_floats(std::string_view text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 4 != 0) {
    throw InputError("float32 payload size is not a multiple of 4 bytes");
  }
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    }
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

}  // namespace calibqa::internal
