#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace calibqa::internal {

std::string base64_encode(std::span<const unsigned char> bytes);

// Throws InputError on malformed input.
std::vector<unsigned char> base64_decode(std::string_view text);

// Little-endian float32 packing used by the record format.
std::string encode_floats(std::span<const float> values);
std::vector<float> decode_floats(std::string_view text);

}  // namespace calibqa::internal
