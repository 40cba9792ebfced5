#include "medsync/digest.hpp"

#include "medsync/error.hpp"

#include <openssl/evp.h>

namespace medsync {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string Digest::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

Digest Digest::from_hex(std::string_view text) {
  Digest d;
  if (text.size() != d.bytes.size() * 2) {
    throw Error(Errc::ParseError, "digest must be 64 hex digits, got " + std::to_string(text.size()));
  }
  for (std::size_t i = 0; i < d.bytes.size(); ++i) {
    const int hi = hex_value(text[2 * i]);
    const int lo = hex_value(text[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::ParseError, "non-hex character in digest");
    d.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return d;
}

Digest sha256(std::string_view data) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != d.bytes.size()) {
    throw std::runtime_error("EVP_Digest(sha256) failed");
  }
  return d;
}

}  // namespace medsync
