#include "tonecost/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "tonecost/error.hpp"

namespace tonecost {

namespace {

std::string to_hex(const unsigned char* bytes, unsigned len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(digits[bytes[i] >> 4]);
    out.push_back(digits[bytes[i] & 0xF]);
  }
  return out;
}

struct DigestCtx {
  EVP_MD_CTX* ctx;
  DigestCtx() : ctx(EVP_MD_CTX_new()) {
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
      throw Error("sha256: failed to initialize digest context");
    }
  }
  ~DigestCtx() { EVP_MD_CTX_free(ctx); }
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  DigestCtx d;
  if (EVP_DigestUpdate(d.ctx, data.data(), data.size()) != 1) {
    throw Error("sha256: digest update failed");
  }
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_DigestFinal_ex(d.ctx, out, &len) != 1) {
    throw Error("sha256: digest finalize failed");
  }
  return to_hex(out, len);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("sha256: cannot open file: " + path.string());
  DigestCtx d;
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::streamsize got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(d.ctx, buf.data(), static_cast<size_t>(got)) != 1) {
      throw Error("sha256: digest update failed");
    }
  }
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_DigestFinal_ex(d.ctx, out, &len) != 1) {
    throw Error("sha256: digest finalize failed");
  }
  return to_hex(out, len);
}

}  // namespace tonecost
