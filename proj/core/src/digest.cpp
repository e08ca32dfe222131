#include "natsel/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdint>
#include <memory>
#include <stdexcept>

namespace natsel {

std::string parameter_digest(std::span<const Tensor> parameters) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("parameter_digest: cannot initialise SHA-256");
  }
  for (const Tensor& t : parameters) {
    for (double v : t.data()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      std::array<unsigned char, 8> bytes{};
      for (auto& b : bytes) {
        b = static_cast<unsigned char>(bits & 0xffU);
        bits >>= 8;
      }
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0x0f]);
  }
  return out;
}

std::string parameter_digest(const Classifier& model) { return parameter_digest(model.parameters()); }

}  // namespace natsel
