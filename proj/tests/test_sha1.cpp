#include <catch2/catch_amalgamated.hpp>
#include <openssl/evp.h>

#include <random>

#include "offstream/sha1.hpp"

using namespace offstream;

namespace {

std::string hex(const Sha1::Digest& d) {
  std::string out;
  for (auto b : d) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", unsigned(b));
    out += buf;
  }
  return out;
}

Sha1::Digest openssl_sha1(std::span<const std::byte> data) {
  Sha1::Digest out{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), reinterpret_cast<unsigned char*>(out.data()), &len,
             EVP_sha1(), nullptr);
  REQUIRE(len == 20);
  return out;
}

std::span<const std::byte> bytes(const std::string& s) {
  return {reinterpret_cast<const std::byte*>(s.data()), s.size()};
}

}  // namespace

TEST_CASE("sha1 standard vectors") {
  CHECK(hex(Sha1::digest(bytes("abc"))) == "a9993e364706816aba3e25717850c26c9cd0d89d");
  CHECK(hex(Sha1::digest(bytes(""))) == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  CHECK(hex(Sha1::digest(bytes("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"))) ==
        "84983e441c3bd26ebaae4aa1f95129e5e54670f1");
  CHECK(hex(Sha1::digest(bytes(std::string(1000000, 'a')))) ==
        "34aa973cd4c4daa4f61eeb2bdbad27316534016f");
}

TEST_CASE("sha1 one mebibyte of zeros matches the reference implementation") {
  std::vector<std::byte> block(std::size_t{1} << 20, std::byte{0});
  CHECK(Sha1::digest(block) == openssl_sha1(block));
}

TEST_CASE("sha1 agrees with the reference implementation on random inputs") {
  std::mt19937_64 rng(20240811);
  for (int i = 0; i < 200; ++i) {
    const std::size_t len = std::size_t(rng() % 5000);
    std::vector<std::byte> data(len);
    for (auto& b : data) b = std::byte(rng());
    CAPTURE(i, len);
    REQUIRE(Sha1::digest(data) == openssl_sha1(data));
  }
}

TEST_CASE("sha1 incremental updates match one-shot digest") {
  std::mt19937_64 rng(7);
  std::vector<std::byte> data(10000);
  for (auto& b : data) b = std::byte(rng());
  Sha1 s;
  std::size_t off = 0;
  while (off < data.size()) {
    const std::size_t take = std::min<std::size_t>(1 + rng() % 997, data.size() - off);
    s.update({data.data() + off, take});
    off += take;
  }
  CHECK(s.finish() == Sha1::digest(data));
}
