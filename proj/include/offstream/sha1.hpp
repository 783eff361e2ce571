#pragma once

// Compact SHA-1 (FIPS 180-4). Used as the real compute kernel for the
// hashing workload and verified against an independent implementation in
// the test suite.

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>

namespace offstream {

class Sha1 {
 public:
  using Digest = std::array<std::byte, 20>;

  void update(std::span<const std::byte> data) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
    std::size_t len = data.size();
    total_ += len;
    while (len > 0) {
      const std::size_t take = std::min(len, std::size_t(64) - fill_);
      std::memcpy(buf_.data() + fill_, p, take);
      fill_ += take;
      p += take;
      len -= take;
      if (fill_ == 64) {
        process_block(buf_.data());
        fill_ = 0;
      }
    }
  }

  Digest finish() {
    const std::uint64_t bits = total_ * 8;
    const std::uint8_t pad = 0x80;
    update({reinterpret_cast<const std::byte*>(&pad), 1});
    const std::uint8_t zero = 0;
    while (fill_ != 56) update({reinterpret_cast<const std::byte*>(&zero), 1});
    std::array<std::uint8_t, 8> len{};
    for (int i = 0; i < 8; ++i) len[i] = std::uint8_t(bits >> (56 - 8 * i));
    update(std::as_bytes(std::span<const std::uint8_t>(len)));
    Digest out{};
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 4; ++j)
        out[std::size_t(4 * i + j)] = std::byte(h_[i] >> (24 - 8 * j));
    return out;
  }

  static Digest digest(std::span<const std::byte> data) {
    Sha1 s;
    s.update(data);
    return s.finish();
  }

 private:
  static std::uint32_t rotl(std::uint32_t v, int s) { return (v << s) | (v >> (32 - s)); }

  void process_block(const std::uint8_t* p) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = std::uint32_t(p[4 * i]) << 24 | std::uint32_t(p[4 * i + 1]) << 16 |
             std::uint32_t(p[4 * i + 2]) << 8 | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 80; ++i)
      w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5a827999;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ed9eba1;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8f1bbcdc;
      } else {
        f = b ^ c ^ d;
        k = 0xca62c1d6;
      }
      const std::uint32_t t = rotl(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rotl(b, 30);
      b = a;
      a = t;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  std::array<std::uint32_t, 5> h_{0x67452301, 0xefcdab89, 0x98badcfe, 0x10325476,
                                  0xc3d2e1f0};
  std::array<std::uint8_t, 64> buf_{};
  std::size_t fill_ = 0;
  std::uint64_t total_ = 0;
};

}  // namespace offstream
