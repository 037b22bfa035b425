#pragma once

#include <array>
#include <cstdint>

namespace corrfactor {

/// Counter-based Philox4x32-10 stream. Instances keyed by (seed, stream)
/// produce independent sequences, so work split across any number of
/// workers reproduces bit-identical results as long as each logical unit
/// (walker, annealing restart, dropout trial) owns its stream id.
class Philox4x32 {
public:
    Philox4x32(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    std::uint32_t next_u32() {
        if (idx_ == 4) {
            out_ = block(ctr_, key_);
            bump();
            idx_ = 0;
        }
        return out_[idx_++];
    }

    /// Uniform double in (0, 1).
    double next_double() {
        return (static_cast<double>(next_u32()) + 0.5) * (1.0 / 4294967296.0);
    }

    /// Uniform integer in [0, n).
    std::uint32_t next_below(std::uint32_t n) {
        return static_cast<std::uint32_t>(next_double() * n) % n;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> c,
                                              std::array<std::uint32_t, 2> k) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
                 static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
                 static_cast<std::uint32_t>(p0)};
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        return c;
    }

    void bump() {
        if (++ctr_[0] == 0) ++ctr_[1];
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    std::array<std::uint32_t, 4> out_{};
    int idx_ = 4;
};

}  // namespace corrfactor
