#include "pcmlab/random.hpp"

namespace pcm {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t point,
                          std::uint64_t sample) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (point * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  h = splitmix64(h ^ (sample * 0xABC98388FB8FAC03ULL + 0x2545F4914F6CDD1DULL));
  return h;
}

Rng make_stream(std::uint64_t master, std::uint64_t point, std::uint64_t sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(derive_seed(master, point, sample)),
                    static_cast<std::uint32_t>(derive_seed(master, point, sample) >> 32)};
  return Rng(seq);
}

}  // namespace pcm
