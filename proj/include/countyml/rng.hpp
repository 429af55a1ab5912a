#ifndef COUNTYML_RNG_HPP
#define COUNTYML_RNG_HPP

#include <cmath>
#include <cstdint>
#include <vector>

namespace countyml {

// Counter-based pseudo-random generator: the splitmix64 finalizer applied to
// an incrementing counter offset by a stream key. Output depends only on
// (key, counter), so independent streams can be derived for each tree, grid
// point, or fold and consumed in any order — the basis of the "same seed,
// same model, any thread count" contract. No std::random distribution is
// used anywhere; those are not reproducible across standard libraries.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static StreamRng from_seed(std::uint64_t seed) {
    return StreamRng(mix(seed ^ 0x5851f42d4c957f2dULL));
  }

  // Child stream keyed by (this stream, tag). Chain for multi-part paths,
  // e.g. from_seed(s).derive(grid_index).derive(fold_index).
  StreamRng derive(std::uint64_t tag) const {
    return StreamRng(mix(key_ ^ mix(tag ^ 0xd6e8feb86659fd93ULL)));
  }

  std::uint64_t next_u64() {
    counter_ += 1;
    return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on [0, 1) with 53 significant bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound), unbiased via rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Box-Muller; u1 is shifted into (0, 1] so the log is always finite.
  double normal() {
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace countyml

#endif  // COUNTYML_RNG_HPP
