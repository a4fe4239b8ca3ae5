#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace xfit {

// splitmix64 finalizer; used for counter-mode child-seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Child stream seed for (scheme, size, replicate) style coordinates.
// Pure function of the inputs, so replicates never share RNG state and
// results cannot depend on worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (a + 0x0123456789ABCDEFULL));
  h = splitmix64(h ^ (b + 0xFEDCBA9876543210ULL));
  h = splitmix64(h ^ (c + 0x5555AAAA5555AAAAULL));
  return h;
}

// mt19937_64 is fully pinned by the standard; the distribution transforms
// below are hand-rolled because std:: distributions are not, and the
// harness promises bit-identical datasets for equal seeds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
  }

  // (0, 1]
  double uniform_pos() { return 1.0 - uniform(); }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do { x = eng_(); } while (x >= limit);
    return x % n;
  }

  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Knuth product method; fine for the lambda ~ 10 used here.
  int poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double prod = 1.0;
    do {
      ++k;
      prod *= uniform();
    } while (prod > limit);
    return k - 1;
  }

  // Beta(a, b) for small integer shapes via the order-statistic identity:
  // the a-th smallest of a+b-1 uniforms.
  double beta_int(int a, int b) {
    const int total = a + b - 1;
    if (a < 1 || b < 1 || total > 64)
      throw std::invalid_argument("Rng::beta_int: shapes out of supported range");
    double u[64];
    for (int i = 0; i < total; ++i) u[i] = uniform();
    std::nth_element(u, u + (a - 1), u + total);
    return u[a - 1];
  }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace xfit
