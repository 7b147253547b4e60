#include "lov/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lov::rng {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3)-1

inline std::uint32_t mulhi(std::uint32_t a, std::uint32_t b, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  return static_cast<std::uint32_t>(p >> 32);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::uint64_t key,
                                        const std::array<std::uint32_t, 4>& counter) {
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  std::array<std::uint32_t, 4> x = counter;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, lo1;
    const std::uint32_t hi0 = mulhi(kPhiloxM0, x[0], lo0);
    const std::uint32_t hi1 = mulhi(kPhiloxM1, x[2], lo1);
    x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return x;
}

double uniform01(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
                 std::uint32_t slot) {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
      step, slot};
  const auto words = philox4x32(seed, ctr);
  const std::uint64_t bits =
      (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  // 53-bit mantissa, shifted into (0,1): never returns exactly 0 or 1.
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1p-53;
}

double inverse_normal_cdf(double p) {
  // Wichura (1988), algorithm AS241, PPND16.
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("inverse_normal_cdf: p must lie in (0,1)");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -value : value;
}

double normal(std::uint64_t seed, std::uint64_t path, std::uint32_t step,
              std::uint32_t slot) {
  return inverse_normal_cdf(uniform01(seed, path, step, slot));
}

}  // namespace lov::rng
