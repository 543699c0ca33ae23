#include "conpatch/image.hpp"
#include "conpatch/random.hpp"

namespace conpatch {

Image add_gaussian_noise(const Image& img, const NoiseSpec& spec) {
  if (!(spec.sigma_v >= 0.0)) throw std::invalid_argument("noise sigma must be non-negative");
  Image out = img;
  if (spec.sigma_v == 0.0) return out;
  auto& px = out.pixels();
  for (Eigen::Index i = 0; i < px.size(); ++i)
    px.data()[i] += spec.sigma_v * counter_normal(spec.seed, 0x4E4F495345ull, static_cast<std::uint64_t>(i));
  return out;
}

}  // namespace conpatch
