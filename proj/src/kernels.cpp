#include "sokid/kernels.hpp"

#include <string>

#include "sokid/error.hpp"

namespace sokid {

GaussianKernel::GaussianKernel(double bandwidth) : bandwidth_(bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorKind::validation,
                "Gaussian bandwidth must be positive and finite, got " +
                    std::to_string(bandwidth));
  }
  inv_two_h2_ = 1.0 / (2.0 * bandwidth * bandwidth);
}

FeatureMap::FeatureMap(int p) : p_(p) {
  if (p < 1) {
    throw Error(ErrorKind::validation,
                "feature dimension p must be >= 1, got " + std::to_string(p));
  }
}

}  // namespace sokid
