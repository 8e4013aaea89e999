#include "bfm/common.hpp"

namespace bfm {

double f32_round(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace bfm
