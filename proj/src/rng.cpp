#include "ldet/rng.hpp"

#include "ldet/numerics.hpp"

namespace ldet {

double RngStream::gaussian() { return normal_quantile(uniform()); }

}  // namespace ldet
