#include "sim/simulate.hpp"

namespace lapis::sim {

FieldSequence simulate(const SimConfig& cfg) {
  switch (cfg.system) {
    case System::ks2d: return simulate_ks2d(cfg);
    case System::kolmogorov2d: return simulate_kolmogorov2d(cfg);
    case System::kvs: return simulate_kvs_lbm(cfg);
    case System::linear_toy: return simulate_linear_toy(cfg);
  }
  return {};
}

}  // namespace lapis::sim
