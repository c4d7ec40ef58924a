#include "ptrag/config.hpp"

#include <stdexcept>

namespace ptrag {

void RetrievalConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("beta must lie in [0, 1]");
  if (sections < 1) throw std::invalid_argument("sections (B) must be at least 1");
  if (paths < 1) throw std::invalid_argument("paths (P) must be at least 1");
}

}  // namespace ptrag
