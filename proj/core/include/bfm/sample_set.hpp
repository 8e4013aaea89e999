#pragma once

#include <vector>

#include "bfm/common.hpp"

namespace bfm {

// n labeled vectors of uniform dimension. Image datasets store flattened
// N x N grids (row-major) with the side recorded by their DatasetSpec.
struct SampleSet {
  int dim = 0;
  std::vector<Vec> rows;
  std::vector<int> labels;  // same length as rows; 0 when unlabeled

  std::size_t size() const { return rows.size(); }
};

}  // namespace bfm
