#pragma once

#include <vector>

#include "conav/belief.hpp"
#include "conav/grid_world.hpp"

namespace conav {

/// One communication event: belief before, robot path since the previous
/// transmission (ending at the camera cell), the transmitted observation and
/// the belief after the operator's edit.
struct Segment {
  BeliefMap before;
  std::vector<Cell> path;
  Observation observation;
  BeliefMap after;

  void validate() const;
  EditMask label() const { return edit_between(before, after); }
};

}  // namespace conav
