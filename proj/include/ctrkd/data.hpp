#pragma once

#include <cstdint>
#include <vector>

namespace ctrkd {

// One logged impression. `rel` is the generator's hidden relevance and is
// absent (has_rel=false) for ingested external logs.
struct Example {
  int64_t id = 0;
  std::vector<int64_t> user;
  std::vector<int64_t> ctx;
  std::vector<int64_t> ad;
  std::vector<int64_t> behaviors;
  int64_t pos = 0;
  int click = 0;
  double rel = 0.0;
  bool has_rel = false;
};

using Dataset = std::vector<Example>;

}  // namespace ctrkd
