#pragma once

#include <array>
#include <vector>

#include "calfront/datamodel.hpp"
#include "calfront/net.hpp"

namespace calfront::ensemble {

/// Per-frame fused prediction and per-class logit spread.
struct EnsembleOutput {
  std::vector<ZoneMap> zones;                                        // one per frame
  std::vector<std::array<Grid<double>, kZoneCount>> uncertainty;     // population std of class logits
  std::size_t members = 0;
};

/// Mean logits over members; the reduction runs in a fixed member order (sorted by content), so the
/// result does not depend on the order of `member_logits`.
struct Fused {
  net::Tensor mean;
  net::Tensor std;
  std::size_t members = 0;
};

Fused combine_logits(const std::vector<net::Tensor>& member_logits);

/// Zone maps (argmax of mean logits) and uncertainty maps for every frame of `fused`.
EnsembleOutput to_output(const Fused& fused);

/// Checks that all member configs agree on L, C, K, H, W and crop; throws ValidationError naming the field.
void check_compatible(const std::vector<net::Checkpoint>& members);

/// Runs every member on `series` and fuses the results, keeping only frames with `retain[t]` set.
EnsembleOutput ensemble_predict(const std::vector<net::Checkpoint>& members, const net::Tensor& series,
                                const std::vector<bool>& retain);

}  // namespace calfront::ensemble
