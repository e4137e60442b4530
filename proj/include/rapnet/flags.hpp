#pragma once

namespace rapnet {

/// Component switches; the defaults are the full model.
struct AblationFlags {
  bool inter_attention = true;
  bool intra_attention = true;
  bool highway_encoder = true;
  bool dynamic_pooling = true;
  bool use_mcan = true;
  bool use_knowledge = true;

  bool operator==(const AblationFlags&) const = default;
};

}  // namespace rapnet
