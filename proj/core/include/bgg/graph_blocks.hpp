#pragma once

// Bipartite graph reasoning blocks and the interaction/aggregation blocks
// that feed their output back into the appearance stream.
//
// Graph-space shapes for one branch operating on C x H x W codes (L = H*W):
//   H  = flatten(theta(F_node))            N  x L   projection onto N nodes
//   V  = H * flatten(phi(F_feat))^T        N  x C'  node features
//   M  = (I - A) * V * W                   N  x C'  Laplacian-smoothed message
//   out = psi(unflatten(M^T * H)) + F_feat C  x H x W

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bgg/nn.hpp"

namespace bgg {

inline constexpr std::size_t kNumParts = 18;

struct BGRBranchParams {
  ConvLayer theta;             // C -> N, 1x1
  ConvLayer phi;               // C -> C', 1x1
  ParameterPtr adjacency;      // N x N
  ParameterPtr edge_weights;   // C' x C'
  ConvLayer psi;               // C' -> C, 1x1

  static BGRBranchParams make(ParamInit& init, const std::string& name, std::size_t channels,
                              std::size_t nodes, std::size_t node_channels);
  std::size_t channels() const { return theta.in_channels(); }
  std::size_t nodes() const { return theta.out_channels(); }
  std::size_t node_channels() const { return phi.out_channels(); }
  void collect(ParamList& out) const;
};

using BGRBranchPtr = std::shared_ptr<BGRBranchParams>;

/// A missing branch passes its code through unchanged (ablations B2/B3).
/// With sharing, both members point at one BGRBranchParams.
struct BGRBlockParams {
  BGRBranchPtr b2a;
  BGRBranchPtr a2b;

  enum class Branches { both, b2a_only, a2b_only };
  static BGRBlockParams make(ParamInit& init, const std::string& name, std::size_t channels,
                             std::size_t nodes, std::size_t node_channels, bool share,
                             Branches branches = Branches::both);
  bool shared() const { return b2a && b2a == a2b; }
  void collect(ParamList& out) const;
};

/// Updates `feat` with messages reasoned over nodes projected from `node_src`.
Tensor bgr_branch(Tape* tape, const Tensor& feat, const Tensor& node_src, const BGRBranchParams& p);

/// Both directions from the same inputs: (B2A(F_pa; F_pb), A2B(F_pb; F_pa)).
std::pair<Tensor, Tensor> bgr_block(Tape* tape, const Tensor& f_pa, const Tensor& f_pb,
                                    const BGRBlockParams& p);

struct IABlockParams {
  ConvUnit attention_in;   // 2C -> C, norm + relu
  ConvLayer attention_out; // C -> C, followed by sigmoid
  ConvUnit shape_in;       // 3C -> C, norm + relu
  ConvLayer shape_out;     // C -> 2C, split into the two shape codes

  static IABlockParams make(ParamInit& init, const std::string& name, std::size_t channels,
                            std::size_t kernel, bool use_norm);
  void collect(ParamList& out) const;
};

struct IAOutput {
  Tensor appearance;
  Tensor source_code;
  Tensor target_code;
  Tensor attention;
};

/// Attention from the reasoned shape codes gates the appearance code
/// (F' = A*F + F); the shape codes are then re-derived from the new
/// appearance code.
IAOutput ia_block(Tape* tape, const Tensor& appearance, const Tensor& source_code,
                  const Tensor& target_code, const IABlockParams& p);

/// Per-pixel convex blend: source * mask + intermediate * (1 - mask), with the
/// one-channel mask broadcast over the image channels. When `verify_range` is
/// set a mask value outside [0, 1] throws ContractError.
Tensor aif_fuse(const Tensor& source, const Tensor& intermediate, const Tensor& mask,
                bool verify_range = false);

// ---- part-aware path ---------------------------------------------------------

/// Per-part shape codes (source and target), each C_part x H x W.
struct PartCodes {
  std::vector<Tensor> source;
  std::vector<Tensor> target;
  std::size_t size() const { return source.size(); }
};

struct PBGRParams {
  std::vector<BGRBlockParams> parts;

  /// With share_across_parts every part uses the same block parameters.
  static PBGRParams make(ParamInit& init, const std::string& name, std::size_t part_channels,
                         std::size_t nodes, std::size_t node_channels, bool share_branches,
                         bool share_across_parts, std::size_t num_parts = kNumParts);
  void collect(ParamList& out) const;
};

/// Sum over parts (fixed order) of concat(B2A_i, A2B_i). The part count must
/// equal `expected_parts` and the parameter count. The per-part reasoned codes
/// are stored in `reasoned` when given.
Tensor pbgr_block(Tape* tape, const PartCodes& codes, const PBGRParams& p,
                  std::size_t expected_parts = kNumParts, PartCodes* reasoned = nullptr);

struct PartUpdateParams {
  ConvUnit hidden;   // (C + 2 C_part) -> C, norm + relu
  ConvLayer out;     // C -> 2 C_part
};

struct PartIAParams {
  std::vector<std::shared_ptr<PartUpdateParams>> parts;

  static PartIAParams make(ParamInit& init, const std::string& name, std::size_t channels,
                           std::size_t part_channels, std::size_t kernel, bool use_norm,
                           bool share_across_parts, std::size_t num_parts = kNumParts);
  void collect(ParamList& out) const;
};

struct PartIAOutput {
  Tensor appearance;
  PartCodes codes;
  Tensor attention;
};

/// A = sigmoid(F_p); F' = A*F + F; each part code pair is re-derived from
/// concat(F', source_i, target_i) and split along channels; the generator passes
/// the reasoned codes from pbgr_block.
PartIAOutput part_ia_block(Tape* tape, const Tensor& appearance, const Tensor& global_code,
                           const PartCodes& codes, const PartIAParams& p);

}  // namespace bgg
