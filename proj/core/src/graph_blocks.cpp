#include "bgg/graph_blocks.hpp"

#include <array>

namespace bgg {

BGRBranchParams BGRBranchParams::make(ParamInit& init, const std::string& name,
                                      std::size_t channels, std::size_t nodes,
                                      std::size_t node_channels) {
  if (channels == 0 || nodes == 0 || node_channels == 0) {
    throw ConfigError("BGR branch dimensions must be positive");
  }
  BGRBranchParams p;
  p.theta = ConvLayer::make(init, name + ".theta", channels, nodes, 1, 1, 0);
  p.phi = ConvLayer::make(init, name + ".phi", channels, node_channels, 1, 1, 0);
  p.adjacency = init.normal(name + ".adjacency", {nodes, nodes});
  p.edge_weights = init.normal(name + ".edge_weights", {node_channels, node_channels});
  p.psi = ConvLayer::make(init, name + ".psi", node_channels, channels, 1, 1, 0);
  return p;
}

void BGRBranchParams::collect(ParamList& out) const {
  theta.collect(out);
  phi.collect(out);
  append_unique(out, std::array{adjacency, edge_weights});
  psi.collect(out);
}

BGRBlockParams BGRBlockParams::make(ParamInit& init, const std::string& name,
                                    std::size_t channels, std::size_t nodes,
                                    std::size_t node_channels, bool share, Branches branches) {
  BGRBlockParams p;
  if (share) {
    auto both = std::make_shared<BGRBranchParams>(
        BGRBranchParams::make(init, name + ".shared", channels, nodes, node_channels));
    p.b2a = both;
    p.a2b = both;
    return p;
  }
  if (branches != Branches::a2b_only) {
    p.b2a = std::make_shared<BGRBranchParams>(
        BGRBranchParams::make(init, name + ".b2a", channels, nodes, node_channels));
  }
  if (branches != Branches::b2a_only) {
    p.a2b = std::make_shared<BGRBranchParams>(
        BGRBranchParams::make(init, name + ".a2b", channels, nodes, node_channels));
  }
  return p;
}

void BGRBlockParams::collect(ParamList& out) const {
  if (b2a) b2a->collect(out);
  if (a2b) a2b->collect(out);
}

Tensor bgr_branch(Tape* tape, const Tensor& feat, const Tensor& node_src, const BGRBranchParams& p) {
  if (feat.shape() != node_src.shape()) {
    throw ShapeError("bgr_branch: input shapes differ: " + shape_str(feat.shape()) + " vs " +
                     shape_str(node_src.shape()));
  }
  if (feat.rank() != 3 || feat.dim(0) != p.channels()) {
    throw ShapeError("bgr_branch: expected " + std::to_string(p.channels()) +
                     " channels, got " + shape_str(feat.shape()));
  }
  const std::size_t height = feat.dim(1), width = feat.dim(2);

  const Tensor projection = flatten_spatial(p.theta.forward(tape, node_src));       // N x L
  const Tensor reduced = flatten_spatial(p.phi.forward(tape, feat));                // C' x L
  const Tensor nodes = matmul(projection, transpose(reduced));                      // N x C'
  const Tensor adjacency = use(tape, *p.adjacency);
  const Tensor laplacian = eye(p.nodes(), adjacency.dtype()) - adjacency;           // N x N
  const Tensor message = matmul(matmul(laplacian, nodes), use(tape, *p.edge_weights));  // N x C'
  const Tensor back = matmul(transpose(message), projection);                       // C' x L
  return p.psi.forward(tape, unflatten_spatial(back, height, width)) + feat;
}

std::pair<Tensor, Tensor> bgr_block(Tape* tape, const Tensor& f_pa, const Tensor& f_pb,
                                    const BGRBlockParams& p) {
  Tensor new_pa = p.b2a ? bgr_branch(tape, f_pa, f_pb, *p.b2a) : f_pa;
  Tensor new_pb = p.a2b ? bgr_branch(tape, f_pb, f_pa, *p.a2b) : f_pb;
  return {std::move(new_pa), std::move(new_pb)};
}

IABlockParams IABlockParams::make(ParamInit& init, const std::string& name, std::size_t channels,
                                  std::size_t kernel, bool use_norm) {
  const int pad = static_cast<int>(kernel / 2);
  IABlockParams p;
  p.attention_in = ConvUnit::make(init, name + ".attention_in", 2 * channels, channels, kernel, 1,
                                  pad, use_norm, Activation::relu);
  p.attention_out = ConvLayer::make(init, name + ".attention_out", channels, channels, kernel, 1, pad);
  p.shape_in = ConvUnit::make(init, name + ".shape_in", 3 * channels, channels, kernel, 1, pad,
                              use_norm, Activation::relu);
  p.shape_out = ConvLayer::make(init, name + ".shape_out", channels, 2 * channels, kernel, 1, pad);
  return p;
}

void IABlockParams::collect(ParamList& out) const {
  attention_in.collect(out);
  attention_out.collect(out);
  shape_in.collect(out);
  shape_out.collect(out);
}

IAOutput ia_block(Tape* tape, const Tensor& appearance, const Tensor& source_code,
                  const Tensor& target_code, const IABlockParams& p) {
  if (appearance.shape() != source_code.shape() || appearance.shape() != target_code.shape()) {
    throw ShapeError("ia_block: appearance and shape codes must share a shape");
  }
  const std::size_t channels = appearance.dim(0);
  const Tensor attention = sigmoid(
      p.attention_out.forward(tape, p.attention_in.forward(tape, concat_channels({source_code, target_code}))));
  if (attention.shape() != appearance.shape()) {
    throw ShapeError("ia_block: attention channels differ from appearance channels");
  }
  Tensor enhanced = attention * appearance + appearance;
  const Tensor mixed =
      p.shape_out.forward(tape, p.shape_in.forward(tape, concat_channels({enhanced, source_code, target_code})));
  auto codes = split_channels(mixed, {channels, channels});
  return {std::move(enhanced), std::move(codes[0]), std::move(codes[1]), attention};
}

Tensor aif_fuse(const Tensor& source, const Tensor& intermediate, const Tensor& mask,
                bool verify_range) {
  if (source.shape() != intermediate.shape() || source.rank() != 3) {
    throw ShapeError("aif_fuse: source and intermediate images must share a C x H x W shape");
  }
  if (mask.rank() != 3 || mask.dim(0) != 1 || mask.dim(1) != source.dim(1) ||
      mask.dim(2) != source.dim(2)) {
    throw ShapeError("aif_fuse: mask must be 1 x H x W, got " + shape_str(mask.shape()));
  }
  if (verify_range) {
    for (double v : mask.to_vector()) {
      if (!(v >= 0.0 && v <= 1.0)) throw ContractError("aif_fuse: mask value outside [0, 1]");
    }
  }
  const Tensor keep = broadcast_channels(mask, source.dim(0));
  return source * keep + intermediate * affine(keep, -1.0, 1.0);
}

// ---- part-aware path ---------------------------------------------------------

PBGRParams PBGRParams::make(ParamInit& init, const std::string& name, std::size_t part_channels,
                            std::size_t nodes, std::size_t node_channels, bool share_branches,
                            bool share_across_parts, std::size_t num_parts) {
  PBGRParams p;
  if (share_across_parts) {
    auto block = BGRBlockParams::make(init, name + ".part", part_channels, nodes, node_channels,
                                      share_branches);
    p.parts.assign(num_parts, block);
    return p;
  }
  for (std::size_t i = 0; i < num_parts; ++i) {
    p.parts.push_back(BGRBlockParams::make(init, name + ".part" + std::to_string(i), part_channels,
                                           nodes, node_channels, share_branches));
  }
  return p;
}

void PBGRParams::collect(ParamList& out) const {
  for (const auto& block : parts) block.collect(out);
}

Tensor pbgr_block(Tape* tape, const PartCodes& codes, const PBGRParams& p,
                  std::size_t expected_parts, PartCodes* reasoned) {
  if (codes.source.size() != expected_parts || codes.target.size() != expected_parts) {
    throw ContractError("pbgr_block: expected " + std::to_string(expected_parts) +
                        " sub-pose pairs, got " + std::to_string(codes.source.size()));
  }
  if (p.parts.size() != expected_parts) {
    throw ContractError("pbgr_block: parameter set count differs from part count");
  }
  if (reasoned) *reasoned = PartCodes{};
  Tensor total;
  for (std::size_t i = 0; i < expected_parts; ++i) {
    auto [pa, pb] = bgr_block(tape, codes.source[i], codes.target[i], p.parts[i]);
    Tensor local = concat_channels({pa, pb});
    total = total.defined() ? total + local : local;
    if (reasoned) {
      reasoned->source.push_back(std::move(pa));
      reasoned->target.push_back(std::move(pb));
    }
  }
  return total;
}

PartIAParams PartIAParams::make(ParamInit& init, const std::string& name, std::size_t channels,
                                std::size_t part_channels, std::size_t kernel, bool use_norm,
                                bool share_across_parts, std::size_t num_parts) {
  const int pad = static_cast<int>(kernel / 2);
  auto build = [&](const std::string& prefix) {
    auto u = std::make_shared<PartUpdateParams>();
    u->hidden = ConvUnit::make(init, prefix + ".hidden", channels + 2 * part_channels, channels,
                               kernel, 1, pad, use_norm, Activation::relu);
    u->out = ConvLayer::make(init, prefix + ".out", channels, 2 * part_channels, kernel, 1, pad);
    return u;
  };
  PartIAParams p;
  if (share_across_parts) {
    p.parts.assign(num_parts, build(name + ".part"));
  } else {
    for (std::size_t i = 0; i < num_parts; ++i) p.parts.push_back(build(name + ".part" + std::to_string(i)));
  }
  return p;
}

void PartIAParams::collect(ParamList& out) const {
  for (const auto& u : parts) {
    u->hidden.collect(out);
    u->out.collect(out);
  }
}

PartIAOutput part_ia_block(Tape* tape, const Tensor& appearance, const Tensor& global_code,
                           const PartCodes& codes, const PartIAParams& p) {
  if (global_code.shape() != appearance.shape()) {
    throw ShapeError("part_ia_block: global code " + shape_str(global_code.shape()) +
                     " does not match appearance " + shape_str(appearance.shape()));
  }
  if (codes.size() != p.parts.size() || codes.target.size() != p.parts.size()) {
    throw ContractError("part_ia_block: part count differs from parameter count");
  }
  const Tensor attention = sigmoid(global_code);
  Tensor enhanced = attention * appearance + appearance;

  PartIAOutput out{enhanced, {}, attention};
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const std::size_t part_channels = codes.source[i].dim(0);
    const auto& u = *p.parts[i];
    const Tensor mixed =
        u.out.forward(tape, u.hidden.forward(tape, concat_channels({enhanced, codes.source[i], codes.target[i]})));
    auto split = split_channels(mixed, {part_channels, part_channels});
    out.codes.source.push_back(std::move(split[0]));
    out.codes.target.push_back(std::move(split[1]));
  }
  return out;
}

}  // namespace bgg
