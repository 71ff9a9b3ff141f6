// bgg: dataset generation, training, evaluation, inference and ablations.
//
// Exit codes: 0 ok, 2 usage / invalid config, 3 I/O, 4 numeric failure,
// 5 checkpoint or corpus mismatch. BGG_DETERMINISTIC=1 selects 64-bit mode.

#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "bgg/tensor.hpp"
#include "commands.hpp"

using namespace bgg::cli;

int main(int argc, char** argv) {
  bgg::configure_dtype_from_env();

  CLI::App app{"BiGraphGAN pose-transfer toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Render a synthetic pose-transfer corpus");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--pairs", gen.pairs, "Number of pairs")->required()->check(CLI::Range(1, 1000000));
  g->add_option("--test-pairs", gen.test_pairs, "Pairs tagged test (default pairs/8)");
  g->add_option("--seed", gen.seed, "Corpus seed");
  std::optional<std::size_t> size;
  g->add_option("--size", size, "Square image size (sets height and width)");
  g->add_option("--height", gen.height, "Image height");
  g->add_option("--width", gen.width, "Image width");
  g->add_option("--radius", gen.radius, "Heatmap disk radius (pixels)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a generator from a JSON run config");
  t->add_option("--config", train.config, "Run config (JSON)")->required();
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_option("--steps", train.steps, "Override total steps");
  t->add_option("--out", train.out_dir, "Override output directory");
  t->add_option("--data", train.dataset, "Override corpus directory");
  t->add_flag("--quiet", train.quiet, "No progress lines");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score a checkpoint (or a baseline) on a corpus split");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint file");
  e->add_option("--data", eval.data, "Corpus directory")->required();
  e->add_option("--split", eval.split, "train | test");
  e->add_option("--out", eval.out, "Directory for metrics.txt / per_image.tsv / metrics.json");
  e->add_option("--baseline", eval.baseline, "model | gt | source");

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Transfer one source image to a target pose");
  i->add_option("--checkpoint", inf.checkpoint, "Checkpoint file")->required();
  i->add_option("--image", inf.image, "Source image (P6)")->required();
  i->add_option("--skel-a", inf.skel_a, "Source skeleton")->required();
  i->add_option("--skel-b", inf.skel_b, "Target skeleton")->required();
  i->add_option("--out", inf.out, "Output directory")->required();
  i->add_option("--radius", inf.radius, "Heatmap disk radius (pixels)");

  AblateArgs abl;
  auto* a = app.add_subcommand("ablate", "Train and score each variant with one config");
  a->add_option("--config", abl.config, "Run config (JSON)")->required();
  a->add_option("--variants", abl.variants, "Variants to run")->delimiter(',');
  a->add_option("--out", abl.out, "Output directory");
  a->add_flag("--quiet", abl.quiet, "No progress lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }
  if (size) gen.height = gen.width = *size;

  return guarded(std::cerr, [&] {
    if (*g) return cmd_generate_data(gen, std::cout);
    if (*t) return cmd_train(train, std::cout);
    if (*e) return cmd_eval(eval, std::cout);
    if (*i) return cmd_infer(inf, std::cout);
    return cmd_ablate(abl, std::cout);
  });
}
