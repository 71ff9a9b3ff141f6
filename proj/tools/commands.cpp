#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "bgg/checkpoint.hpp"
#include "bgg/errors.hpp"
#include "bgg/image_io.hpp"
#include "bgg/run_config.hpp"
#include "bgg/training.hpp"

namespace fs = std::filesystem;

namespace bgg::cli {
namespace {

constexpr const char* kPerceptualNote =
    "perceptual term uses a fixed seeded random-feature extractor, not a pretrained backbone";

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

Image to_rgb(const Image& gray) {
  if (gray.channels == 3) return gray;
  Image out = Image::blank(gray.height, gray.width, 3);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i)
    for (int c = 0; c < 3; ++c) out.pixels[i * 3 + c] = gray.pixels[i];
  return out;
}

/// source | target pose | output | target
Image sample_grid(const GeneratorParams& params, const Example& ex) {
  const GeneratorOutput out = infer(params, ex);
  return hconcat({tensor_to_image(ex.source, -1, 1), to_rgb(render_pose(ex.target_pose)),
                  tensor_to_image(out.image, -1, 1), tensor_to_image(ex.target, -1, 1)});
}

void check_corpus(const Corpus& corpus, const GeneratorConfig& model) {
  if (corpus.info.height != model.height || corpus.info.width != model.width) {
    std::ostringstream msg;
    msg << "corpus images are " << corpus.info.height << "x" << corpus.info.width
        << " but the model expects " << model.height << "x" << model.width;
    throw MismatchError(msg.str());
  }
}

struct TrainResult {
  TrainState state;
  std::vector<StepRecord> log;
};

/// Shared by train and ablate: trains `cfg` on `corpus`, logging to out_dir.
TrainResult run_training(const RunConfig& cfg, const Corpus& corpus, const fs::path& out_dir,
                         const std::string& resume, bool quiet, std::ostream& out) {
  check_corpus(corpus, cfg.model);
  const auto train = make_examples(corpus, Split::train);
  if (train.empty()) throw MismatchError("corpus has no train pairs");
  auto test = make_examples(corpus, Split::test);

  std::optional<TrainState> loaded;
  if (!resume.empty()) {
    loaded.emplace(load_checkpoint(resume));
    if (!(loaded->config() == cfg.model) || !(loaded->options.weights == cfg.train.weights) ||
        loaded->options.batch_size != cfg.train.batch_size) {
      throw MismatchError("checkpoint " + resume + " was trained with a different configuration");
    }
  } else {
    loaded.emplace(TrainState::create(cfg.model, cfg.train, cfg.seed));
    if (!cfg.perceptual_weights.empty()) {
      loaded->extractor = load_perceptual_weights(cfg.perceptual_weights, default_dtype());
    }
  }
  TrainResult result{std::move(*loaded), {}};
  TrainState& state = result.state;

  ensure_dir(out_dir);
  write_text(out_dir / "run_config.json", run_config_to_json(cfg));
  const fs::path log_path = out_dir / "loss.tsv";
  const bool append = !resume.empty() && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());
  if (!append) log << StepRecord::header() << '\n';

  const Example& preview = test.empty() ? train.front() : test.front();
  const std::uint64_t report_every = std::max<std::uint64_t>(1, cfg.steps / 20);
  try {
    train_until(state, train, cfg.steps, [&](const StepRecord& rec, const TrainState& s) {
      log << rec.line() << '\n';
      log.flush();
      result.log.push_back(rec);
      if (!quiet && (s.step % report_every == 0 || s.step == cfg.steps)) {
        out << "step " << s.step << "/" << cfg.steps << "  d " << std::fixed << std::setprecision(4)
            << rec.d_loss << "  g " << rec.g_loss << "  l1 " << rec.l1 << std::defaultfloat << '\n';
      }
      if (cfg.checkpoint_every && s.step % cfg.checkpoint_every == 0) {
        save_checkpoint(out_dir / ("checkpoint_step" + std::to_string(s.step) + ".bgg"), s);
      }
      if (cfg.sample_every && s.step % cfg.sample_every == 0) {
        ensure_dir(out_dir / "samples");
        write_ppm(out_dir / "samples" / ("step" + std::to_string(s.step) + ".ppm"),
                  sample_grid(s.generator, preview));
      }
      if (cfg.eval_every && s.step % cfg.eval_every == 0 && !test.empty()) {
        const auto report = evaluate(s.generator, test);
        std::ofstream ev(out_dir / "eval.tsv", std::ios::app);
        ev << s.step << '\t' << report.mean_ssim() << '\t' << report.mean_mask_ssim() << '\t'
           << report.mean_psnr() << '\n';
      }
    });
  } catch (const NumericError& e) {
    write_text(out_dir / "failure.txt", std::string(e.what()) + "\n");
    throw;
  }
  save_checkpoint(out_dir / "checkpoint.bgg", state);
  write_ppm(out_dir / "sample_final.ppm", sample_grid(state.generator, preview));
  return result;
}

Baseline parse_baseline(const std::string& name) {
  if (name == "model") return Baseline::model;
  if (name == "gt") return Baseline::ground_truth;
  if (name == "source") return Baseline::source;
  throw ConfigError("--baseline must be model, gt or source");
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ConfigError("--split must be train or test");
}

}  // namespace

int guarded(std::ostream& err, const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const MismatchError& e) {
    err << "error: " << e.what() << '\n';
    return kMismatch;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

int cmd_generate_data(const GenerateArgs& a, std::ostream& out) {
  CorpusInfo info;
  info.height = a.height;
  info.width = a.width;
  info.seed = a.seed;
  info.pairs = a.pairs;
  info.test_pairs = a.test_pairs ? a.test_pairs : a.pairs / 8;
  info.heatmap_radius = a.radius;
  if (info.height < 16 || info.width < 16) throw ConfigError("image size must be at least 16");
  make_dataset(info, a.out);
  out << "wrote " << info.pairs << " pairs (" << info.pairs - info.test_pairs << " train, "
      << info.test_pairs << " test) of " << info.height << "x" << info.width << " to " << a.out
      << " (seed " << info.seed << ")\n";
  return kOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = load_run_config(a.config);
  if (a.steps) cfg.steps = *a.steps;
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  cfg.validate();
  if (cfg.dataset.empty()) throw ConfigError("no dataset given (config key 'dataset' or --data)");
  const Corpus corpus = load_corpus(cfg.dataset);
  const auto result = run_training(cfg, corpus, cfg.out_dir, a.resume, a.quiet, out);
  out << "trained " << variant_name(cfg.model.variant) << " to step " << result.state.step
      << "; generator parameters " << count_scalars(result.state.generator_params)
      << "; checkpoint " << (fs::path(cfg.out_dir) / "checkpoint.bgg").string() << '\n';
  return kOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Baseline baseline = parse_baseline(a.baseline);
  const Split split = parse_split(a.split);
  const Corpus corpus = load_corpus(a.data);
  std::optional<TrainState> state;
  DType dtype = default_dtype();
  if (baseline == Baseline::model) {
    if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required unless --baseline is gt or source");
    state.emplace(load_checkpoint(a.checkpoint));
    check_corpus(corpus, state->config());
    dtype = state->generator_params.front()->value.dtype();
  }
  const auto examples = make_examples(corpus, split, dtype);
  const GeneratorParams* params = state ? &state->generator : nullptr;
  MetricReport report;
  if (params) {
    report = evaluate(*params, examples, baseline);
  } else {
    report = evaluate(GeneratorParams{}, examples, baseline);
  }
  std::string note = std::string("split ") + a.split + "; baseline " + a.baseline;
  if (state) note += std::string("; variant ") + std::string(variant_name(state->config().variant)) + "; " + kPerceptualNote;
  if (!a.out.empty()) report.write(a.out, note);
  out << "# " << note << '\n' << report.summary_text();
  return kOk;
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const TrainState state = load_checkpoint(a.checkpoint);
  const auto& cfg = state.config();
  const DType dtype = state.generator_params.front()->value.dtype();
  const Image source = read_ppm(a.image);
  const Skeleton skel_a = read_skeleton(a.skel_a);
  const Skeleton skel_b = read_skeleton(a.skel_b);
  if (source.height != cfg.height || source.width != cfg.width) {
    throw MismatchError("input image does not match the model size");
  }
  Example ex;
  ex.name = "infer";
  ex.source = image_to_tensor(source, -1, 1, dtype);
  ex.source_pose = joints_to_heatmap(skel_a, cfg.height, cfg.width, a.radius, dtype);
  ex.target_pose = joints_to_heatmap(skel_b, cfg.height, cfg.width, a.radius, dtype);
  const GeneratorOutput result = infer(state.generator, ex);

  const fs::path dir = a.out;
  ensure_dir(dir);
  write_ppm(dir / "output.ppm", tensor_to_image(result.image, -1, 1));
  write_ppm(dir / "intermediate.ppm", tensor_to_image(result.intermediate, -1, 1));
  if (result.attention) {
    write_ppm(dir / "attention.ppm", to_rgb(tensor_to_image(*result.attention, 0, 1)));
    out << "wrote output.ppm, intermediate.ppm, attention.ppm to " << dir.string() << '\n';
  } else {
    out << "wrote output.ppm, intermediate.ppm to " << dir.string() << "\nnote: variant "
        << variant_name(cfg.variant) << " has no attention decoder; attention.ppm not written\n";
  }
  return kOk;
}

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  RunConfig base = load_run_config(a.config);
  if (base.dataset.empty()) throw ConfigError("config has no dataset");
  std::vector<Variant> variants;
  for (const auto& name : a.variants) {
    const auto v = parse_variant(name);
    if (!v) throw ConfigError("unknown variant '" + name + "'");
    variants.push_back(*v);
  }
  const Corpus corpus = load_corpus(base.dataset);
  const fs::path root = a.out.empty() ? fs::path(base.out_dir) / "ablation" : fs::path(a.out);
  ensure_dir(root);

  const auto test = make_examples(corpus, Split::test);
  if (test.empty()) throw MismatchError("corpus has no test pairs");
  std::ostringstream table;
  table << "variant\tparams\tssim\tmask_ssim\tpsnr\n";
  const auto copy = evaluate(GeneratorParams{}, test, Baseline::source);
  table << "copy-source\t0\t" << copy.mean_ssim() << '\t' << copy.mean_mask_ssim() << '\t'
        << copy.mean_psnr() << '\n';
  for (Variant v : variants) {
    RunConfig cfg = base;
    cfg.model.variant = v;
    const std::string name(variant_name(v));
    out << "== " << name << '\n';
    const auto result = run_training(cfg, corpus, root / name, "", a.quiet, out);
    const auto report = evaluate(result.state.generator, test);
    report.write(root / name, "variant " + name + "; " + kPerceptualNote);
    table << name << '\t' << count_scalars(result.state.generator_params) << '\t'
          << report.mean_ssim() << '\t' << report.mean_mask_ssim() << '\t' << report.mean_psnr()
          << '\n';
  }
  write_text(root / "ablation.tsv", table.str());
  out << table.str();
  return kOk;
}

}  // namespace bgg::cli
