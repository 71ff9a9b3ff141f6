#include "bgg/training.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "bgg/errors.hpp"
#include "bgg/image_io.hpp"

namespace bgg {
namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string shortest(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<Tensor> grads_for(const Gradients& g, const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(g.wrt(*p));
  return out;
}

// 8-bit round trip, then [0, 1].
Tensor quantized_unit(const Tensor& image) {
  return image_to_tensor(tensor_to_image(image, -1.0, 1.0), 0.0, 1.0, DType::f64);
}

}  // namespace

Example make_example(const CorpusEntry& entry, DType dtype) {
  Example ex;
  ex.name = entry.stem;
  ex.source = image_to_tensor(entry.image_a, -1.0, 1.0, dtype);
  ex.target = image_to_tensor(entry.image_b, -1.0, 1.0, dtype);
  ex.source_pose = heatmap_from_image(entry.heat_a, dtype);
  ex.target_pose = heatmap_from_image(entry.heat_b, dtype);
  ex.target_skeleton = entry.skel_b;
  return ex;
}

std::vector<Example> make_examples(const Corpus& corpus, Split split, DType dtype) {
  std::vector<Example> out;
  for (const auto* e : corpus.split(split)) out.push_back(make_example(*e, dtype));
  return out;
}

TrainState TrainState::create(const GeneratorConfig& config, const TrainOptions& options,
                              std::uint64_t seed, DType dtype) {
  if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
  TrainState s{
      GeneratorParams::make(config, stream_seed(seed, 1), dtype),
      Discriminators::make(config, stream_seed(seed, 2), dtype),
      PerceptualExtractor::make(PerceptualExtractor::kDefaultSeed, 64, dtype),
      options,
      {}, {}, {}, {}, 0, std::mt19937_64(stream_seed(seed, 3))};
  s.generator_params = s.generator.parameters();
  s.discriminator_params = s.discriminators.parameters();
  s.generator_opt = AdamState::create(s.generator_params, options.adam);
  s.discriminator_opt = AdamState::create(s.discriminator_params, options.adam);
  return s;
}

std::vector<std::size_t> TrainState::sample_batch(std::size_t n) {
  if (n == 0) throw ContractError("sample_batch: empty training set");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> out(options.batch_size);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::string StepRecord::header() { return "step\td_loss\tg_loss\tgan\tl1\tper"; }

std::string StepRecord::line() const {
  std::ostringstream out;
  out << step << '\t' << shortest(d_loss) << '\t' << shortest(g_loss) << '\t' << shortest(gan)
      << '\t' << shortest(l1) << '\t' << shortest(per);
  return out.str();
}

StepRecord train_step(TrainState& state, std::span<const Example* const> batch) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  StepRecord rec;
  rec.step = state.step;

  auto fail = [&](const std::string& what) {
    std::ostringstream msg;
    msg << "step " << state.step << ": " << what << " (d_loss=" << rec.d_loss
        << " gan=" << rec.gan << " l1=" << rec.l1 << " per=" << rec.per << ")";
    throw NumericError(msg.str());
  };

  // Generator forward, recorded once and reused for the generator update.
  Tape g_tape;
  std::vector<GeneratorOutput> fakes;
  fakes.reserve(batch.size());
  for (const Example* ex : batch) {
    fakes.push_back(generator_forward(&g_tape, ex->source, ex->source_pose, ex->target_pose,
                                      state.generator));
  }

  // Discriminator update on detached fakes.
  std::vector<Tensor> d_grads;
  {
    Tape d_tape;
    const auto& d = state.discriminators;
    Tensor d_total;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Example& ex = *batch[i];
      const Tensor fake = fakes[i].image.detach();
      Tensor term = bce_with_logits(discriminator_logits(&d_tape, concat_channels({ex.source, ex.target}), d.appearance), 1.0) +
                    bce_with_logits(discriminator_logits(&d_tape, concat_channels({ex.source, fake}), d.appearance), 0.0) +
                    bce_with_logits(discriminator_logits(&d_tape, concat_channels({ex.target_pose, ex.target}), d.shape), 1.0) +
                    bce_with_logits(discriminator_logits(&d_tape, concat_channels({ex.target_pose, fake}), d.shape), 0.0);
      d_total = d_total.defined() ? d_total + term : term;
    }
    d_total = scale(d_total, inv);
    rec.d_loss = d_total.item();
    if (!std::isfinite(rec.d_loss)) fail("non-finite discriminator loss");
    d_grads = grads_for(backward(d_total), state.discriminator_params);
  }

  adam_step(state.discriminator_params, d_grads, state.discriminator_opt);

  // Generator objective through the updated discriminators, whose parameters
  // enter as constants.
  Tensor g_total, gan, l1, per;
  try {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Example& ex = *batch[i];
      const Tensor& fake = fakes[i].image;
      const auto& d = state.discriminators;
      const Tensor app = discriminator_logits(nullptr, concat_channels({ex.source, fake}), d.appearance);
      const Tensor sha = discriminator_logits(nullptr, concat_channels({ex.target_pose, fake}), d.shape);
      GeneratorLoss loss = total_loss(fake, ex.target, app, sha, state.options.weights, state.extractor);
      auto acc = [](Tensor& into, const Tensor& v) { into = into.defined() ? into + v : v; };
      acc(g_total, loss.total);
      acc(gan, loss.gan);
      acc(l1, loss.l1);
      acc(per, loss.per);
    }
  } catch (const NumericError& e) {
    fail(e.what());
  }
  g_total = scale(g_total, inv);
  rec.g_loss = g_total.item();
  rec.gan = gan.item() * inv;
  rec.l1 = l1.item() * inv;
  rec.per = per.item() * inv;
  if (!std::isfinite(rec.g_loss)) fail("non-finite generator loss");

  const auto g_grads = grads_for(backward(g_total), state.generator_params);
  adam_step(state.generator_params, g_grads, state.generator_opt);
  ++state.step;
  return rec;
}

void train_until(TrainState& state, std::span<const Example> train, std::uint64_t until_step,
                 const std::function<void(const StepRecord&, const TrainState&)>& on_step) {
  std::vector<const Example*> batch;
  while (state.step < until_step) {
    batch.clear();
    for (std::size_t i : state.sample_batch(train.size())) batch.push_back(&train[i]);
    const StepRecord rec = train_step(state, batch);
    if (on_step) on_step(rec, state);
  }
}

GeneratorOutput infer(const GeneratorParams& params, const Example& ex) {
  return generator_forward(nullptr, ex.source, ex.source_pose, ex.target_pose, params);
}

MetricReport evaluate(const GeneratorParams& params, std::span<const Example> examples,
                      Baseline baseline) {
  MetricReport report;
  for (const Example& ex : examples) {
    Tensor candidate;
    switch (baseline) {
      case Baseline::model: candidate = infer(params, ex).image; break;
      case Baseline::ground_truth: candidate = ex.target; break;
      case Baseline::source: candidate = ex.source; break;
    }
    const Tensor out = quantized_unit(candidate);
    const Tensor target = quantized_unit(ex.target);
    const Tensor mask = pose_mask(ex.target_skeleton, target.dim(1), target.dim(2), 3.0, 2.0, DType::f64);
    report.add({ex.name, ssim(out, target), masked_ssim(out, target, mask), psnr(out, target)});
  }
  return report;
}

}  // namespace bgg
