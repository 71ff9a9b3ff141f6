#pragma once

// Subcommand implementations. Each returns a process exit code:
//   0 ok, 2 usage / invalid config, 3 I/O, 4 numeric failure,
//   5 checkpoint or corpus mismatch.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bgg::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kNumeric = 4, kMismatch = 5 };

struct GenerateArgs {
  std::string out;
  std::size_t pairs = 0;
  std::size_t test_pairs = 0;  // 0: pairs / 8
  std::uint64_t seed = 1;
  std::size_t height = 64;
  std::size_t width = 64;
  double radius = 4.0;
};

struct TrainArgs {
  std::string config;
  std::string resume;
  std::optional<std::uint64_t> steps;
  std::string out_dir;
  std::string dataset;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string out;
  std::string baseline = "model";  // model | gt | source
};

struct InferArgs {
  std::string checkpoint;
  std::string image;
  std::string skel_a;
  std::string skel_b;
  std::string out;
  double radius = 4.0;
};

struct AblateArgs {
  std::string config;
  std::vector<std::string> variants{"B1", "B2", "B3", "B4", "B5", "B6"};
  std::string out;
  bool quiet = false;
};

int cmd_generate_data(const GenerateArgs& args, std::ostream& out);
int cmd_train(const TrainArgs& args, std::ostream& out);
int cmd_eval(const EvalArgs& args, std::ostream& out);
int cmd_infer(const InferArgs& args, std::ostream& out);
int cmd_ablate(const AblateArgs& args, std::ostream& out);

/// Runs `fn`, mapping library exceptions to exit codes (message on `err`).
int guarded(std::ostream& err, const std::function<int()>& fn);

}  // namespace bgg::cli
