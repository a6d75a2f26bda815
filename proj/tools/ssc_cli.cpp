#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ssc/attribution.hpp"
#include "ssc/checkpoint.hpp"
#include "ssc/datasets.hpp"
#include "ssc/error.hpp"
#include "ssc/experiment.hpp"
#include "ssc/random.hpp"
#include "ssc/randomizer.hpp"
#include "ssc/report.hpp"
#include "ssc/trainer.hpp"

namespace fs = std::filesystem;
using namespace ssc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::AxisOutOfRange: return kExitConfig;
    case ErrorCode::NonFinite: return kExitNumeric;
    default: return kExitData;
  }
}

struct DataFlags {
  std::string dataset = "synthetic";
  std::string data_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--dataset", dataset, "mnist or synthetic")
        ->check(CLI::IsMember({"mnist", "synthetic"}))
        ->capture_default_str();
    cmd->add_option("--data-dir", data_dir,
                    "Directory holding the MNIST IDX files (default: $SSC_DATA_DIR, else data/mnist)");
  }

  DataOptions resolve() const {
    DataOptions opts;
    opts.source = parse_data_source(dataset);
    if (!data_dir.empty()) {
      opts.mnist_dir = data_dir;
    } else if (const char* env = std::getenv("SSC_DATA_DIR"); env && *env) {
      opts.mnist_dir = env;
    }
    return opts;
  }
};

struct AttributionFlags {
  std::size_t steps = 50;
  std::size_t samples = 25;
  double sigma = 0.15;
  std::string noise_base = "gradient";
  std::string score = "logit";

  void attach(CLI::App* cmd) {
    cmd->add_option("--steps", steps, "Integrated gradients path steps")->capture_default_str();
    cmd->add_option("--samples", samples, "SmoothGrad/VarGrad noise samples")->capture_default_str();
    cmd->add_option("--sigma", sigma, "Noise std as a fraction of the input range")
        ->capture_default_str();
    cmd->add_option("--noise-base", noise_base, "Method wrapped by SmoothGrad/VarGrad")
        ->capture_default_str();
    cmd->add_option("--score", score, "Differentiate the logit or the softmax probability")
        ->check(CLI::IsMember({"logit", "softmax"}))
        ->capture_default_str();
  }

  AttributionOptions resolve(std::uint64_t noise_seed) const {
    AttributionOptions opts;
    opts.ig.steps = steps;
    opts.noise = {samples, sigma, noise_seed};
    opts.noise_base = parse_method(noise_base);
    opts.score = score == "logit" ? ScoreKind::Logit : ScoreKind::Softmax;
    return opts;
  }
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void check_input_shape(const Network& net, const Dataset& ds) {
  if (ds.image_shape() != net.input_shape()) {
    throw Error(ErrorCode::ShapeMismatch, "dataset images " + shape_to_string(ds.image_shape()) +
                                              " do not match checkpoint input " +
                                              shape_to_string(net.input_shape()));
  }
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string model = "cnn";
  DataFlags data;
  std::string out;
  TrainConfig train;
  std::optional<std::uint64_t> init_seed;
  std::string init = "uniform_fan";
  std::size_t workers = 0;
};

int run_train(const TrainArgs& a) {
  const DataOptions data = a.data.resolve();
  const Dataset train_set = load_dataset(data, Split::Train);
  const Dataset test_set = load_dataset(data, Split::Test);
  const Shape input = train_set.image_shape();
  const NetworkSpec spec = a.model == "mlp" ? mlp_spec(input, train_set.num_classes)
                                            : cnn_spec(input, train_set.num_classes);
  const InitScheme scheme{parse_init_kind(a.init), a.init_seed.value_or(a.train.seed)};
  const Network init = initialize(spec, scheme);

  const TrainResult result = train(init, train_set, a.train, [](std::size_t epoch, const EpochStats& s) {
    std::cout << "epoch " << epoch + 1 << " loss " << s.loss << " train_acc " << s.accuracy << '\n'
              << std::flush;
  });
  const double accuracy = evaluate_accuracy(result.network, test_set, a.workers);
  std::cout << "test_acc " << accuracy << '\n';

  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(result.network, out);

  nlohmann::json meta{{"model", a.model},
                      {"dataset", to_string(data.source)},
                      {"init", {{"kind", to_string(scheme.kind)}, {"seed", scheme.seed}}},
                      {"train",
                       {{"epochs", a.train.epochs},
                        {"batch_size", a.train.batch_size},
                        {"learning_rate", a.train.learning_rate},
                        {"momentum", a.train.momentum},
                        {"seed", a.train.seed}}},
                      {"test_accuracy", accuracy},
                      {"parameters", result.network.parameter_count()}};
  for (const auto& h : result.history) meta["history"].push_back({{"loss", h.loss}, {"accuracy", h.accuracy}});
  write_json(fs::path(out.string() + ".json"), meta);
  return kExitOk;
}

// ---- explain -------------------------------------------------------------

struct ExplainArgs {
  std::string ckpt;
  std::size_t image = 0;
  std::string method;
  std::optional<std::size_t> class_index;
  std::uint64_t noise_seed = 3;
  DataFlags data;
  AttributionFlags attribution;
  std::string out;
};

int run_explain(const ExplainArgs& a) {
  const Method method = parse_method(a.method);
  const Network net = load_checkpoint(a.ckpt);
  const Dataset test = load_dataset(a.data.resolve(), Split::Test);
  check_input_shape(net, test);
  if (a.image >= test.size()) {
    throw Error(ErrorCode::InvalidArgument, "image id " + std::to_string(a.image) +
                                                " out of range for " + std::to_string(test.size()) +
                                                " test images");
  }
  const Tensor x = test.image(a.image);
  const std::size_t target = a.class_index.value_or(predict_class(net, x));
  // Same per-image noise stream as the sanity run.
  const AttributionOptions opts =
      a.attribution.resolve(mix_seed(a.noise_seed, static_cast<std::uint64_t>(a.image)));
  ExplanationMap map = explain(method, net, x, target, opts);
  map.metadata["image_id"] = a.image;
  map.metadata["label"] = test.labels[a.image];
  const std::string stem = std::string(to_string(method)) + "_img" + std::to_string(a.image);
  save_explanation(map, a.out, stem);
  std::cout << (fs::path(a.out) / (stem + ".json")).string() << '\n';
  return kExitOk;
}

// ---- sanity --------------------------------------------------------------

struct SanityArgs {
  std::string ckpt;
  std::string mode = "both";
  std::vector<std::string> methods;
  std::string preprocessing = "both";
  std::size_t testbed = 200;
  std::uint64_t seed_randomize = 2;
  std::uint64_t seed_noise = 3;
  std::uint64_t seed_testbed = 4;
  std::string init = "uniform_fan";
  std::size_t workers = 0;
  bool skip_accuracy = false;
  bool save_variants = false;
  DataFlags data;
  AttributionFlags attribution;
  std::string out;
};

int run_sanity(const SanityArgs& a) {
  const Network net = load_checkpoint(a.ckpt);
  const Dataset test = load_dataset(a.data.resolve(), Split::Test);
  check_input_shape(net, test);

  ExperimentConfig cfg;
  cfg.model_name = fs::path(a.ckpt).stem().string();
  if (!a.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : a.methods) cfg.methods.push_back(parse_method(m));
  }
  if (a.mode != "both") cfg.modes = {parse_randomization_mode(a.mode)};
  if (a.preprocessing != "both") cfg.preprocessings = {parse_preprocessing(a.preprocessing)};
  cfg.testbed_size = a.testbed;
  cfg.randomize_seed = a.seed_randomize;
  cfg.noise_seed = a.seed_noise;
  cfg.testbed_seed = a.seed_testbed;
  cfg.attribution = a.attribution.resolve(0);
  cfg.init_kind = parse_init_kind(a.init);
  cfg.workers = a.workers;
  cfg.record_accuracy = !a.skip_accuracy;
  cfg.validate(net);

  const fs::path out(a.out);
  fs::create_directories(out);
  fs::remove(out / "error.json");

  if (a.save_variants) {
    const fs::path dir = out / "variants";
    fs::create_directories(dir);
    for (auto mode : cfg.modes) {
      for (const auto& v : variants(net, make_plan(net, mode, cfg.randomize_seed), {cfg.init_kind, 0})) {
        save_checkpoint(v.network, dir / variant_checkpoint_name(cfg.model_name, v));
      }
    }
  }

  const ReportBundle bundle = run_experiment(cfg, net, test);
  emit_report(bundle, out);

  for (const auto& s : bundle.summary.summaries) {
    if (s.preprocessing != Preprocessing::Absolute) continue;
    std::cout << s.mode << ' ' << s.stage_index << ' ' << s.stage_label << ' ' << s.method
              << " mean_rho " << s.mean_rho << " std " << s.std_rho << '\n';
  }
  for (const auto& acc : bundle.accuracies) {
    std::cout << "accuracy " << acc.mode << ' ' << acc.stage_index << ' ' << acc.stage_label << ' '
              << acc.accuracy << '\n';
  }
  if (bundle.summary.degenerate_count > 0) {
    std::cout << "degenerate correlations excluded: " << bundle.summary.degenerate_count << '\n';
  }
  std::cout << "wall_seconds " << bundle.wall_seconds << '\n';

  if (bundle.error) {
    write_json(out / "error.json", {{"error", *bundle.error},
                                    {"code", to_string(*bundle.error_code)},
                                    {"records_written", bundle.records.size()}});
    std::cerr << "error: " << *bundle.error << " (partial results in " << out.string() << ")\n";
    return exit_code_for(*bundle.error_code);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sanity checks for saliency maps: train, explain, randomize, and report"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--model", train_args.model, "mlp or cnn")
      ->check(CLI::IsMember({"mlp", "cnn"}))
      ->capture_default_str();
  train_args.data.attach(train_cmd);
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->required();
  train_cmd->add_option("--epochs", train_args.train.epochs)->capture_default_str();
  train_cmd->add_option("--batch", train_args.train.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train_args.train.learning_rate)->capture_default_str();
  train_cmd->add_option("--momentum", train_args.train.momentum)->capture_default_str();
  train_cmd->add_option("--seed-train", train_args.train.seed, "Shuffle seed")->capture_default_str();
  train_cmd->add_option("--seed-init", train_args.init_seed, "Initialization seed (default: --seed-train)");
  train_cmd->add_option("--init", train_args.init, "uniform_fan or normal_truncated")->capture_default_str();
  train_cmd->add_option("--workers", train_args.workers, "Evaluation threads (0 = all cores)");

  ExplainArgs explain_args;
  auto* explain_cmd = app.add_subcommand("explain", "Explain one test image");
  explain_cmd->add_option("--ckpt", explain_args.ckpt, "Checkpoint path")->required();
  explain_cmd->add_option("--image", explain_args.image, "Test-set image index")->required();
  explain_cmd->add_option("--method", explain_args.method, "Attribution method")->required();
  explain_cmd->add_option("--class", explain_args.class_index, "Target class (default: predicted)");
  explain_cmd->add_option("--seed-noise", explain_args.noise_seed)->capture_default_str();
  explain_args.data.attach(explain_cmd);
  explain_args.attribution.attach(explain_cmd);
  explain_cmd->add_option("--out", explain_args.out, "Output directory")->required();

  SanityArgs sanity_args;
  auto* sanity_cmd = app.add_subcommand("sanity", "Run the parameter randomization test");
  sanity_cmd->add_option("--ckpt", sanity_args.ckpt, "Checkpoint path")->required();
  sanity_cmd->add_option("--mode", sanity_args.mode, "cascading, independent or both")
      ->check(CLI::IsMember({"cascading", "independent", "both"}))
      ->capture_default_str();
  sanity_cmd->add_option("--methods", sanity_args.methods, "Comma-separated methods (default: all)")
      ->delimiter(',');
  sanity_cmd->add_option("--preprocessing", sanity_args.preprocessing, "absolute, signed or both")
      ->check(CLI::IsMember({"absolute", "signed", "both"}))
      ->capture_default_str();
  sanity_cmd->add_option("--testbed", sanity_args.testbed, "Number of test images")->capture_default_str();
  sanity_cmd->add_option("--seed-randomize", sanity_args.seed_randomize)->capture_default_str();
  sanity_cmd->add_option("--seed-noise", sanity_args.seed_noise)->capture_default_str();
  sanity_cmd->add_option("--seed-testbed", sanity_args.seed_testbed)->capture_default_str();
  sanity_cmd->add_option("--init", sanity_args.init, "Re-initialization distribution")->capture_default_str();
  sanity_cmd->add_option("--workers", sanity_args.workers, "Threads (0 = all cores)");
  sanity_cmd->add_flag("--skip-accuracy", sanity_args.skip_accuracy, "Do not evaluate variant accuracy");
  sanity_cmd->add_flag("--save-variants", sanity_args.save_variants, "Write every variant checkpoint");
  sanity_args.data.attach(sanity_cmd);
  sanity_args.attribution.attach(sanity_cmd);
  sanity_cmd->add_option("--out", sanity_args.out, "Output directory")->required();

  std::string report_in;
  auto* report_cmd = app.add_subcommand("report", "Regenerate summary and plots from records.csv");
  report_cmd->add_option("--in", report_in, "Directory containing records.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) return run_train(train_args);
    if (*explain_cmd) return run_explain(explain_args);
    if (*sanity_cmd) return run_sanity(sanity_args);
    if (*report_cmd) {
      for (const auto& p : regenerate_report(report_in)) std::cout << p.string() << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
