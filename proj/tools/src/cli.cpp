#include "sparseprop_cli/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "sparseprop/bench.hpp"
#include "sparseprop/dataset.hpp"
#include "sparseprop/training.hpp"

namespace sparseprop::cli {

namespace {

// Thrown for invalid values found after parsing; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kMethods{"eprop-sparse", "eprop-naive", "rtrl", "bptt"};
const std::vector<std::string> kNeurons{"lif", "alif"};
const std::vector<std::string> kPrecisions{"f32", "f64"};

struct ModelFlags {
  std::string neuron = "lif";
  bool soft_reset = false;
  std::size_t hidden = 0;
  std::string precision = "f64";
  std::uint64_t seed = 0;

  NeuronParams params() const {
    LIFParams lif;
    lif.soft_reset = soft_reset;
    if (parse_neuron(neuron) == NeuronKind::alif) {
      ALIFParams a;
      a.lif = lif;
      return NeuronParams::make_alif(a);
    }
    return NeuronParams::make_lif(lif);
  }
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--neuron", f.neuron, "Hidden neuron model")->check(CLI::IsMember(kNeurons))->capture_default_str();
  app->add_flag("--soft-reset", f.soft_reset, "Subtract theta from u after a spike");
  app->add_option("--hidden", f.hidden, "Hidden neurons")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--precision", f.precision, "Floating-point precision")
      ->check(CLI::IsMember(kPrecisions))
      ->capture_default_str();
  app->add_option("--seed", f.seed, "Seed for all randomness")->capture_default_str();
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": expected positive integers, got '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

std::vector<Method> parse_method_list(const std::string& text) {
  if (text == "all") return {Method::eprop_sparse, Method::eprop_naive, Method::rtrl, Method::bptt};
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_method(item));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--method: ") + e.what());
    }
  }
  if (out.empty()) throw UsageError("--method: empty list");
  return out;
}

// Writes to the file named by `path`, or to `fallback` when path is empty.
class OutputSink {
 public:
  OutputSink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw std::runtime_error("cannot write " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw std::runtime_error("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

// --- gradcheck ------------------------------------------------------------------

struct GradcheckFlags {
  ModelFlags model;
  std::string method = "eprop-sparse";
  std::size_t steps = 50;
  std::size_t inputs = 140;
  std::size_t classes = 3;
  std::string out;
};

template <typename T>
DeviationStats gradcheck_run(const GradcheckFlags& f, const NetworkSpec& spec) {
  const auto net = init_network<T>(spec);
  const auto ds = generate_poisson_dataset(1, f.inputs, f.steps, f.classes, f.model.seed);
  const auto g = compute_gradient(parse_method(f.method), net, to_sample<T>(ds, 0));

  // Reference: BPTT in double precision on the same (rounded) weights.
  Network<double> ref_net;
  ref_net.neuron = net.neuron;
  ref_net.n_hidden = net.n_hidden;
  ref_net.n_inputs = net.n_inputs;
  ref_net.n_classes = net.n_classes;
  ref_net.kappa = net.kappa;
  ref_net.w.assign(net.w.begin(), net.w.end());
  ref_net.w_out.assign(net.w_out.begin(), net.w_out.end());
  const auto ref = bptt_gradient(ref_net, to_sample<double>(ds, 0));

  const auto a = g.flat();
  const std::vector<double> got(a.begin(), a.end());
  const auto b = ref.flat();
  return gradient_deviation_stats(std::span<const double>(got), std::span<const double>(b));
}

void run_gradcheck(const GradcheckFlags& f, std::ostream& out) {
  NetworkSpec spec;
  spec.neuron = f.model.params();
  spec.n_hidden = f.model.hidden;
  spec.n_inputs = f.inputs;
  spec.n_classes = f.classes;
  spec.precision = parse_precision(f.model.precision);
  spec.seed = f.model.seed;
  const auto stats = spec.precision == Precision::f32 ? gradcheck_run<float>(f, spec) : gradcheck_run<double>(f, spec);

  OutputSink sink(f.out, out);
  auto& os = sink.get();
  os << "model,precision,n,T,seed,median,q2.5,q97.5\n";
  os.precision(6);
  os << std::scientific << f.model.neuron << ',' << f.model.precision << ',' << f.model.hidden << ',' << f.steps << ','
     << f.model.seed << ',' << stats.median << ',' << stats.q_low << ',' << stats.q_high << '\n';
  sink.finish();
}

// --- bench ----------------------------------------------------------------------

struct BenchFlags {
  ModelFlags model;
  std::string methods = "eprop-sparse";
  std::string hidden = "16,32,64,128,256";
  std::string steps = "10,100,500,1000,2000";
  std::size_t repeats = 3;
  std::size_t warmup = 10;
  std::size_t inputs = 140;
  bool memory_only = false;
  std::size_t max_dense = std::size_t{1} << 27;
  std::string out;
};

void run_bench(const BenchFlags& f, std::ostream& out) {
  BenchConfig cfg;
  cfg.methods = parse_method_list(f.methods);
  cfg.n_hidden = parse_size_list(f.hidden, "--hidden");
  cfg.timesteps = parse_size_list(f.steps, "--steps");
  cfg.repeats = f.repeats;
  cfg.warmup = f.warmup;
  cfg.precision = parse_precision(f.model.precision);
  cfg.neuron = f.model.params();
  cfg.n_inputs = f.inputs;
  cfg.seed = f.model.seed;
  cfg.max_dense_elements = f.max_dense;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  OutputSink sink(f.out, out);
  const auto records = f.memory_only ? bench_memory(cfg) : bench_time(cfg);
  write_bench_csv(records, sink.get());
  sink.finish();
}

// --- train ----------------------------------------------------------------------

struct TrainFlags {
  ModelFlags model;
  std::string method = "eprop-sparse";
  std::string data;
  std::size_t pool = 1;
  std::size_t samples = 60;
  std::size_t channels = 140;
  std::size_t steps = 100;
  std::size_t classes = 3;
  std::size_t epochs = 1;
  std::size_t batch = 1;
  std::size_t max_updates = 0;
  // The loss sees readouts summed over every step, so gradients scale with T.
  double lr = 1e-5;
  std::string optimizer = "sgd";
  std::string out;
};

void run_train(const TrainFlags& f, std::ostream& out) {
  SpikeDataset ds = f.data.empty() ? generate_poisson_dataset(f.samples, f.channels, f.steps, f.classes, f.model.seed)
                                   : load_spike_dataset(f.data);
  if (f.pool != 1) ds = pool_channels(ds, f.pool);

  NetworkSpec spec;
  spec.neuron = f.model.params();
  spec.n_hidden = f.model.hidden;
  spec.n_inputs = ds.n_channels;
  spec.n_classes = std::max<std::size_t>(ds.n_classes(), f.data.empty() ? f.classes : 1);
  spec.precision = parse_precision(f.model.precision);
  spec.seed = f.model.seed;

  TrainConfig cfg;
  cfg.method = parse_method(f.method);
  cfg.optimizer.kind = parse_optimizer(f.optimizer);
  cfg.optimizer.lr = f.lr;
  cfg.epochs = f.epochs;
  cfg.batch = f.batch;
  cfg.max_updates = f.max_updates;
  cfg.seed = f.model.seed;

  const auto log = train_dataset(spec, ds, cfg);
  OutputSink sink(f.out, out);
  write_metrics_csv(log, sink.get());
  sink.finish();
}

// --- gen-data -------------------------------------------------------------------

struct GenFlags {
  std::size_t samples = 60;
  std::size_t channels = 140;
  std::size_t steps = 100;
  std::size_t classes = 3;
  std::uint64_t seed = 0;
  std::string out;
};

void run_gen(const GenFlags& f, std::ostream& out) {
  const auto ds = generate_poisson_dataset(f.samples, f.channels, f.steps, f.classes, f.seed);
  OutputSink sink(f.out, out);
  write_spike_dataset(ds, sink.get());
  sink.finish();
}

// Appends config-file arguments after the user's so that, with every option
// taking its last value, the file overrides flags.
std::vector<std::string> with_config(const std::vector<std::string>& args) {
  std::vector<std::string> out = args;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
    if (path.empty()) continue;
    const auto extra = config_arguments(path);
    out.insert(out.end(), extra.begin(), extra.end());
  }
  return out;
}

}  // namespace

std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(0, 1);
    if (key == "config") throw UsageError(path + ":" + std::to_string(line_no) + ": nested config files");
    out.push_back("--" + key);
    out.push_back(trim(line.substr(eq + 1)));
  }
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse forward-mode gradients for spiking networks", "sparseprop"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_path;

  GradcheckFlags gc;
  gc.model.hidden = 32;
  auto* gradcheck = app.add_subcommand("gradcheck", "Gradient deviation from double-precision BPTT, as CSV");
  add_model_flags(gradcheck, gc.model);
  gradcheck->add_option("--method", gc.method, "Engine under test")->check(CLI::IsMember(kMethods))->capture_default_str();
  gradcheck->add_option("--steps", gc.steps, "Time steps")->check(CLI::PositiveNumber)->capture_default_str();
  gradcheck->add_option("--inputs", gc.inputs, "Input channels")->check(CLI::PositiveNumber)->capture_default_str();
  gradcheck->add_option("--classes", gc.classes, "Readout classes")->check(CLI::PositiveNumber)->capture_default_str();
  gradcheck->add_option("--out", gc.out, "Output CSV (stdout if omitted)");
  gradcheck->add_option("--config", config_path, "key=value file overriding flags");

  BenchFlags bf;
  bf.model.hidden = 128;
  bf.model.precision = "f32";
  auto* bench = app.add_subcommand("bench", "Time per step and peak arena bytes, as CSV");
  add_model_flags(bench, bf.model);
  bench->remove_option(bench->get_option("--hidden"));
  bench->add_option("--method", bf.methods, "Comma-separated engines or 'all'")->capture_default_str();
  bench->add_option("--hidden", bf.hidden, "Comma-separated hidden sizes")->capture_default_str();
  bench->add_option("--steps", bf.steps, "Comma-separated sequence lengths")->capture_default_str();
  bench->add_option("--repeats", bf.repeats, "Timed runs per cell (>= 3)")->capture_default_str();
  bench->add_option("--warmup", bf.warmup, "Untimed warm-up steps (>= 1)")->capture_default_str();
  bench->add_option("--inputs", bf.inputs, "Input channels")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--max-dense", bf.max_dense, "Element cap for dense traces")->capture_default_str();
  bench->add_flag("--memory", bf.memory_only, "One run per cell; report arena peak only");
  bench->add_option("--out", bf.out, "Output CSV (stdout if omitted)");
  bench->add_option("--config", config_path, "key=value file overriding flags");

  TrainFlags tf;
  tf.model.hidden = 64;
  auto* train_cmd = app.add_subcommand("train", "Train on a SPIKES v1 file or synthetic data; metrics CSV");
  add_model_flags(train_cmd, tf.model);
  train_cmd->add_option("--method", tf.method, "Gradient engine")->check(CLI::IsMember(kMethods))->capture_default_str();
  train_cmd->add_option("--data", tf.data, "SPIKES v1 dataset (synthetic if omitted)");
  train_cmd->add_option("--pool", tf.pool, "Channel pooling factor")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--samples", tf.samples, "Synthetic samples")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--channels", tf.channels, "Synthetic channels")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--steps", tf.steps, "Synthetic time steps")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--classes", tf.classes, "Synthetic classes")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--epochs", tf.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--batch", tf.batch, "Samples per update")->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--max-updates", tf.max_updates, "Stop after this many updates (0: no limit)")
      ->capture_default_str();
  train_cmd->add_option("--lr", tf.lr, "Learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  train_cmd->add_option("--optimizer", tf.optimizer, "sgd or adam")
      ->check(CLI::IsMember({"sgd", "adam"}))
      ->capture_default_str();
  train_cmd->add_option("--out", tf.out, "Metrics CSV (stdout if omitted)");
  train_cmd->add_option("--config", config_path, "key=value file overriding flags");

  GenFlags gf;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic Poisson dataset in SPIKES v1 format");
  gen->add_option("--samples", gf.samples, "Samples")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--channels", gf.channels, "Channels")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--steps", gf.steps, "Time steps")->capture_default_str();
  gen->add_option("--classes", gf.classes, "Classes")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--seed", gf.seed, "Seed")->capture_default_str();
  gen->add_option("--out", gf.out, "Output file")->required();
  gen->add_option("--config", config_path, "key=value file overriding flags");

  try {
    const auto args = with_config(raw_args);
    std::vector<std::string> storage{"sparseprop"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    app.parse(static_cast<int>(argv.size()), argv.data());

    if (gradcheck->parsed()) run_gradcheck(gc, out);
    if (bench->parsed()) run_bench(bf, out);
    if (train_cmd->parsed()) run_train(tf, out);
    if (gen->parsed()) run_gen(gf, out);
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace sparseprop::cli
